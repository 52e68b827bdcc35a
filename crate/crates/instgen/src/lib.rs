//! Seeded synthetic instances for the three reference model families.
//!
//! Every random field draws from its own ChaCha8 stream (see [`rng`]), so
//! adding a draw to one field never shifts another. Output is byte-stable for
//! a given configuration within this crate; it does not reproduce the
//! reference instances, whose generator is unspecified.

pub mod assignment;
pub mod network;
pub mod rng;

use optir_core::data::DataStore;
use optir_core::fixtures;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    LpNetwork,
    MipNetwork,
    Assignment,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::LpNetwork => "lp_network",
            Family::MipNetwork => "mip_network",
            Family::Assignment => "assignment",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        match s {
            "lp_network" | "lp" => Some(Family::LpNetwork),
            "mip_network" | "mip" => Some(Family::MipNetwork),
            "assignment" => Some(Family::Assignment),
            _ => None,
        }
    }

    /// The IR document matching this family's CSV layout.
    pub fn ir(self) -> &'static str {
        match self {
            Family::LpNetwork => fixtures::SUPPLY_CHAIN_LP_IR,
            Family::MipNetwork => fixtures::SUPPLY_CHAIN_MIP_IR,
            Family::Assignment => fixtures::ASSIGNMENT_IR,
        }
    }
}

/// Instance dimensions. Unset fields take the reference scale of the family.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scale {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sites: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dcs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub customers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub products: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<usize>,
    /// Nearest DCs linked from each production site.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site_fanout: Option<usize>,
    /// Nearest customers linked from each DC.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dc_fanout: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carriers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shipments: Option<usize>,
}

impl Scale {
    pub fn network(sites: usize, dcs: usize, customers: usize, products: usize, periods: usize) -> Scale {
        Scale {
            sites: Some(sites),
            dcs: Some(dcs),
            customers: Some(customers),
            products: Some(products),
            periods: Some(periods),
            ..Scale::default()
        }
    }

    pub fn assignment(carriers: usize, shipments: usize) -> Scale {
        Scale { carriers: Some(carriers), shipments: Some(shipments), ..Scale::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub family: Family,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub scale: Scale,
    /// Distribution parameters by field name, merged over the family defaults.
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub overrides: Map<String, Value>,
}

fn default_seed() -> u64 {
    42
}

impl GenConfig {
    pub fn new(family: Family, seed: u64, scale: Scale) -> GenConfig {
        GenConfig { family, seed, scale, overrides: Map::new() }
    }

    pub fn with_override(mut self, key: &str, value: Value) -> GenConfig {
        self.overrides.insert(key.to_string(), value);
        self
    }
}

/// Merges `overrides` into the serialized defaults and reads them back.
pub(crate) fn merge_params<P>(defaults: &P, overrides: &Map<String, Value>) -> Result<P, GenError>
where
    P: Serialize + for<'de> Deserialize<'de>,
{
    let mut v = serde_json::to_value(defaults).expect("params serialize");
    let obj = v.as_object_mut().expect("params are an object");
    for (k, x) in overrides {
        if !obj.contains_key(k) {
            return Err(GenError::Config(format!("unknown override {k:?}")));
        }
        obj.insert(k.clone(), x.clone());
    }
    serde_json::from_value(v).map_err(|e| GenError::Config(format!("override: {e}")))
}

pub(crate) fn check_range(name: &str, r: [f64; 2]) -> Result<(), GenError> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
        return Err(GenError::Config(format!("{name} must be a finite range [lo, hi] with lo <= hi")));
    }
    Ok(())
}

/// A generated instance held in memory.
#[derive(Debug, Clone)]
pub struct Instance {
    pub family: Family,
    pub store: DataStore,
    /// Config with every default filled in, written as `gen_config.json`.
    pub resolved: Value,
}

impl Instance {
    pub fn ir(&self) -> &'static str {
        self.family.ir()
    }

    /// Writes `<dir>/data/*.csv`, `<dir>/ir.json` and `<dir>/gen_config.json`.
    pub fn write(&self, dir: &Path) -> Result<(), GenError> {
        let io = |p: &Path, e: &dyn std::fmt::Display| GenError::Io { path: p.display().to_string(), message: e.to_string() };
        let data = dir.join("data");
        std::fs::create_dir_all(&data).map_err(|e| io(&data, &e))?;
        self.store.write_tables(&data).map_err(|e| io(&data, &e))?;
        let ir = dir.join("ir.json");
        std::fs::write(&ir, self.ir()).map_err(|e| io(&ir, &e))?;
        let cfg = dir.join("gen_config.json");
        let text = serde_json::to_string_pretty(&self.resolved).expect("config serializes") + "\n";
        std::fs::write(&cfg, text).map_err(|e| io(&cfg, &e))?;
        Ok(())
    }
}

pub fn generate(cfg: &GenConfig) -> Result<Instance, GenError> {
    match cfg.family {
        Family::LpNetwork => network::gen_lp_network(cfg),
        Family::MipNetwork => network::gen_mip_network(cfg),
        Family::Assignment => assignment::gen_assignment(cfg),
    }
}

/// Zero-padded element id, at least `min_width` digits.
pub(crate) fn element_id(prefix: &str, n: usize, count: usize, min_width: usize) -> String {
    let width = count.to_string().len().max(min_width);
    format!("{prefix}_{n:0width$}")
}

pub(crate) fn fmt_fixed(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}
