//! Solution files: one CSV per variable group plus `summary.json`.

use super::{Solution, SolveStatus};
use crate::model::CanonicalModel;
use indexmap::IndexMap;
use serde::Serialize;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Values with smaller magnitude are written as zero.
pub const ZERO_CUTOFF: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("solution status {0} has no values to write")]
    NoSolution(SolveStatus),
    #[error("cannot write {path}: {message}")]
    Io { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupValues {
    pub group_name: String,
    pub dimension_labels: Vec<String>,
    pub variables: Vec<KeyValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyValue {
    pub key: Vec<String>,
    pub value: f64,
}

fn clean(v: f64) -> f64 {
    if v.abs() < ZERO_CUTOFF {
        0.0
    } else {
        v
    }
}

pub fn format_value(v: f64) -> String {
    format!("{}", clean(v))
}

/// Values grouped by variable, in instantiation order.
pub fn solution_groups(sol: &Solution, cm: &CanonicalModel) -> Vec<GroupValues> {
    if !sol.status.has_values() {
        return Vec::new();
    }
    cm.groups
        .iter()
        .map(|g| GroupValues {
            group_name: g.name.clone(),
            dimension_labels: g.labels.clone(),
            variables: g
                .ids()
                .map(|id| KeyValue {
                    key: cm.var_key(id).into_iter().map(String::from).collect(),
                    value: clean(sol.values[id as usize]),
                })
                .collect(),
        })
        .collect()
}

fn nonzeros(sol: &Solution, cm: &CanonicalModel) -> IndexMap<String, usize> {
    cm.groups
        .iter()
        .map(|g| {
            let n = if sol.status.has_values() {
                g.ids().filter(|&id| clean(sol.values[id as usize]) != 0.0).count()
            } else {
                0
            };
            (g.name.clone(), n)
        })
        .collect()
}

pub fn summary_json(sol: &Solution, cm: &CanonicalModel) -> Value {
    json!({
        "status": sol.status.as_str(),
        "objective": sol.objective,
        "variables": cm.num_vars(),
        "rows": cm.rows.len(),
        "nonzeros": nonzeros(sol, cm),
    })
}

/// Writes `solution_<group>.csv` for every group and `summary.json`.
///
/// A CSV has one column per dimension label followed by `value`, one row per
/// instantiated variable in instantiation order. `summary.json` holds
/// `status`, `objective`, `variables`, `rows` and per-group `nonzeros`.
pub fn write_solution(sol: &Solution, cm: &CanonicalModel, dir: &Path) -> Result<Vec<PathBuf>, OutputError> {
    if !sol.status.has_values() {
        return Err(OutputError::NoSolution(sol.status));
    }
    let io = |path: &Path, e: &dyn std::fmt::Display| OutputError::Io { path: path.to_path_buf(), message: e.to_string() };
    std::fs::create_dir_all(dir).map_err(|e| io(dir, &e))?;
    let mut written = Vec::new();
    for g in &cm.groups {
        let path = dir.join(format!("solution_{}.csv", g.name));
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .map_err(|e| io(&path, &e))?;
        let mut header = g.labels.clone();
        header.push("value".into());
        w.write_record(&header).map_err(|e| io(&path, &e))?;
        for id in g.ids() {
            let mut rec: Vec<String> = cm.var_key(id).into_iter().map(String::from).collect();
            rec.push(format_value(sol.values[id as usize]));
            w.write_record(&rec).map_err(|e| io(&path, &e))?;
        }
        w.flush().map_err(|e| io(&path, &e))?;
        written.push(path);
    }
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary_json(sol, cm)).expect("summary is serializable") + "\n";
    std::fs::write(&path, text).map_err(|e| io(&path, &e))?;
    written.push(path);
    Ok(written)
}
