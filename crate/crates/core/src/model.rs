//! End-to-end compilation of an IR model plus data into a flat canonical model.

use crate::data::{DataError, DataStore, SetInstance};
use crate::diag::Diagnostic;
use crate::expand::{CConstraint, Env, EnvError, ExpandError, FamilyRows, Located, VarGroup};
use crate::ir::{validate_ir, IrModel, Sense, ValidationReport, VarType};
use crate::lp::{self, LpError, LpWriter};
use crate::KEY_SEP;
use indexmap::IndexMap;
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::sync::Arc;
use thiserror::Error;

pub use crate::expand::{Finding, LinearForm, Row, VarId};

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("model failed validation with {} error(s)", .0.errors.len())]
    Invalid(ValidationReport),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{0}")]
    Expand(Located),
    #[error(transparent)]
    Lp(#[from] LpError),
}

impl CompileError {
    /// The expansion error kind, if this came from the expander.
    pub fn expand_kind(&self) -> Option<&ExpandError> {
        match self {
            CompileError::Expand(l) => Some(&l.kind),
            _ => None,
        }
    }
}

impl From<EnvError> for CompileError {
    fn from(e: EnvError) -> Self {
        match e {
            EnvError::Data(d) => CompileError::Data(d),
            EnvError::Expand(l) => CompileError::Expand(l),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompileOptions {
    /// Expand constraint families on the rayon pool.
    pub parallel: bool,
    /// Dimension labels per variable group; missing groups use the defaults.
    pub labels: IndexMap<String, Vec<String>>,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions { parallel: true, labels: IndexMap::new() }
    }
}

/// The expanded model: variables, linear rows and a linear objective.
#[derive(Debug, Clone)]
pub struct CanonicalModel {
    pub sense: Sense,
    pub sets: Vec<Arc<SetInstance>>,
    pub groups: Vec<VarGroup>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub group_of: Vec<u32>,
    pub objective: LinearForm,
    /// Constraint family names in declaration order.
    pub families: Vec<String>,
    pub rows: Vec<Row>,
    pub findings: Vec<Finding>,
    pub warnings: Vec<Diagnostic>,
}

impl CanonicalModel {
    pub fn num_vars(&self) -> usize {
        self.lb.len()
    }

    pub fn var_type(&self, id: VarId) -> VarType {
        self.group_of_var(id).ty
    }

    pub fn group_of_var(&self, id: VarId) -> &VarGroup {
        &self.groups[self.group_of[id as usize] as usize]
    }

    pub fn group(&self, name: &str) -> Option<&VarGroup> {
        self.groups.iter().find(|g| g.name == name)
    }

    pub fn is_mip(&self) -> bool {
        self.groups.iter().any(|g| g.ty == VarType::Binary && g.count > 0)
    }

    /// Element strings of a variable's key.
    pub fn var_key(&self, id: VarId) -> Vec<&str> {
        key_strings(&self.sets, self.group_of_var(id), id)
    }

    /// `group␟k1␟k2...` with the unit separator.
    pub fn internal_name(&self, id: VarId) -> String {
        let g = self.group_of_var(id);
        let mut s = g.name.clone();
        for k in self.var_key(id) {
            s.push(KEY_SEP);
            s.push_str(k);
        }
        s
    }

    /// `group[k1,k2]` for reports.
    pub fn display_name(&self, id: VarId) -> String {
        format!("{}[{}]", self.group_of_var(id).name, self.var_key(id).join(","))
    }

    pub fn stats(&self) -> ModelStats {
        let mut st = ModelStats::new(&self.groups, &self.families);
        for r in &self.rows {
            st.add_row(r.family, r.terms.len());
        }
        st.findings = self.findings.len();
        st
    }
}

pub(crate) fn key_strings<'a>(sets: &'a [Arc<SetInstance>], g: &VarGroup, id: VarId) -> Vec<&'a str> {
    g.key((id - g.first) as usize)
        .iter()
        .zip(&g.set_ids)
        .map(|(&p, &s)| sets[s].elements[p as usize].as_str())
        .collect()
}

/// Variable and row counts of a compiled model.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ModelStats {
    pub variables: usize,
    pub continuous: usize,
    pub binary: usize,
    pub rows: usize,
    pub nonzeros: usize,
    pub findings: usize,
    pub groups: IndexMap<String, usize>,
    pub families: IndexMap<String, usize>,
}

impl ModelStats {
    fn new(groups: &[VarGroup], families: &[String]) -> ModelStats {
        let mut st = ModelStats::default();
        for g in groups {
            let n = g.count as usize;
            st.groups.insert(g.name.clone(), n);
            st.variables += n;
            match g.ty {
                VarType::Continuous => st.continuous += n,
                VarType::Binary => st.binary += n,
            }
        }
        for f in families {
            st.families.insert(f.clone(), 0);
        }
        st
    }

    fn add_row(&mut self, family: u32, nnz: usize) {
        self.rows += 1;
        self.nonzeros += nnz;
        self.families[family as usize] += 1;
    }
}

/// Default dimension labels for a variable group.
///
/// A domain_filter parameter names the columns of its prefix; other
/// positions take the index column of the first parameter declared over the
/// same set; anything left is `idx<k>`.
pub fn default_labels(model: &IrModel, var: &str) -> Vec<String> {
    let Some(def) = model.variables.get(var) else {
        return Vec::new();
    };
    let mut labels: Vec<Option<String>> = vec![None; def.domain.len()];
    if let Some(p) = def.domain_filter.as_ref().and_then(|f| model.parameters.get(f)) {
        if let Some(cols) = &p.index_columns {
            for (k, c) in cols.iter().enumerate().take(labels.len()) {
                labels[k] = Some(c.clone());
            }
        }
    }
    for (k, set) in def.domain.iter().enumerate() {
        if labels[k].is_some() {
            continue;
        }
        labels[k] = model.parameters.values().find_map(|p| {
            let q = p.domain.iter().position(|s| s == set)?;
            p.index_columns.as_ref().and_then(|c| c.get(q)).cloned()
        });
    }
    let mut out: Vec<String> = Vec::with_capacity(labels.len());
    for (k, l) in labels.into_iter().enumerate() {
        let mut l = l.unwrap_or_else(|| format!("idx{k}"));
        if out.contains(&l) || l == "value" {
            l = format!("{l}_{k}");
        }
        out.push(l);
    }
    out
}

struct Prepared {
    env: Env,
    objective: LinearForm,
    constraints: Vec<CConstraint>,
    families: Vec<String>,
}

fn prepare(model: &IrModel, store: &DataStore, opts: &CompileOptions) -> Result<Prepared, CompileError> {
    let report = validate_ir(model);
    if !report.is_ok() {
        return Err(CompileError::Invalid(report));
    }
    let mut env = Env::build(model, store)?;
    env.warnings.extend(report.warnings);
    for g in env.groups.iter_mut() {
        g.labels = match opts.labels.get(&g.name) {
            Some(l) if l.len() == g.arity() => l.clone(),
            _ => default_labels(model, &g.name),
        };
    }
    let objective = env.objective(&model.objective.expression).map_err(CompileError::Expand)?;
    let constraints = model
        .constraints
        .iter()
        .enumerate()
        .map(|(i, (name, c))| env.compile_constraint(name, i as u32, c))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CompileError::Expand)?;
    let families = model.constraints.keys().cloned().collect();
    Ok(Prepared { env, objective, constraints, families })
}

fn log_family(c: &CConstraint, f: &FamilyRows) {
    log::debug!(
        "{}: {} rows, {} findings, skipped {} by filter, {} by +inf rhs, {} by lag, {} trivial",
        c.name,
        f.rows.len(),
        f.findings.len(),
        f.filtered,
        f.inf_rhs,
        f.lag_skipped,
        f.trivial
    );
}

/// Compiles a model against its data.
pub fn compile(model: &IrModel, store: &DataStore, opts: &CompileOptions) -> Result<CanonicalModel, CompileError> {
    let p = prepare(model, store, opts)?;
    let expand = |c: &CConstraint| p.env.expand_constraint(c);
    let results: Vec<Result<FamilyRows, Located>> = if opts.parallel {
        p.constraints.par_iter().map(expand).collect()
    } else {
        p.constraints.iter().map(expand).collect()
    };
    let mut rows = Vec::new();
    let mut findings = Vec::new();
    for (c, r) in p.constraints.iter().zip(results) {
        let f = r.map_err(CompileError::Expand)?;
        log_family(c, &f);
        rows.extend(f.rows);
        findings.extend(f.findings);
    }
    let Env { sets, groups, lb, ub, group_of, warnings, .. } = p.env;
    Ok(CanonicalModel {
        sense: model.sense,
        sets,
        groups,
        lb,
        ub,
        group_of,
        objective: p.objective,
        families: p.families,
        rows,
        findings,
        warnings,
    })
}

/// Compiles and streams the LP file family by family without keeping rows.
pub fn compile_to_lp<W: Write>(
    model: &IrModel,
    store: &DataStore,
    opts: &CompileOptions,
    out: W,
) -> Result<(ModelStats, Vec<Diagnostic>), CompileError> {
    let p = prepare(model, store, opts)?;
    let names = lp::var_names(&p.env.sets, &p.env.groups)?;
    let mut w = LpWriter::begin(out, model.sense, names, &p.objective)?;
    let mut st = ModelStats::new(&p.env.groups, &p.families);
    for c in &p.constraints {
        let f = p.env.expand_constraint(c).map_err(CompileError::Expand)?;
        log_family(c, &f);
        for r in &f.rows {
            w.row(&r.name, &r.terms, r.sense, r.rhs)?;
            st.add_row(r.family, r.terms.len());
        }
        for x in &f.findings {
            w.finding(x)?;
        }
        st.findings += f.findings.len();
    }
    let groups = &p.env.groups;
    let group_of = &p.env.group_of;
    w.finish(&p.env.lb, &p.env.ub, |id| groups[group_of[id as usize] as usize].ty)?;
    Ok((st, p.env.warnings))
}

/// Statistics only; the LP text is discarded.
pub fn compile_stats(model: &IrModel, store: &DataStore, opts: &CompileOptions) -> Result<ModelStats, CompileError> {
    compile_to_lp(model, store, opts, std::io::sink()).map(|(s, _)| s)
}

/// Closed-form variable and row counts of the three model families, for
/// fully populated cost and capacity tables and full customer coverage.
pub mod closed_form {
    use indexmap::IndexMap;
    use serde::Serialize;

    /// |I|, |J|, |K|, |P|, |T| and the two link counts.
    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub struct NetworkDims {
        pub i: u64,
        pub j: u64,
        pub k: u64,
        pub p: u64,
        pub t: u64,
        pub e_ij: u64,
        pub e_jk: u64,
    }

    #[derive(Debug, Clone, Default, PartialEq, Serialize)]
    pub struct Counts {
        pub groups: IndexMap<String, u64>,
        pub families: IndexMap<String, u64>,
        pub continuous: u64,
        pub binary: u64,
    }

    impl Counts {
        pub fn variables(&self) -> u64 {
            self.continuous + self.binary
        }

        pub fn rows(&self) -> u64 {
            self.families.values().sum()
        }

        fn var(&mut self, name: &str, n: u64, binary: bool) {
            self.groups.insert(name.into(), n);
            if binary {
                self.binary += n;
            } else {
                self.continuous += n;
            }
        }

        fn fam(&mut self, name: &str, n: u64) {
            self.families.insert(name.into(), n);
        }
    }

    pub fn lp_network(d: NetworkDims) -> Counts {
        let NetworkDims { i, j, k, p, t, e_ij, e_jk } = d;
        let mut c = Counts::default();
        c.var("production_quantity", i * p * t, false);
        c.var("shipment_site_to_dc", e_ij * p * t, false);
        c.var("shipment_dc_to_customer", e_jk * p * t, false);
        c.var("inventory_site", i * p * t, false);
        c.var("inventory_dc", j * p * t, false);
        c.fam("production_capacity", i * t);
        c.fam("site_storage_capacity", i * t);
        c.fam("dc_storage_capacity", j * t);
        c.fam("throughput_capacity", j * t);
        c.fam("demand_satisfaction", k * p * t);
        c.fam("inventory_balance_site_init", i * p);
        c.fam("inventory_balance_site", i * p * t.saturating_sub(1));
        c.fam("inventory_balance_dc_init", j * p);
        c.fam("inventory_balance_dc", j * p * t.saturating_sub(1));
        c
    }

    /// Inventory-balance rows: one per entity, product and period.
    pub fn lp_inventory_balance_rows(c: &Counts) -> u64 {
        ["inventory_balance_site_init", "inventory_balance_site", "inventory_balance_dc_init", "inventory_balance_dc"]
            .iter()
            .map(|f| c.families[*f])
            .sum()
    }

    /// Capacity rows: production, throughput and both storage families.
    pub fn lp_capacity_rows(c: &Counts) -> u64 {
        ["production_capacity", "site_storage_capacity", "dc_storage_capacity", "throughput_capacity"]
            .iter()
            .map(|f| c.families[*f])
            .sum()
    }

    pub fn mip_network(d: NetworkDims) -> Counts {
        let NetworkDims { i, j, k, p, t, e_ij, e_jk } = d;
        let t1 = t.saturating_sub(1);
        let mut c = Counts::default();
        c.var("prod", i * p * t, false);
        c.var("flow_prod_to_dc", e_ij * p * t, false);
        c.var("flow_dc_to_cust", e_jk * p * t, false);
        c.var("inv_site", i * p * t, false);
        c.var("inv_dc", j * p * t, false);
        c.var("open_site", i * t, true);
        c.var("open_dc", j * t, true);
        c.fam("prod_capacity", i * t);
        c.fam("prod_bigM", i * t);
        c.fam("throughput_capacity", j * t);
        c.fam("dc_open_inflow", j * t);
        c.fam("dc_open_outflow", j * t);
        c.fam("storage_capacity_site", i * t);
        c.fam("storage_capacity_dc", j * t);
        c.fam("demand_satisfaction", k * p * t);
        c.fam("monotone_site", i * t1);
        c.fam("monotone_dc", j * t1);
        c.fam("inv_balance_site_follow_init", i * p);
        c.fam("inv_balance_site_follow", i * p * t1);
        c.fam("inv_balance_dc_follow_init", j * p);
        c.fam("inv_balance_dc_follow", j * p * t1);
        c
    }

    pub fn assignment(shipments: u64, carriers: u64) -> Counts {
        let mut c = Counts::default();
        c.var("x", shipments * carriers, true);
        c.fam("assignment_limit", shipments);
        c.fam("carrier_capacity_constraint", carriers);
        c
    }
}
