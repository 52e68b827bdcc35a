//! What-if scenarios: data patches on parameter tables, structural patches
//! on the IR, recompilation and a diff against the base solution.
//!
//! Patches are JSON objects tagged by `kind`:
//!
//! ```json
//! {"kind": "data", "param": "demand", "selector": {"prefix": ["*", "*", "7"]}, "op": "scale", "value": 1.2}
//! {"kind": "struct", "action": "remove_constraint", "name": "carrier_capacity_constraint"}
//! ```
//!
//! Data patches `set` or `scale` the rows picked by a selector: `"all"`,
//! `{"key": [...]}` for one full key, or `{"prefix": [...]}` where `"*"`
//! matches any element. Setting a key that is absent adds the row.
//! Structural actions are `add_constraint`, `remove_constraint`,
//! `set_sense`, `set_rhs_constant_shift`, `set_variable_bound` and
//! `fix_variable`.

use crate::data::{table_stem, DataStore, Table};
use crate::diag::Diagnostic;
use crate::ir::{parse_constraint, validate_ir, Expr, Fixing, IrModel, ParamType, RowSense, ValidationReport};
use crate::model::{compile, CanonicalModel, CompileError, CompileOptions};
use crate::solver::{solve, Solution, SolveOptions, SolveStatus};
use crate::KEY_SEP;
use serde::{Deserialize, Deserializer, Serialize};
use std::collections::HashMap;
use std::fmt;
use thiserror::Error;

/// Wildcard element in a prefix selector.
pub const ANY: &str = "*";

/// Changes smaller than this are not reported in diffs.
pub const DIFF_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Patch {
    Data(DataPatch),
    Struct(StructPatch),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPatch {
    pub param: String,
    pub selector: Selector,
    pub op: DataOp,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selector {
    All,
    Key(Vec<String>),
    Prefix(Vec<String>),
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::All => f.write_str("all"),
            Selector::Key(k) => write!(f, "key {k:?}"),
            Selector::Prefix(p) => write!(f, "prefix {p:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataOp {
    Set,
    Scale,
}

fn double_option<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Option<f64>>, D::Error> {
    Option::<f64>::deserialize(d).map(Some)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum StructPatch {
    AddConstraint {
        name: String,
        constraint: serde_json::Value,
    },
    RemoveConstraint {
        name: String,
    },
    SetSense {
        name: String,
        sense: String,
    },
    SetRhsConstantShift {
        name: String,
        delta: f64,
    },
    /// Absent bound: unchanged. `null`: unbounded.
    SetVariableBound {
        variable: String,
        #[serde(default, deserialize_with = "double_option", skip_serializing_if = "Option::is_none")]
        lower_bound: Option<Option<f64>>,
        #[serde(default, deserialize_with = "double_option", skip_serializing_if = "Option::is_none")]
        upper_bound: Option<Option<f64>>,
    },
    FixVariable {
        variable: String,
        key: Vec<String>,
        value: f64,
    },
}

#[derive(Debug, Clone, Error)]
pub enum PatchError {
    #[error("malformed patch: {0}")]
    Malformed(String),
    #[error("unknown parameter {0:?}")]
    UnknownParam(String),
    #[error("no row of {param:?} matches {selector}")]
    NoMatch { param: String, selector: String },
    #[error("unknown constraint {0:?}")]
    UnknownConstraint(String),
    #[error("constraint {0:?} already exists")]
    DuplicateConstraint(String),
    #[error("unknown variable {0:?}")]
    UnknownVariable(String),
    #[error("{0}")]
    Invalid(String),
    #[error("patched model fails validation with {} error(s)", .0.errors.len())]
    ValidationFailed(ValidationReport),
}

/// Parses a JSON array of patches.
pub fn parse_patches(text: &str) -> Result<Vec<Patch>, PatchError> {
    serde_json::from_str(text).map_err(|e| PatchError::Malformed(e.to_string()))
}

fn format_cell(v: f64, ty: ParamType) -> String {
    match ty {
        ParamType::Int => format!("{}", v.round() as i64),
        ParamType::Float => format!("{v}"),
    }
}

fn matches(cells: &[&str], sel: &Selector) -> bool {
    match sel {
        Selector::All => true,
        Selector::Key(k) => cells.len() == k.len() && cells.iter().zip(k).all(|(c, k)| *c == k),
        Selector::Prefix(p) => p.len() <= cells.len() && cells.iter().zip(p).all(|(c, p)| p == ANY || *c == p),
    }
}

/// Applies a data patch to a copy of the store. Untouched tables stay shared.
pub fn apply_data_patch(model: &IrModel, store: &DataStore, p: &DataPatch) -> Result<(DataStore, Vec<Diagnostic>), PatchError> {
    let def = model.parameters.get(&p.param).ok_or_else(|| PatchError::UnknownParam(p.param.clone()))?;
    if !p.value.is_finite() {
        return Err(PatchError::Invalid(format!("patch value {} is not finite", p.value)));
    }
    if p.op == DataOp::Scale && p.value <= 0.0 {
        return Err(PatchError::Invalid(format!("scale factor {} must be positive", p.value)));
    }
    let index_cols: Vec<String> = def.index_columns.clone().unwrap_or_default();
    let arity = index_cols.len();
    match &p.selector {
        Selector::Key(k) if k.len() != arity => {
            return Err(PatchError::Invalid(format!("key has {} elements, {:?} has {arity} index columns", k.len(), p.param)));
        }
        Selector::Prefix(k) if k.len() > arity => {
            return Err(PatchError::Invalid(format!("prefix has {} elements, {:?} has {arity} index columns", k.len(), p.param)));
        }
        _ => {}
    }
    let mut out = store.clone();
    let stem = table_stem(&def.source).to_string();
    if out.get(&def.source).is_none() {
        if !def.optional {
            return Err(PatchError::Invalid(format!("table {stem:?} for {:?} is missing", p.param)));
        }
        let mut cols = index_cols.clone();
        cols.push(def.column.clone());
        out.insert(stem.clone(), Table::new(cols, Vec::new()));
    }
    let table = out.get_mut(&def.source).expect("table present");
    let col_err = |c: &str| PatchError::Invalid(format!("table {stem:?} has no column {c:?}"));
    let idx: Vec<usize> =
        index_cols.iter().map(|c| table.column_index(c).ok_or_else(|| col_err(c))).collect::<Result<_, _>>()?;
    let vcol = table.column_index(&def.column).ok_or_else(|| col_err(&def.column))?;

    let mut hits = 0usize;
    for row in table.rows.iter_mut() {
        let cells: Vec<&str> = idx.iter().map(|&i| row[i].trim()).collect();
        if !matches(&cells, &p.selector) {
            continue;
        }
        hits += 1;
        let new = match p.op {
            DataOp::Set => p.value,
            DataOp::Scale => {
                let old = crate::data::parse_number(&row[vcol], def.ty).ok_or_else(|| {
                    PatchError::Invalid(format!("cell {:?} of {stem:?} is not a number", row[vcol]))
                })?;
                if p.value == 1.0 {
                    continue;
                }
                old * p.value
            }
        };
        let same = crate::data::parse_number(&row[vcol], def.ty) == Some(new);
        if !same {
            row[vcol] = format_cell(new, def.ty);
        }
    }
    let mut warnings = Vec::new();
    if hits == 0 {
        match (&p.selector, p.op) {
            (Selector::Key(k), DataOp::Set) => {
                let mut row = vec![String::new(); table.columns.len()];
                for (&i, e) in idx.iter().zip(k) {
                    row[i] = e.clone();
                }
                row[vcol] = format_cell(p.value, def.ty);
                table.rows.push(row);
            }
            (Selector::Key(k), DataOp::Scale) => {
                return Err(PatchError::NoMatch { param: p.param.clone(), selector: Selector::Key(k.clone()).to_string() });
            }
            (sel, _) => warnings.push(Diagnostic::warning(
                "no_match",
                format!("parameters.{}", p.param),
                format!("no row matches {sel}"),
            )),
        }
    }
    Ok((out, warnings))
}

/// Applies a structural patch and revalidates the whole model.
pub fn apply_struct_patch(model: &IrModel, p: &StructPatch) -> Result<(IrModel, Vec<Diagnostic>), PatchError> {
    let mut m = model.clone();
    let mut warnings = Vec::new();
    let constraint = |m: &mut IrModel, name: &str| -> Result<_, PatchError> {
        if m.constraints.contains_key(name) {
            Ok(())
        } else {
            Err(PatchError::UnknownConstraint(name.to_string()))
        }
    };
    match p {
        StructPatch::AddConstraint { name, constraint: body } => {
            if m.constraints.contains_key(name) {
                return Err(PatchError::DuplicateConstraint(name.clone()));
            }
            if !crate::ir::is_identifier(name) {
                return Err(PatchError::Invalid(format!("constraint name {name:?} is not an identifier")));
            }
            let (c, w) = parse_constraint(body, &format!("constraints.{name}")).map_err(|e| PatchError::Malformed(e.to_string()))?;
            warnings.extend(w);
            m.constraints.insert(name.clone(), c);
        }
        StructPatch::RemoveConstraint { name } => {
            constraint(&mut m, name)?;
            m.constraints.shift_remove(name);
        }
        StructPatch::SetSense { name, sense } => {
            constraint(&mut m, name)?;
            let s = RowSense::parse(sense).ok_or_else(|| PatchError::Invalid(format!("unknown sense {sense:?}")))?;
            m.constraints[name.as_str()].sense = s;
        }
        StructPatch::SetRhsConstantShift { name, delta } => {
            constraint(&mut m, name)?;
            if !delta.is_finite() {
                return Err(PatchError::Invalid(format!("shift {delta} is not finite")));
            }
            match &mut m.constraints[name.as_str()].rhs {
                Expr::Const(v) => *v += delta,
                _ => {
                    return Err(PatchError::Invalid(format!(
                        "rhs of {name:?} is not a constant; change its parameters with a data patch"
                    )))
                }
            }
        }
        StructPatch::SetVariableBound { variable, lower_bound, upper_bound } => {
            let v = m.variables.get_mut(variable).ok_or_else(|| PatchError::UnknownVariable(variable.clone()))?;
            if let Some(l) = lower_bound {
                v.lower_bound = *l;
            }
            if let Some(u) = upper_bound {
                v.upper_bound = *u;
            }
        }
        StructPatch::FixVariable { variable, key, value } => {
            let v = m.variables.get_mut(variable).ok_or_else(|| PatchError::UnknownVariable(variable.clone()))?;
            v.fixings.retain(|f| &f.key != key);
            v.fixings.push(Fixing { key: key.clone(), value: *value });
        }
    }
    let report = validate_ir(&m);
    if !report.is_ok() {
        return Err(PatchError::ValidationFailed(report));
    }
    Ok((m, warnings))
}

/// Applies patches in order to copies of the model and store.
pub fn apply_patches(
    model: &IrModel,
    store: &DataStore,
    patches: &[Patch],
) -> Result<(IrModel, DataStore, Vec<Diagnostic>), ScenarioError> {
    let mut m = model.clone();
    let mut s = store.clone();
    let mut warnings = Vec::new();
    for (i, p) in patches.iter().enumerate() {
        let tag = |e| ScenarioError { patch: Some(i), kind: ScenarioErrorKind::Patch(e) };
        match p {
            Patch::Data(d) => {
                let (ns, w) = apply_data_patch(&m, &s, d).map_err(tag)?;
                s = ns;
                warnings.extend(w);
            }
            Patch::Struct(sp) => {
                let (nm, w) = apply_struct_patch(&m, sp).map_err(tag)?;
                m = nm;
                warnings.extend(w);
            }
        }
    }
    Ok((m, s, warnings))
}

/// A compiled and solved instance.
#[derive(Debug, Clone)]
pub struct Run {
    pub model: IrModel,
    pub store: DataStore,
    pub cm: CanonicalModel,
    pub solution: Solution,
    pub warnings: Vec<Diagnostic>,
}

pub fn solve_instance(model: IrModel, store: DataStore, copts: &CompileOptions, sopts: &SolveOptions) -> Result<Run, CompileError> {
    let cm = compile(&model, &store, copts)?;
    let solution = solve(&cm, sopts);
    let warnings = cm.warnings.clone();
    Ok(Run { model, store, cm, solution, warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarDelta {
    pub group: String,
    pub key: Vec<String>,
    pub base: f64,
    pub new: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioDiff {
    pub base_status: SolveStatus,
    pub new_status: SolveStatus,
    pub base_objective: Option<f64>,
    pub new_objective: Option<f64>,
    pub objective_delta: Option<f64>,
    pub changed_variables: usize,
    pub top_changes: Vec<VarDelta>,
}

fn value_map(run: &Run) -> HashMap<String, f64> {
    if !run.solution.status.has_values() {
        return HashMap::new();
    }
    (0..run.cm.num_vars() as u32).map(|id| (run.cm.internal_name(id), run.solution.values[id as usize])).collect()
}

/// Compares two runs variable by variable, keyed by group and element key.
pub fn diff(base: &Run, new: &Run, top_k: usize) -> ScenarioDiff {
    let (b, n) = (&base.solution, &new.solution);
    let objective_delta = match (b.objective, n.objective) {
        (Some(x), Some(y)) => Some(y - x),
        _ => None,
    };
    let mut changes = Vec::new();
    if b.status.has_values() && n.status.has_values() {
        let bv = value_map(base);
        let nv = value_map(new);
        let mut names: Vec<&String> = bv.keys().chain(nv.keys().filter(|k| !bv.contains_key(*k))).collect();
        names.sort();
        for name in names {
            let x = bv.get(name).copied().unwrap_or(0.0);
            let y = nv.get(name).copied().unwrap_or(0.0);
            if (y - x).abs() > DIFF_TOL {
                let mut parts = name.split(KEY_SEP);
                let group = parts.next().unwrap_or_default().to_string();
                changes.push(VarDelta { group, key: parts.map(String::from).collect(), base: x, new: y, delta: y - x });
            }
        }
    }
    let changed_variables = changes.len();
    changes.sort_by(|a, b| b.delta.abs().total_cmp(&a.delta.abs()));
    changes.truncate(top_k);
    ScenarioDiff {
        base_status: b.status,
        new_status: n.status,
        base_objective: b.objective,
        new_objective: n.objective,
        objective_delta,
        changed_variables,
        top_changes: changes,
    }
}

#[derive(Debug, Error)]
pub enum ScenarioErrorKind {
    #[error(transparent)]
    Patch(#[from] PatchError),
    #[error(transparent)]
    Compile(#[from] CompileError),
}

#[derive(Debug, Error)]
pub struct ScenarioError {
    /// Index of the patch that introduced the error.
    pub patch: Option<usize>,
    pub kind: ScenarioErrorKind,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.patch {
            Some(i) => write!(f, "patch {i}: {}", self.kind),
            None => write!(f, "{}", self.kind),
        }
    }
}

/// Applies patches to the base, recompiles, re-solves and diffs.
pub fn run_scenario(
    base: &Run,
    patches: &[Patch],
    copts: &CompileOptions,
    sopts: &SolveOptions,
    top_k: usize,
) -> Result<(Run, ScenarioDiff), ScenarioError> {
    let (m, s, warnings) = apply_patches(&base.model, &base.store, patches)?;
    let run = match solve_instance(m, s, copts, sopts) {
        Ok(mut r) => {
            r.warnings.extend(warnings);
            r
        }
        Err(e) => {
            // Find the first prefix of the patch list that fails to compile.
            let mut culprit = patches.len().checked_sub(1);
            for k in 0..patches.len() {
                let Ok((m, s, _)) = apply_patches(&base.model, &base.store, &patches[..=k]) else {
                    continue;
                };
                if compile(&m, &s, copts).is_err() {
                    culprit = Some(k);
                    break;
                }
            }
            return Err(ScenarioError { patch: culprit, kind: ScenarioErrorKind::Compile(e) });
        }
    };
    let d = diff(base, &run, top_k);
    Ok((run, d))
}
