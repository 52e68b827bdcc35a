//! Independent re-evaluation of a solution against the canonical model.

use crate::ir::{RowSense, VarType};
use crate::model::CanonicalModel;
use indexmap::IndexMap;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub name: String,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    /// Largest row or bound violation.
    pub max_violation: f64,
    /// Largest row violation per constraint family (every family listed).
    pub family_max: IndexMap<String, f64>,
    /// Rows violated by more than the tolerance.
    pub rows: Vec<Violation>,
    pub bounds: Vec<Violation>,
    pub integrality: Vec<Violation>,
    /// Term-less rows found infeasible at compile time.
    pub findings: Vec<String>,
    pub objective: f64,
}

impl CheckReport {
    pub fn is_feasible(&self) -> bool {
        self.rows.is_empty() && self.bounds.is_empty() && self.integrality.is_empty() && self.findings.is_empty()
    }
}

fn row_violation(sense: RowSense, act: f64, rhs: f64) -> f64 {
    match sense {
        RowSense::Le => (act - rhs).max(0.0),
        RowSense::Ge => (rhs - act).max(0.0),
        RowSense::Eq => (act - rhs).abs(),
    }
}

/// Evaluates every row, bound and integrality requirement at `values`.
pub fn check_solution(cm: &CanonicalModel, values: &[f64], tol: f64) -> CheckReport {
    assert_eq!(values.len(), cm.num_vars(), "one value per variable");
    let mut family_max: IndexMap<String, f64> = cm.families.iter().map(|f| (f.clone(), 0.0)).collect();
    let mut rows = Vec::new();
    let mut max_violation: f64 = 0.0;
    for r in &cm.rows {
        let act: f64 = r.terms.iter().map(|&(v, a)| a * values[v as usize]).sum();
        let viol = row_violation(r.sense, act, r.rhs);
        let slot = &mut family_max[r.family as usize];
        *slot = slot.max(viol);
        max_violation = max_violation.max(viol);
        if viol > tol {
            rows.push(Violation { name: r.name.clone(), amount: viol });
        }
    }
    let mut findings = Vec::new();
    for f in &cm.findings {
        let viol = row_violation(f.sense, 0.0, f.rhs);
        let slot = &mut family_max[f.family as usize];
        *slot = slot.max(viol);
        max_violation = max_violation.max(viol);
        findings.push(f.name.clone());
    }
    let mut bounds = Vec::new();
    let mut integrality = Vec::new();
    for (j, &v) in values.iter().enumerate() {
        let viol = (cm.lb[j] - v).max(v - cm.ub[j]).max(0.0);
        max_violation = max_violation.max(viol);
        if viol > tol {
            bounds.push(Violation { name: cm.display_name(j as u32), amount: viol });
        }
        if cm.var_type(j as u32) == VarType::Binary {
            let gap = (v - v.round()).abs();
            if gap > tol {
                integrality.push(Violation { name: cm.display_name(j as u32), amount: gap });
            }
        }
    }
    CheckReport {
        max_violation,
        family_max,
        rows,
        bounds,
        integrality,
        findings,
        objective: cm.objective.eval(values),
    }
}
