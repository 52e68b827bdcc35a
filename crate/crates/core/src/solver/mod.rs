//! Desk-scale solver: simplex for LPs, branch and bound over binaries.

mod bnb;
mod check;
mod output;
pub mod simplex;

pub use check::{check_solution, CheckReport, Violation};
pub use output::{solution_groups, summary_json, write_solution, GroupValues, OutputError};

use crate::ir::{RowSense, Sense};
use crate::model::CanonicalModel;
use serde::Serialize;
use simplex::{Control, LpData, LpStatus};
use std::fmt;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    Unbounded,
    Error,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Feasible => "feasible",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::Error => "error",
        }
    }

    pub fn has_values(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Feasible)
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    /// Branch-and-bound nodes; reaching it ends the search like the time limit.
    pub node_limit: Option<usize>,
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
    pub relative_gap_tol: f64,
    /// Progress log on standard error.
    pub log: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { time_limit: None, node_limit: None, feasibility_tol: 1e-6, integrality_tol: 1e-6, relative_gap_tol: 1e-6, log: false }
    }
}

impl SolveOptions {
    fn control(&self, start: Instant) -> Control {
        Control {
            deadline: self.time_limit.map(|s| start + Duration::from_secs_f64(s.max(0.0))),
            feas_tol: self.feasibility_tol,
            log: self.log,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    /// One value per variable id; empty unless optimal or feasible.
    pub values: Vec<f64>,
    pub iterations: usize,
    pub nodes: usize,
    pub message: Option<String>,
}

impl Solution {
    fn without_values(status: SolveStatus, message: Option<String>) -> Solution {
        Solution { status, objective: None, values: Vec::new(), iterations: 0, nodes: 0, message }
    }
}

/// Solves with simplex or branch and bound depending on the variable types.
pub fn solve(cm: &CanonicalModel, opts: &SolveOptions) -> Solution {
    if cm.is_mip() {
        solve_mip(cm, opts)
    } else {
        solve_lp(cm, opts)
    }
}

/// The canonical model as a minimization LP. Returns the data and the
/// objective sign (`-1` for maximization).
pub(crate) fn lp_data(cm: &CanonicalModel) -> (LpData, f64) {
    let sign = if cm.sense == Sense::Maximize { -1.0 } else { 1.0 };
    let n = cm.num_vars();
    let mut cost = vec![0.0; n];
    for &(v, a) in &cm.objective.terms {
        cost[v as usize] = sign * a;
    }
    let rows: Vec<Vec<(u32, f64)>> = cm.rows.iter().map(|r| r.terms.clone()).collect();
    let lo: Vec<f64> = cm
        .rows
        .iter()
        .map(|r| if r.sense == RowSense::Le { f64::NEG_INFINITY } else { r.rhs })
        .collect();
    let hi: Vec<f64> = cm
        .rows
        .iter()
        .map(|r| if r.sense == RowSense::Ge { f64::INFINITY } else { r.rhs })
        .collect();
    (LpData::from_rows(n, &rows, &lo, &hi, cost, &cm.lb, &cm.ub), sign)
}

/// Snaps values within a hair of a bound onto it.
fn tidy(x: &mut [f64], lb: &[f64], ub: &[f64]) {
    for (j, v) in x.iter_mut().enumerate() {
        if (*v - lb[j]).abs() <= 1e-11 {
            *v = lb[j];
        } else if (*v - ub[j]).abs() <= 1e-11 {
            *v = ub[j];
        }
        if *v == 0.0 {
            *v = 0.0;
        }
    }
}

fn primal_feasible(lp: &LpData, x: &[f64], lb: &[f64], ub: &[f64], tol: f64) -> bool {
    let act = lp.activities(x);
    (0..lp.n).all(|j| x[j] >= lb[j] - tol && x[j] <= ub[j] + tol)
        && (0..lp.m).all(|i| -act[i] >= lp.lb[lp.n + i] - tol && -act[i] <= lp.ub[lp.n + i] + tol)
}

/// Solves the continuous relaxation (binaries relaxed to [0,1] if present).
pub fn solve_lp(cm: &CanonicalModel, opts: &SolveOptions) -> Solution {
    if !cm.findings.is_empty() {
        return Solution::without_values(SolveStatus::Infeasible, Some(format!("{} infeasible constant rows", cm.findings.len())));
    }
    let start = Instant::now();
    let (lp, _) = lp_data(cm);
    let ctl = opts.control(start);
    let r = simplex::solve(&lp, &lp.lb, &lp.ub, None, &ctl);
    let n = lp.n;
    let finish = |status: SolveStatus, mut x: Vec<f64>| {
        x.truncate(n);
        tidy(&mut x, &cm.lb, &cm.ub);
        let objective = Some(cm.objective.eval(&x));
        Solution { status, objective, values: x, iterations: r.iterations, nodes: 0, message: None }
    };
    let mut sol = match r.status {
        LpStatus::Optimal => finish(SolveStatus::Optimal, r.x.clone()),
        LpStatus::TimeLimit if primal_feasible(&lp, &r.x[..n], &lp.lb, &lp.ub, opts.feasibility_tol) => {
            finish(SolveStatus::Feasible, r.x.clone())
        }
        LpStatus::TimeLimit => Solution::without_values(SolveStatus::Error, Some("time limit reached".into())),
        LpStatus::Infeasible => Solution::without_values(SolveStatus::Infeasible, None),
        LpStatus::Unbounded => Solution::without_values(SolveStatus::Unbounded, None),
        LpStatus::Error(e) => Solution::without_values(SolveStatus::Error, Some(e)),
    };
    sol.iterations = r.iterations;
    if opts.log {
        eprintln!("lp: {} after {} iterations", sol.status, sol.iterations);
    }
    sol
}

/// Branch and bound over the binary variables.
pub fn solve_mip(cm: &CanonicalModel, opts: &SolveOptions) -> Solution {
    if !cm.findings.is_empty() {
        return Solution::without_values(SolveStatus::Infeasible, Some(format!("{} infeasible constant rows", cm.findings.len())));
    }
    bnb::solve(cm, opts)
}
