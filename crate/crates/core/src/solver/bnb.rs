use super::simplex::{self, Basis, LpStatus};
use super::{lp_data, tidy, Solution, SolveOptions, SolveStatus};
use crate::ir::VarType;
use crate::model::CanonicalModel;
use std::sync::Arc;
use std::time::Instant;

/// Nodes between best-bound selections.
const BEST_FIRST_EVERY: usize = 1000;

struct Node {
    fixes: Vec<(u32, f64)>,
    basis: Option<Arc<Basis>>,
    bound: f64,
}

/// Depth-first branch and bound with periodic best-bound selection.
pub(super) fn solve(cm: &CanonicalModel, opts: &SolveOptions) -> Solution {
    let start = Instant::now();
    let ctl = opts.control(start);
    let (lp, sign) = lp_data(cm);
    let n = lp.n;
    let binaries: Vec<usize> = (0..n).filter(|&j| cm.var_type(j as u32) == VarType::Binary).collect();
    let min_obj = |x: &[f64]| sign * cm.objective.eval(&x[..n]);
    let cutoff = |inc: f64| inc - (opts.relative_gap_tol * inc.abs()).max(1e-9);

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut stack = vec![Node { fixes: Vec::new(), basis: None, bound: f64::NEG_INFINITY }];
    let mut nodes = 0usize;
    let mut iterations = 0usize;
    let mut timed_out = false;
    let mut error: Option<String> = None;
    let (mut lb, mut ub) = (lp.lb.clone(), lp.ub.clone());

    while !stack.is_empty() {
        if nodes > 0 && nodes % BEST_FIRST_EVERY == 0 {
            let mut best = stack.len() - 1;
            for (k, nd) in stack.iter().enumerate() {
                if nd.bound < stack[best].bound {
                    best = k;
                }
            }
            let nd = stack.remove(best);
            stack.push(nd);
        }
        let node = stack.pop().expect("stack is non-empty");
        if let Some((inc, _)) = &incumbent {
            if node.bound >= cutoff(*inc) {
                continue;
            }
        }
        if ctl.deadline.is_some_and(|d| Instant::now() >= d) || opts.node_limit.is_some_and(|l| nodes >= l) {
            timed_out = true;
            break;
        }
        nodes += 1;
        lb.copy_from_slice(&lp.lb);
        ub.copy_from_slice(&lp.ub);
        for &(v, val) in &node.fixes {
            lb[v as usize] = val;
            ub[v as usize] = val;
        }
        let r = simplex::solve(&lp, &lb, &ub, node.basis.as_deref(), &ctl);
        iterations += r.iterations;
        match r.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded if nodes == 1 => {
                return finish(SolveStatus::Unbounded, None, nodes, iterations, None);
            }
            LpStatus::Unbounded => continue,
            LpStatus::TimeLimit => {
                timed_out = true;
                break;
            }
            LpStatus::Error(e) => {
                error.get_or_insert(e);
                continue;
            }
        }
        let bound = min_obj(&r.x);
        if let Some((inc, _)) = &incumbent {
            if bound >= cutoff(*inc) {
                continue;
            }
        }
        let mut branch: Option<(usize, f64)> = None;
        for &j in &binaries {
            let v = r.x[j];
            let frac = v - v.floor();
            if frac.min(1.0 - frac) <= opts.integrality_tol {
                continue;
            }
            let score = (frac - 0.5).abs();
            if branch.is_none_or(|(b, _)| score < (r.x[b] - r.x[b].floor() - 0.5).abs()) {
                branch = Some((j, v));
            }
        }
        let basis = Arc::new(r.basis);
        match branch {
            Some((j, v)) => {
                let up = v - v.floor() >= 0.5;
                let (first, second) = if up { (1.0, 0.0) } else { (0.0, 1.0) };
                for val in [second, first] {
                    let mut fixes = node.fixes.clone();
                    fixes.push((j as u32, val));
                    stack.push(Node { fixes, basis: Some(basis.clone()), bound });
                }
            }
            None => {
                // Integral: pin the binaries and re-solve for exact continuous values.
                for &j in &binaries {
                    let v = r.x[j].round();
                    lb[j] = v;
                    ub[j] = v;
                }
                let fixed = simplex::solve(&lp, &lb, &ub, Some(&basis), &ctl);
                iterations += fixed.iterations;
                if fixed.status != LpStatus::Optimal {
                    continue;
                }
                let mut x = fixed.x;
                x.truncate(n);
                for &j in &binaries {
                    x[j] = lb[j];
                }
                tidy(&mut x, &cm.lb, &cm.ub);
                let obj = min_obj(&x);
                if incumbent.as_ref().is_none_or(|(inc, _)| obj < *inc) {
                    if opts.log {
                        eprintln!("bnb node {nodes}: incumbent {}", sign * obj);
                    }
                    incumbent = Some((obj, x));
                }
            }
        }
    }

    match (incumbent, timed_out) {
        (Some((_, x)), false) => finish(SolveStatus::Optimal, Some((cm, x)), nodes, iterations, None),
        (Some((_, x)), true) => finish(SolveStatus::Feasible, Some((cm, x)), nodes, iterations, Some("limit reached".into())),
        (None, true) => finish(SolveStatus::Error, None, nodes, iterations, Some("limit reached without an incumbent".into())),
        (None, false) => match error {
            Some(e) => finish(SolveStatus::Error, None, nodes, iterations, Some(e)),
            None => finish(SolveStatus::Infeasible, None, nodes, iterations, None),
        },
    }
}

fn finish(
    status: SolveStatus,
    values: Option<(&CanonicalModel, Vec<f64>)>,
    nodes: usize,
    iterations: usize,
    message: Option<String>,
) -> Solution {
    let (objective, values) = match values {
        Some((cm, x)) => (Some(cm.objective.eval(&x)), x),
        None => (None, Vec::new()),
    };
    Solution { status, objective, values, iterations, nodes, message }
}
