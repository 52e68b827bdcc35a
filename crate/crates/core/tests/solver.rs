mod common;

use common::*;
use optir_core::data::DataStore;
use optir_core::fixtures::ASSIGNMENT_IR;
use optir_core::ir::parse_ir;
use optir_core::model::{compile, CanonicalModel, CompileOptions};
use optir_core::solver::{check_solution, solve, write_solution, Solution, SolveOptions, SolveStatus};
use rand::Rng;

const VERTEX_TOL: f64 = 1e-7;
const FEAS_TOL: f64 = 1e-6;
const OBJ_REL_TOL: f64 = 1e-6;
const SCALE_REL_TOL: f64 = 1e-9;

fn build(ir: &str, store: &DataStore) -> CanonicalModel {
    compile(&parse_ir(ir).unwrap().model, store, &CompileOptions::default()).unwrap()
}

/// Solution values ordered by column index `c0, c1, ...`.
fn columns(cm: &CanonicalModel, sol: &Solution, n: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for id in 0..cm.num_vars() as u32 {
        let j: usize = cm.var_key(id)[0][1..].parse().unwrap();
        x[j] = sol.values[id as usize];
    }
    x
}

#[test]
fn lp_matches_vertex_enumeration() {
    let mut r = rng(11);
    let (mut optimal, mut infeasible) = (0, 0);
    for case in 0..100 {
        let n = r.random_range(1..=6);
        let m = r.random_range(1..=4);
        let ub = r.random_range(1..=10) as f64;
        let maximize = r.random_bool(0.5);
        let mx = random_matrix(&mut r, m, n);
        let cm = build(&matrix_ir("continuous", Some(ub), if maximize { "maximize" } else { "minimize" }), &mx.store());
        let sol = solve(&cm, &SolveOptions::default());
        match vertex_optimum(&mx, ub, maximize) {
            None => {
                assert_eq!(sol.status, SolveStatus::Infeasible, "case {case}");
                infeasible += 1;
            }
            Some((want, _)) => {
                assert_eq!(sol.status, SolveStatus::Optimal, "case {case}");
                let got = sol.objective.unwrap();
                assert!((got - want).abs() <= VERTEX_TOL * want.abs().max(1.0), "case {case}: {got} vs {want}");
                let x = columns(&cm, &sol, n);
                assert!(mx.feasible(&x, FEAS_TOL), "case {case}");
                optimal += 1;
            }
        }
    }
    assert!(optimal >= 50 && infeasible >= 1, "{optimal} optimal, {infeasible} infeasible");
}

#[test]
fn mip_matches_brute_force() {
    let mut r = rng(12);
    let mut feasible = 0;
    for case in 0..50 {
        let n = r.random_range(1..=12);
        let m = r.random_range(1..=4);
        let maximize = r.random_bool(0.5);
        let mx = random_matrix(&mut r, m, n);
        let cm = build(&matrix_ir("binary", Some(1.0), if maximize { "maximize" } else { "minimize" }), &mx.store());
        let mut best: Option<f64> = None;
        for mask in 0u32..(1 << n) {
            let x: Vec<f64> = (0..n).map(|j| ((mask >> j) & 1) as f64).collect();
            if mx.feasible(&x, 1e-9) {
                let v = mx.value(&x);
                best = Some(match best {
                    None => v,
                    Some(b) => if maximize { b.max(v) } else { b.min(v) },
                });
            }
        }
        let sol = solve(&cm, &SolveOptions::default());
        match best {
            None => assert_eq!(sol.status, SolveStatus::Infeasible, "case {case}"),
            Some(want) => {
                feasible += 1;
                assert_eq!(sol.status, SolveStatus::Optimal, "case {case}");
                assert!((sol.objective.unwrap() - want).abs() <= 1e-6, "case {case}: {:?} vs {want}", sol.objective);
                let x = columns(&cm, &sol, n);
                assert!(x.iter().all(|v| (v - v.round()).abs() <= 1e-6));
                assert!(mx.feasible(&x, FEAS_TOL));
            }
        }
    }
    assert!(feasible >= 25);
}

#[test]
fn assignment_matches_enumeration() {
    let mut r = rng(13);
    for case in 0..50 {
        let inst = Assign::random(&mut r, 8, 3);
        let cm = build(ASSIGNMENT_IR, &inst.store());
        let sol = solve(&cm, &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal, "case {case}");
        let got = sol.objective.unwrap();
        assert!((got - inst.best() as f64).abs() < 1e-6, "case {case}: {got} vs {}", inst.best());
        let rep = check_solution(&cm, &sol.values, FEAS_TOL);
        assert!(rep.is_feasible(), "case {case}: {rep:?}");
    }
}

/// At a nondegenerate optimal vertex the objective is a sign-correct
/// combination of the active constraint normals.
#[test]
fn optimal_vertices_satisfy_kkt() {
    let mut r = rng(14);
    let mut checked = 0;
    let mut attempts = 0;
    while checked < 20 {
        attempts += 1;
        assert!(attempts < 2000);
        let n = r.random_range(2..=5);
        let m = r.random_range(1..=4);
        let ub = r.random_range(2..=10) as f64;
        let mut mx = random_matrix(&mut r, m, n);
        mx.kind = vec![RowKind::Le; m];
        mx.b = (0..m).map(|_| r.random_range(1..=20) as f64).collect();
        let cm = build(&matrix_ir("continuous", Some(ub), "maximize"), &mx.store());
        let sol = solve(&cm, &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        let x = columns(&cm, &sol, n);

        // active faces written as g·x <= h
        let mut active: Vec<Vec<f64>> = Vec::new();
        for i in 0..m {
            let act: f64 = mx.a[i].iter().zip(&x).map(|(a, v)| a * v).sum();
            if (act - mx.b[i]).abs() <= 1e-7 {
                active.push(mx.a[i].clone());
            }
        }
        for j in 0..n {
            let e = |s: f64| (0..n).map(|k| if k == j { s } else { 0.0 }).collect::<Vec<f64>>();
            if x[j].abs() <= 1e-7 {
                active.push(e(-1.0));
            }
            if (x[j] - ub).abs() <= 1e-7 {
                active.push(e(1.0));
            }
        }
        if active.len() != n {
            continue;
        }
        // solve active^T y = c
        let t: Vec<Vec<f64>> = (0..n).map(|k| active.iter().map(|g| g[k]).collect()).collect();
        let Some(y) = solve_square(t, mx.c.clone()) else { continue };
        assert!(y.iter().all(|&v| v >= -1e-7), "negative multiplier {y:?}");
        checked += 1;
    }
}

#[test]
fn objective_scaling_invariance() {
    let mut r = rng(15);
    for case in 0..30 {
        let n = r.random_range(1..=6);
        let m = r.random_range(1..=4);
        let mx = random_matrix(&mut r, m, n);
        let lambda = [0.001, 0.5, 3.0, 1000.0][case % 4];
        let mut scaled = mx.clone();
        scaled.c.iter_mut().for_each(|c| *c *= lambda);
        let ir = matrix_ir("continuous", Some(5.0), "maximize");
        let (cm, cs) = (build(&ir, &mx.store()), build(&ir, &scaled.store()));
        let (a, b) = (solve(&cm, &SolveOptions::default()), solve(&cs, &SolveOptions::default()));
        assert_eq!(a.status, b.status);
        if a.status != SolveStatus::Optimal {
            continue;
        }
        let (va, vb) = (a.objective.unwrap(), b.objective.unwrap());
        assert!((vb - lambda * va).abs() <= SCALE_REL_TOL * (lambda * va).abs().max(1e-12), "case {case}: {vb} vs {}", lambda * va);
        // the scaled solution is optimal for the original objective
        let xb = columns(&cs, &b, n);
        assert!((mx.value(&xb) - va).abs() <= SCALE_REL_TOL * va.abs().max(1.0));
    }
}

#[test]
fn check_solution_reports_violations() {
    let mx = Matrix { a: vec![vec![1.0, 1.0]], kind: vec![RowKind::Le], b: vec![4.0], c: vec![3.0, 2.0] };
    let cm = build(&matrix_ir("continuous", Some(3.0), "maximize"), &mx.store());
    let sol = solve(&cm, &SolveOptions::default());
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.objective.unwrap() - 11.0).abs() <= OBJ_REL_TOL * 11.0);
    let rep = check_solution(&cm, &sol.values, FEAS_TOL);
    assert!(rep.max_violation <= FEAS_TOL);
    assert!((rep.objective - sol.objective.unwrap()).abs() <= OBJ_REL_TOL * 11.0);

    let bad = vec![4.0, 1.5];
    let rep = check_solution(&cm, &bad, FEAS_TOL);
    assert!(!rep.is_feasible());
    assert!((rep.max_violation - 1.5).abs() < 1e-12);
    assert_eq!(rep.bounds.len(), 1);
    assert_eq!(rep.rows.len(), 1);

    let bcm = build(&matrix_ir("binary", Some(1.0), "maximize"), &mx.store());
    let rep = check_solution(&bcm, &[0.5, 1.0], FEAS_TOL);
    assert_eq!(rep.integrality.len(), 1);
}

#[test]
fn infeasible_and_unbounded_statuses() {
    let mx = Matrix { a: vec![vec![1.0, 1.0], vec![1.0, 1.0]], kind: vec![RowKind::Le, RowKind::Ge], b: vec![1.0, 3.0], c: vec![1.0, 1.0] };
    let cm = build(&matrix_ir("continuous", None, "maximize"), &mx.store());
    assert_eq!(solve(&cm, &SolveOptions::default()).status, SolveStatus::Infeasible);

    let mx = Matrix { a: vec![vec![1.0, -1.0]], kind: vec![RowKind::Le], b: vec![1.0], c: vec![1.0, 1.0] };
    let cm = build(&matrix_ir("continuous", None, "maximize"), &mx.store());
    let sol = solve(&cm, &SolveOptions::default());
    assert_eq!(sol.status, SolveStatus::Unbounded);
    assert!(sol.objective.is_none());
}

#[test]
fn solution_files() {
    let mx = Matrix { a: vec![vec![1.0, 1.0]], kind: vec![RowKind::Le], b: vec![4.0], c: vec![3.0, 2.0] };
    let cm = build(&matrix_ir("continuous", Some(3.0), "maximize"), &mx.store());
    let sol = solve(&cm, &SolveOptions::default());
    let dir = tempfile::tempdir().unwrap();
    let written = write_solution(&sol, &cm, dir.path()).unwrap();
    assert_eq!(written.len(), 2);
    let csv = std::fs::read_to_string(dir.path().join("solution_x.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].ends_with(",value"));
    assert_eq!(lines[1], "c0,3");
    assert_eq!(lines[2], "c1,1");
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "optimal");
    assert_eq!(summary["objective"], 11.0);
    assert_eq!(summary["nonzeros"]["x"], 2);

    let none = solve(&build(&matrix_ir("continuous", None, "maximize"), &Matrix { a: vec![vec![1.0, -1.0]], kind: vec![RowKind::Le], b: vec![1.0], c: vec![1.0, 1.0] }.store()), &SolveOptions::default());
    assert!(write_solution(&none, &cm, dir.path()).is_err());
}
