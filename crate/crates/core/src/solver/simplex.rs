//! Bounded-variable revised primal simplex with a product-form inverse.
//!
//! Each row `i` reads `a_i x + s_i = 0` with the logical `s_i` carrying the
//! negated row bounds, so the all-logical basis is the identity.

use std::time::Instant;

/// Pivot elements smaller than this are rejected.
const PIV_TOL: f64 = 1e-9;
/// Reduced-cost tolerance for pricing.
const DUAL_TOL: f64 = 1e-9;
/// Eta updates between reinversions.
const REFACTOR: usize = 100;
/// Steps shorter than this count as degenerate.
const DEGEN_STEP: f64 = 1e-12;

/// Minimization LP in column form with bounds on structurals and logicals.
#[derive(Debug, Clone)]
pub struct LpData {
    pub m: usize,
    pub n: usize,
    pub col_start: Vec<usize>,
    pub row_idx: Vec<u32>,
    pub val: Vec<f64>,
    pub cost: Vec<f64>,
    /// Bounds for the `n` structurals followed by the `m` logicals.
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
}

impl LpData {
    /// Builds from row-wise data. `row_lo <= a_i x <= row_hi`.
    pub fn from_rows(
        n: usize,
        rows: &[Vec<(u32, f64)>],
        row_lo: &[f64],
        row_hi: &[f64],
        cost: Vec<f64>,
        lb: &[f64],
        ub: &[f64],
    ) -> LpData {
        let m = rows.len();
        let mut count = vec![0usize; n + 1];
        for r in rows {
            for &(j, _) in r {
                count[j as usize + 1] += 1;
            }
        }
        for j in 0..n {
            count[j + 1] += count[j];
        }
        let col_start = count.clone();
        let nnz = col_start[n];
        let mut row_idx = vec![0u32; nnz];
        let mut val = vec![0.0; nnz];
        let mut fill = count;
        for (i, r) in rows.iter().enumerate() {
            for &(j, a) in r {
                let k = fill[j as usize];
                row_idx[k] = i as u32;
                val[k] = a;
                fill[j as usize] += 1;
            }
        }
        let mut l = lb.to_vec();
        let mut u = ub.to_vec();
        for i in 0..m {
            l.push(-row_hi[i]);
            u.push(-row_lo[i]);
        }
        LpData { m, n, col_start, row_idx, val, cost, lb: l, ub: u }
    }

    fn col(&self, j: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.col_start[j], self.col_start[j + 1]);
        (&self.row_idx[a..b], &self.val[a..b])
    }

    fn scatter(&self, j: usize, w: &mut [f64]) {
        w.iter_mut().for_each(|v| *v = 0.0);
        if j < self.n {
            let (idx, val) = self.col(j);
            for (&i, &a) in idx.iter().zip(val) {
                w[i as usize] = a;
            }
        } else {
            w[j - self.n] = 1.0;
        }
    }

    fn dot(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            let (idx, val) = self.col(j);
            idx.iter().zip(val).map(|(&i, &a)| a * y[i as usize]).sum()
        } else {
            y[j - self.n]
        }
    }

    fn nnz(&self, j: usize) -> usize {
        if j < self.n {
            self.col_start[j + 1] - self.col_start[j]
        } else {
            1
        }
    }

    /// Row activities `a_i x` for structural values `x`.
    pub fn activities(&self, x: &[f64]) -> Vec<f64> {
        let mut act = vec![0.0; self.m];
        for (j, &xj) in x.iter().enumerate().take(self.n) {
            if xj != 0.0 {
                let (idx, val) = self.col(j);
                for (&i, &a) in idx.iter().zip(val) {
                    act[i as usize] += a * xj;
                }
            }
        }
        act
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarState {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free variable held at zero.
    Zero,
}

/// A basis snapshot for warm starts.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub head: Vec<usize>,
    pub state: Vec<VarState>,
}

impl Basis {
    pub fn slack(lp: &LpData) -> Basis {
        let mut state = vec![VarState::Lower; lp.n + lp.m];
        for s in state.iter_mut().skip(lp.n) {
            *s = VarState::Basic;
        }
        Basis { head: (lp.n..lp.n + lp.m).collect(), state }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    TimeLimit,
    Error(String),
}

#[derive(Debug, Clone)]
pub struct Control {
    pub deadline: Option<Instant>,
    pub feas_tol: f64,
    pub log: bool,
}

impl Default for Control {
    fn default() -> Self {
        Control { deadline: None, feas_tol: 1e-6, log: false }
    }
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    /// Values of structurals followed by logicals.
    pub x: Vec<f64>,
    pub basis: Basis,
    pub iterations: usize,
}

struct Eta {
    r: usize,
    piv: f64,
    idx: Vec<u32>,
    val: Vec<f64>,
}

struct Simplex<'a> {
    lp: &'a LpData,
    lb: &'a [f64],
    ub: &'a [f64],
    head: Vec<usize>,
    state: Vec<VarState>,
    x: Vec<f64>,
    etas: Vec<Eta>,
    updates: usize,
    tol: f64,
}

impl Simplex<'_> {
    fn nb_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::Lower => self.lb[j],
            VarState::Upper => self.ub[j],
            VarState::Zero | VarState::Basic => 0.0,
        }
    }

    /// Picks a state whose bound is finite.
    fn resting_state(&self, j: usize, prefer: VarState) -> VarState {
        let (l, u) = (self.lb[j], self.ub[j]);
        match prefer {
            VarState::Upper if u.is_finite() => VarState::Upper,
            _ if l.is_finite() => VarState::Lower,
            _ if u.is_finite() => VarState::Upper,
            _ => VarState::Zero,
        }
    }

    fn ftran(&self, w: &mut [f64]) {
        for e in &self.etas {
            let wr = w[e.r];
            if wr == 0.0 {
                continue;
            }
            let v = wr / e.piv;
            w[e.r] = v;
            for (&i, &a) in e.idx.iter().zip(&e.val) {
                w[i as usize] -= a * v;
            }
        }
    }

    fn btran(&self, y: &mut [f64]) {
        for e in self.etas.iter().rev() {
            let s: f64 = e.idx.iter().zip(&e.val).map(|(&i, &a)| a * y[i as usize]).sum();
            y[e.r] = (y[e.r] - s) / e.piv;
        }
    }

    fn push_eta(&mut self, r: usize, w: &[f64]) {
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for (i, &a) in w.iter().enumerate() {
            if i != r && a.abs() > 1e-14 {
                idx.push(i as u32);
                val.push(a);
            }
        }
        self.etas.push(Eta { r, piv: w[r], idx, val });
    }

    fn reinvert(&mut self) {
        let (m, n) = (self.lp.m, self.lp.n);
        self.etas.clear();
        self.updates = 0;
        let mut pivoted = vec![false; m];
        let mut head = vec![usize::MAX; m];
        let mut structurals = Vec::new();
        for &j in &self.head {
            if j >= n {
                pivoted[j - n] = true;
                head[j - n] = j;
            } else {
                structurals.push(j);
            }
        }
        structurals.sort_by_key(|&j| (self.lp.nnz(j), j));
        let mut w = vec![0.0; m];
        for j in structurals {
            self.lp.scatter(j, &mut w);
            self.ftran(&mut w);
            let mut best: Option<usize> = None;
            for r in 0..m {
                if !pivoted[r] && best.is_none_or(|b| w[r].abs() > w[b].abs()) {
                    best = Some(r);
                }
            }
            match best {
                Some(r) if w[r].abs() > 1e-7 => {
                    self.push_eta(r, &w);
                    pivoted[r] = true;
                    head[r] = j;
                }
                _ => {
                    let s = self.resting_state(j, VarState::Lower);
                    self.state[j] = s;
                }
            }
        }
        for r in 0..m {
            if !pivoted[r] {
                head[r] = n + r;
                self.state[n + r] = VarState::Basic;
            }
        }
        self.head = head;
        self.recompute_x();
    }

    fn recompute_x(&mut self) {
        let m = self.lp.m;
        let mut rhs = vec![0.0; m];
        for j in 0..self.lp.n + m {
            if self.state[j] == VarState::Basic {
                continue;
            }
            let v = self.nb_value(j);
            self.x[j] = v;
            if v != 0.0 {
                if j < self.lp.n {
                    let (idx, val) = self.lp.col(j);
                    for (&i, &a) in idx.iter().zip(val) {
                        rhs[i as usize] -= a * v;
                    }
                } else {
                    rhs[j - self.lp.n] -= v;
                }
            }
        }
        self.ftran(&mut rhs);
        for r in 0..m {
            self.x[self.head[r]] = rhs[r];
        }
    }

    fn run(&mut self, ctl: &Control, iterations: &mut usize) -> LpStatus {
        let (m, n) = (self.lp.m, self.lp.n);
        let total = n + m;
        let limit = 100 * total + 10_000;
        let bland_after = 10 * total;
        let mut degenerate = 0usize;
        let mut fresh = true;
        let mut cb = vec![0.0; m];
        let mut y = vec![0.0; m];
        let mut w = vec![0.0; m];
        let tol = self.tol;
        loop {
            if *iterations >= limit {
                return LpStatus::Error(format!("iteration limit {limit} reached"));
            }
            if *iterations % 64 == 0 {
                if let Some(d) = ctl.deadline {
                    if Instant::now() >= d {
                        return LpStatus::TimeLimit;
                    }
                }
            }
            if self.updates >= REFACTOR {
                self.reinvert();
                fresh = true;
            }
            let mut infeasible = false;
            for r in 0..m {
                let j = self.head[r];
                let xj = self.x[j];
                cb[r] = if xj < self.lb[j] - tol {
                    infeasible = true;
                    -1.0
                } else if xj > self.ub[j] + tol {
                    infeasible = true;
                    1.0
                } else {
                    0.0
                };
            }
            if !infeasible {
                for r in 0..m {
                    let j = self.head[r];
                    cb[r] = if j < n { self.lp.cost[j] } else { 0.0 };
                }
            }
            y.copy_from_slice(&cb);
            self.btran(&mut y);

            let bland = degenerate >= bland_after;
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..total {
                let st = self.state[j];
                if st == VarState::Basic || self.lb[j] == self.ub[j] {
                    continue;
                }
                let c = if infeasible || j >= n { 0.0 } else { self.lp.cost[j] };
                let d = c - self.lp.dot(j, &y);
                let eligible = match st {
                    VarState::Lower => d < -DUAL_TOL,
                    VarState::Upper => d > DUAL_TOL,
                    VarState::Zero => d.abs() > DUAL_TOL,
                    VarState::Basic => false,
                };
                if !eligible {
                    continue;
                }
                if bland {
                    enter = Some((j, d));
                    break;
                }
                if enter.is_none_or(|(_, b)| d.abs() > b.abs()) {
                    enter = Some((j, d));
                }
            }
            let Some((q, dq)) = enter else {
                if !fresh {
                    self.reinvert();
                    fresh = true;
                    continue;
                }
                return if infeasible { LpStatus::Infeasible } else { LpStatus::Optimal };
            };
            let dir = if dq < 0.0 { 1.0 } else { -1.0 };
            self.lp.scatter(q, &mut w);
            self.ftran(&mut w);

            // Ratio test. Harris two-pass outside Bland mode.
            let range = self.ub[q] - self.lb[q];
            let mut t_max = if range.is_finite() { range } else { f64::INFINITY };
            let blocking = |r: usize, relax: f64| -> Option<(f64, f64)> {
                let wr = w[r];
                if wr.abs() < PIV_TOL {
                    return None;
                }
                let j = self.head[r];
                let (xj, l, u) = (self.x[j], self.lb[j], self.ub[j]);
                let rate = -dir * wr;
                if rate < 0.0 {
                    if xj < l - tol {
                        return None;
                    }
                    let b = if xj > u + tol { u } else { l };
                    if b == f64::NEG_INFINITY {
                        return None;
                    }
                    Some((((xj - b + relax) / -rate).max(0.0), b))
                } else {
                    if xj > u + tol {
                        return None;
                    }
                    let b = if xj < l - tol { l } else { u };
                    if b == f64::INFINITY {
                        return None;
                    }
                    Some((((b - xj + relax) / rate).max(0.0), b))
                }
            };
            let mut leave: Option<(usize, f64, f64)> = None;
            if bland {
                for r in 0..m {
                    if let Some((t, b)) = blocking(r, 0.0) {
                        let better = match leave {
                            None => true,
                            Some((lr, lt, _)) => t < lt || (t == lt && self.head[r] < self.head[lr]),
                        };
                        if better {
                            leave = Some((r, t, b));
                        }
                    }
                }
                if let Some((_, t, _)) = leave {
                    if t > t_max {
                        leave = None;
                    } else {
                        t_max = t;
                    }
                }
            } else {
                let mut relaxed = f64::INFINITY;
                for r in 0..m {
                    if let Some((t, _)) = blocking(r, tol) {
                        relaxed = relaxed.min(t);
                    }
                }
                if relaxed < t_max {
                    for r in 0..m {
                        if let Some((t, b)) = blocking(r, 0.0) {
                            if t <= relaxed && leave.is_none_or(|(lr, _, _)| w[r].abs() > w[lr].abs()) {
                                leave = Some((r, t, b));
                            }
                        }
                    }
                }
                if let Some((_, t, _)) = leave {
                    t_max = t;
                }
            }
            if t_max == f64::INFINITY {
                if !fresh {
                    self.reinvert();
                    fresh = true;
                    continue;
                }
                return if infeasible {
                    LpStatus::Error("phase 1 ratio test found no blocking variable".into())
                } else {
                    LpStatus::Unbounded
                };
            }
            let t = t_max;
            *iterations += 1;
            if t <= DEGEN_STEP {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            if t != 0.0 {
                self.x[q] += dir * t;
                for r in 0..m {
                    if w[r] != 0.0 {
                        self.x[self.head[r]] -= dir * t * w[r];
                    }
                }
            }
            match leave {
                None => {
                    // Bound flip of the entering variable.
                    let s = if dir > 0.0 { VarState::Upper } else { VarState::Lower };
                    self.state[q] = s;
                    self.x[q] = self.nb_value(q);
                }
                Some((r, _, b)) => {
                    let j = self.head[r];
                    self.x[j] = b;
                    self.state[j] = if b == self.lb[j] { VarState::Lower } else { VarState::Upper };
                    self.state[q] = VarState::Basic;
                    self.head[r] = q;
                    self.push_eta(r, &w);
                    self.updates += 1;
                    fresh = false;
                }
            }
            if ctl.log && *iterations % 1000 == 0 {
                let obj: f64 = (0..n).map(|j| self.lp.cost[j] * self.x[j]).sum();
                eprintln!("simplex it {:>7} phase {} obj {obj:.9e}", iterations, if infeasible { 1 } else { 2 });
            }
        }
    }
}

/// Solves the LP with the given bounds, optionally from a basis snapshot.
pub fn solve(lp: &LpData, lb: &[f64], ub: &[f64], warm: Option<&Basis>, ctl: &Control) -> LpResult {
    let total = lp.n + lp.m;
    let basis = match warm {
        Some(b) if b.head.len() == lp.m && b.state.len() == total => b.clone(),
        _ => Basis::slack(lp),
    };
    let mut s = Simplex {
        lp,
        lb,
        ub,
        head: basis.head,
        state: basis.state,
        x: vec![0.0; total],
        etas: Vec::new(),
        updates: 0,
        tol: ctl.feas_tol,
    };
    for j in 0..total {
        if lb[j] > ub[j] {
            return LpResult { status: LpStatus::Infeasible, x: Vec::new(), basis: Basis::slack(lp), iterations: 0 };
        }
        if s.state[j] != VarState::Basic {
            let prefer = s.state[j];
            s.state[j] = s.resting_state(j, prefer);
        }
    }
    s.reinvert();
    let mut iterations = 0;
    let status = s.run(ctl, &mut iterations);
    let basis = Basis { head: s.head.clone(), state: s.state.clone() };
    LpResult { status, x: s.x, basis, iterations }
}
