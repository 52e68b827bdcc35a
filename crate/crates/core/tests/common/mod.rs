#![allow(dead_code)]

use optir_core::data::{DataStore, Table};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use std::collections::HashMap;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn table(cols: &[&str], rows: Vec<Vec<String>>) -> Table {
    Table::from_rows(cols, &rows)
}

pub fn s(x: impl ToString) -> String {
    x.to_string()
}

pub fn set_def(symbol: &str, filter: &str, ordered: bool) -> Value {
    json!({
        "size": null, "index_symbol": symbol, "source": "sets.csv", "column": "element",
        "filter_column": "set_name", "filter_value": filter, "ordered": ordered
    })
}

pub fn param_def(domain: &[&str], source: &str, index_columns: &[&str], missing: &str) -> Value {
    json!({
        "domain": domain, "type": "float", "source": source, "column": "value",
        "index_columns": if domain.is_empty() { Value::Null } else { json!(index_columns) },
        "missing_default": missing
    })
}

pub fn var_ref(name: &str, idx: &[&str]) -> Value {
    json!({"type": "variable", "name": name, "indices": idx})
}

pub fn par_ref(name: &str, idx: &[&str]) -> Value {
    json!({"type": "parameter", "name": name, "indices": idx})
}

pub fn constant(v: f64) -> Value {
    json!({"type": "constant", "value": v})
}

pub fn op(name: &str, l: Value, r: Value) -> Value {
    json!({"operation": name, "left": l, "right": r})
}

pub fn isum(over: &[&str], body: Value) -> Value {
    json!({"operation": "indexed_sum", "over": over, "body": body})
}

/// A dense-ish "matrix" model: rows R (symbol r), columns C (symbol c),
/// `x[C]` of the given type with bounds [0, ub], one constraint family per
/// sense with a sparse filter on its rhs table, and objective `obj[c]·x[c]`.
pub fn matrix_ir(var_type: &str, ub: Option<f64>, sense: &str) -> String {
    let mut cons = Map::new();
    for (fam, sense_s, b) in [("le_rows", "<=", "b_le"), ("ge_rows", ">=", "b_ge"), ("eq_rows", "=", "b_eq")] {
        cons.insert(
            fam.into(),
            json!({
                "domain": ["R"],
                "expression": isum(&["C"], op("multiply", par_ref("a", &["r", "c"]), var_ref("x", &["c"]))),
                "sense": sense_s,
                "rhs": par_ref(b, &["r"]),
                "sparse_filter": b
            }),
        );
    }
    let v = json!({
        "problem_class": "test", "model_type": if var_type == "binary" { "MIP" } else { "LP" }, "sense": sense,
        "sets": {"R": set_def("r", "rows", false), "C": set_def("c", "cols", false)},
        "parameters": {
            "a": param_def(&["R", "C"], "a.csv", &["row", "col"], "zero"),
            "b_le": param_def(&["R"], "b_le.csv", &["row"], "zero"),
            "b_ge": param_def(&["R"], "b_ge.csv", &["row"], "zero"),
            "b_eq": param_def(&["R"], "b_eq.csv", &["row"], "zero"),
            "obj": param_def(&["C"], "obj.csv", &["col"], "zero")
        },
        "variables": {"x": {"description": null, "label": null, "domain": ["C"], "type": var_type, "lower_bound": 0, "upper_bound": ub, "domain_filter": null}},
        "constraints": cons,
        "objective": {"sense": sense, "expression": isum(&["C"], op("multiply", par_ref("obj", &["c"]), var_ref("x", &["c"])))}
    });
    serde_json::to_string_pretty(&v).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

/// Data for [`matrix_ir`].
#[derive(Debug, Clone)]
pub struct Matrix {
    pub a: Vec<Vec<f64>>,
    pub kind: Vec<RowKind>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl Matrix {
    pub fn store(&self) -> DataStore {
        let (m, n) = (self.a.len(), self.c.len());
        let rows: Vec<String> = (0..m).map(|i| format!("r{i}")).collect();
        let cols: Vec<String> = (0..n).map(|j| format!("c{j}")).collect();
        let mut sets: Vec<Vec<String>> = rows.iter().map(|r| vec![s("rows"), r.clone()]).collect();
        sets.extend(cols.iter().map(|c| vec![s("cols"), c.clone()]));
        let mut st = DataStore::new();
        st.insert("sets", table(&["set_name", "element"], sets));
        let mut a = Vec::new();
        for i in 0..m {
            for j in 0..n {
                if self.a[i][j] != 0.0 {
                    a.push(vec![rows[i].clone(), cols[j].clone(), s(self.a[i][j])]);
                }
            }
        }
        st.insert("a", table(&["row", "col", "value"], a));
        for (name, k) in [("b_le", RowKind::Le), ("b_ge", RowKind::Ge), ("b_eq", RowKind::Eq)] {
            let r = (0..m).filter(|&i| self.kind[i] == k).map(|i| vec![rows[i].clone(), s(self.b[i])]).collect();
            st.insert(name, table(&["row", "value"], r));
        }
        st.insert("obj", table(&["col", "value"], (0..n).map(|j| vec![cols[j].clone(), s(self.c[j])]).collect()));
        st
    }

    pub fn feasible(&self, x: &[f64], tol: f64) -> bool {
        self.a.iter().zip(&self.kind).zip(&self.b).all(|((row, k), &b)| {
            let act: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
            match k {
                RowKind::Le => act <= b + tol,
                RowKind::Ge => act >= b - tol,
                RowKind::Eq => (act - b).abs() <= tol,
            }
        })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

pub fn random_kind<R: Rng>(r: &mut R) -> RowKind {
    match r.random_range(0..5) {
        0 | 1 | 2 => RowKind::Le,
        3 => RowKind::Ge,
        _ => RowKind::Eq,
    }
}

/// Solves the square system `m · x = rhs` by Gaussian elimination with
/// partial pivoting; `None` when singular.
pub fn solve_square(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                if f != 0.0 {
                    for k in col..n {
                        m[r][k] -= f * m[col][k];
                    }
                    rhs[r] -= f * rhs[col];
                }
            }
        }
    }
    Some((0..n).map(|i| rhs[i] / m[i][i]).collect())
}

/// Calls `f` with every `k`-subset of `0..n` in lexicographic order.
pub fn for_each_subset(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::new(), f);
}

/// Elements of a micro set: `s{k}_{e}`.
pub fn micro_element(set: usize, e: usize) -> String {
    format!("s{set}_{e}")
}

/// A random small IR document with matching data.
pub struct Micro {
    pub ir: Value,
    pub store: DataStore,
    /// Set sizes, and which set (if any) is ordered.
    pub sizes: Vec<usize>,
    pub ordered: Option<usize>,
    /// Parameter tables: name -> (domain set ids, key -> value).
    pub params: HashMap<String, (Vec<usize>, HashMap<Vec<String>, f64>)>,
    /// Variables: name -> (domain set ids, filter parameter).
    pub vars: Vec<(String, Vec<usize>, Option<String>)>,
    /// Constraint name and domain.
    pub constraint: (String, Vec<usize>),
}

const SYMS: [&str; 3] = ["a", "b", "c"];

fn set_name(k: usize) -> String {
    format!("S{k}")
}

fn subsequence<R: Rng>(r: &mut R, n: usize, p: f64) -> Vec<usize> {
    (0..n).filter(|_| r.random_bool(p)).collect()
}

pub fn micro(seed: u64) -> Micro {
    let mut r = rng(seed);
    let nsets = r.random_range(1..=3);
    let sizes: Vec<usize> = (0..nsets).map(|_| r.random_range(1..=3)).collect();
    let ordered = if r.random_bool(0.6) { Some(r.random_range(0..nsets)) } else { None };

    let mut sets_json = Map::new();
    let mut set_rows = Vec::new();
    for k in 0..nsets {
        sets_json.insert(set_name(k), set_def(SYMS[k], &format!("set{k}"), ordered == Some(k)));
        for e in 0..sizes[k] {
            set_rows.push(vec![format!("set{k}"), micro_element(k, e)]);
        }
    }
    let mut store = DataStore::new();
    store.insert("sets", table(&["set_name", "element"], set_rows));

    let mut params = HashMap::new();
    let mut params_json = Map::new();
    let nparams = r.random_range(1..=3);
    for q in 0..nparams {
        let name = format!("q{q}");
        let mut dom = subsequence(&mut r, nsets, 0.5);
        if dom.is_empty() && r.random_bool(0.5) {
            dom.push(0);
        }
        let cols: Vec<String> = dom.iter().map(|k| format!("k{k}")).collect();
        let doms: Vec<String> = dom.iter().map(|&k| set_name(k)).collect();
        let dref: Vec<&str> = doms.iter().map(String::as_str).collect();
        let cref: Vec<&str> = cols.iter().map(String::as_str).collect();
        params_json.insert(name.clone(), param_def(&dref, &format!("{name}.csv"), &cref, "zero"));
        let mut values = HashMap::new();
        let mut rows = Vec::new();
        let keys = cross(&dom.iter().map(|&k| sizes[k]).collect::<Vec<_>>());
        let density = if dom.is_empty() { 1.0 } else { 0.7 };
        for key in keys {
            if !r.random_bool(density) {
                continue;
            }
            let els: Vec<String> = key.iter().zip(&dom).map(|(&e, &k)| micro_element(k, e)).collect();
            let v = (r.random_range(-6..=6) as f64) / 2.0;
            let mut row = els.clone();
            row.push(s(v));
            rows.push(row);
            values.insert(els, v);
        }
        let mut header = cref.clone();
        header.push("value");
        store.insert(name.clone(), table(&header, rows));
        params.insert(name, (dom, values));
    }

    let mut vars = Vec::new();
    let mut vars_json = Map::new();
    for v in 0..r.random_range(1..=2) {
        let name = format!("x{v}");
        let mut dom = subsequence(&mut r, nsets, 0.6);
        if dom.is_empty() {
            dom.push(r.random_range(0..nsets));
        }
        let filter = params
            .iter()
            .filter(|(_, (pd, _))| !pd.is_empty() && dom.starts_with(pd))
            .map(|(n, _)| n.clone())
            .min()
            .filter(|_| r.random_bool(0.5));
        let doms: Vec<String> = dom.iter().map(|&k| set_name(k)).collect();
        vars_json.insert(
            name.clone(),
            json!({"description": null, "label": null, "domain": doms, "type": "continuous",
                   "lower_bound": 0, "upper_bound": null, "domain_filter": filter}),
        );
        vars.push((name, dom, filter));
    }

    let cdom = subsequence(&mut r, nsets, 0.5);
    let mut g = Gen { r: &mut r, sizes: &sizes, ordered, params: &params, vars: &vars };
    let expr = g.expr(&cdom, 3);
    let cdoms: Vec<String> = cdom.iter().map(|&k| set_name(k)).collect();
    let ir = json!({
        "problem_class": "micro", "model_type": "LP", "sense": "minimize",
        "sets": sets_json, "parameters": params_json, "variables": vars_json,
        "constraints": {"c0": {"domain": cdoms, "expression": expr, "sense": "<=", "rhs": constant(0.0)}},
        "objective": {"sense": "minimize", "expression": constant(0.0)}
    });
    Micro { ir, store, sizes, ordered, params, vars, constraint: ("c0".into(), cdom) }
}

pub fn cross(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &n in sizes {
        out = out.into_iter().flat_map(|p| (0..n).map(move |e| [p.clone(), vec![e]].concat())).collect();
    }
    out
}

struct Gen<'a, R: Rng> {
    r: &'a mut R,
    sizes: &'a [usize],
    ordered: Option<usize>,
    params: &'a HashMap<String, (Vec<usize>, HashMap<Vec<String>, f64>)>,
    vars: &'a [(String, Vec<usize>, Option<String>)],
}

impl<R: Rng> Gen<'_, R> {
    fn token(&mut self, k: usize) -> String {
        if self.ordered == Some(k) && self.r.random_bool(0.2) {
            if self.r.random_bool(0.5) {
                format!("S{k}[0]")
            } else {
                format!("S{k}[-1]")
            }
        } else {
            SYMS[k].to_string()
        }
    }

    /// Unbound sets of `dom`, summed over around `body`.
    fn close(&mut self, scope: &[usize], dom: &[usize], body: Value) -> Value {
        let free: Vec<usize> = dom.iter().copied().filter(|k| !scope.contains(k)).collect();
        if free.is_empty() {
            body
        } else {
            let names: Vec<String> = free.iter().map(|&k| set_name(k)).collect();
            let n: Vec<&str> = names.iter().map(String::as_str).collect();
            isum(&n, body)
        }
    }

    fn param(&mut self, scope: &[usize]) -> Value {
        let mut names: Vec<&String> = self.params.keys().collect();
        names.sort();
        let name = names[self.r.random_range(0..names.len())].clone();
        let dom = self.params[&name].0.clone();
        let all: Vec<usize> = scope.iter().copied().chain(dom.iter().copied()).collect();
        let idx: Vec<String> = dom.iter().map(|&k| if scope.contains(&k) { self.token(k) } else { SYMS[k].to_string() }).collect();
        let i: Vec<&str> = idx.iter().map(String::as_str).collect();
        let _ = all;
        self.close(scope, &dom, par_ref(&name, &i))
    }

    fn coef(&mut self, scope: &[usize], depth: u32) -> Value {
        match self.r.random_range(0..4) {
            0 => constant((self.r.random_range(-4..=4) as f64) / 2.0),
            1 if depth > 0 => {
                let l = self.coef(scope, depth - 1);
                let rr = self.coef(scope, depth - 1);
                op(if self.r.random_bool(0.5) { "sum" } else { "subtract" }, l, rr)
            }
            _ => self.param(scope),
        }
    }

    fn var(&mut self, scope: &[usize]) -> Value {
        let (name, dom, _) = self.vars[self.r.random_range(0..self.vars.len())].clone();
        let idx: Vec<String> = dom.iter().map(|&k| if scope.contains(&k) { self.token(k) } else { SYMS[k].to_string() }).collect();
        let i: Vec<&str> = idx.iter().map(String::as_str).collect();
        let mut v = var_ref(&name, &i);
        if let Some(o) = self.ordered {
            if let Some(p) = dom.iter().position(|&k| k == o) {
                if idx[p] == SYMS[o] && self.r.random_bool(0.3) {
                    v["lag"] = json!(-1);
                }
            }
        }
        self.close(scope, &dom, v)
    }

    fn expr(&mut self, scope: &[usize], depth: u32) -> Value {
        let choice = if depth == 0 { self.r.random_range(0..2) } else { self.r.random_range(0..6) };
        match choice {
            0 => self.var(scope),
            1 => self.coef(scope, 1),
            2 | 3 => {
                let l = self.expr(scope, depth - 1);
                let rr = self.expr(scope, depth - 1);
                op(if choice == 2 { "sum" } else { "subtract" }, l, rr)
            }
            4 => {
                let c = self.coef(scope, 1);
                let e = self.expr(scope, depth - 1);
                if self.r.random_bool(0.5) {
                    op("multiply", c, e)
                } else {
                    op("multiply", e, c)
                }
            }
            _ => {
                let free: Vec<usize> = (0..self.sizes.len()).filter(|k| !scope.contains(k)).collect();
                if free.is_empty() {
                    return self.expr(scope, depth - 1);
                }
                let over: Vec<usize> = free.iter().copied().filter(|_| self.r.random_bool(0.6)).collect();
                let over = if over.is_empty() { vec![free[0]] } else { over };
                let mut inner = scope.to_vec();
                inner.extend(&over);
                let body = self.expr(&inner, depth - 1);
                let names: Vec<String> = over.iter().map(|&k| set_name(k)).collect();
                let n: Vec<&str> = names.iter().map(String::as_str).collect();
                isum(&n, body)
            }
        }
    }
}

/// Naive evaluation of an IR expression at a variable assignment.
/// `Err(())` signals a lag before the first element.
pub struct Interp<'a> {
    pub micro: &'a Micro,
    pub x: &'a HashMap<(String, Vec<String>), f64>,
}

impl Interp<'_> {
    fn resolve(&self, tok: &str, set: usize, bind: &HashMap<String, String>) -> String {
        if let Some(rest) = tok.strip_suffix("[0]") {
            let _ = rest;
            micro_element(set, 0)
        } else if tok.ends_with("[-1]") {
            micro_element(set, self.micro.sizes[set] - 1)
        } else {
            bind[tok].clone()
        }
    }

    pub fn eval(&self, e: &Value, bind: &HashMap<String, String>) -> Result<f64, ()> {
        if let Some(t) = e.get("type").and_then(Value::as_str) {
            return match t {
                "constant" => Ok(e["value"].as_f64().unwrap()),
                "parameter" => {
                    let name = e["name"].as_str().unwrap();
                    let (dom, vals) = &self.micro.params[name];
                    let key: Vec<String> = e["indices"]
                        .as_array()
                        .unwrap()
                        .iter()
                        .zip(dom)
                        .map(|(t, &k)| self.resolve(t.as_str().unwrap(), k, bind))
                        .collect();
                    Ok(vals.get(&key).copied().unwrap_or(0.0))
                }
                _ => {
                    let name = e["name"].as_str().unwrap();
                    let dom = &self.micro.vars.iter().find(|v| v.0 == name).unwrap().1;
                    let mut key: Vec<String> = e["indices"]
                        .as_array()
                        .unwrap()
                        .iter()
                        .zip(dom)
                        .map(|(t, &k)| self.resolve(t.as_str().unwrap(), k, bind))
                        .collect();
                    if let Some(lag) = e.get("lag").and_then(Value::as_i64) {
                        let o = self.micro.ordered.unwrap();
                        let p = dom.iter().position(|&k| k == o).unwrap();
                        let pos: i64 = key[p].rsplit('_').next().unwrap().parse().unwrap();
                        let np = pos + lag;
                        if np < 0 {
                            return Err(());
                        }
                        key[p] = micro_element(o, np as usize);
                    }
                    Ok(self.x.get(&(name.to_string(), key)).copied().unwrap_or(0.0))
                }
            };
        }
        match e["operation"].as_str().unwrap() {
            "sum" => Ok(self.eval(&e["left"], bind)? + self.eval(&e["right"], bind)?),
            "subtract" => Ok(self.eval(&e["left"], bind)? - self.eval(&e["right"], bind)?),
            "multiply" => Ok(self.eval(&e["left"], bind)? * self.eval(&e["right"], bind)?),
            "indexed_sum" => {
                let over: Vec<usize> = e["over"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|n| n.as_str().unwrap()[1..].parse().unwrap())
                    .collect();
                let mut total = 0.0;
                for key in cross(&over.iter().map(|&k| self.micro.sizes[k]).collect::<Vec<_>>()) {
                    let mut b = bind.clone();
                    for (&k, &el) in over.iter().zip(&key) {
                        b.insert(SYMS[k].to_string(), micro_element(k, el));
                    }
                    total += self.eval(&e["body"], &b)?;
                }
                Ok(total)
            }
            other => panic!("unknown operation {other}"),
        }
    }
}

pub fn symbol(k: usize) -> &'static str {
    SYMS[k]
}

pub fn random_matrix<R: Rng>(r: &mut R, m: usize, n: usize) -> Matrix {
    let kind: Vec<RowKind> = (0..m).map(|_| random_kind(r)).collect();
    Matrix {
        a: (0..m).map(|_| (0..n).map(|_| r.random_range(-5i32..=5) as f64).collect()).collect(),
        b: kind.iter().map(|k| if *k == RowKind::Le { r.random_range(1..=20) } else { r.random_range(1..=8) } as f64).collect(),
        c: (0..n).map(|_| r.random_range(-5i32..=5) as f64).collect(),
        kind,
    }
}

/// Best vertex of `{x : rows, 0 <= x <= ub}` by enumerating every choice of
/// n active constraints.
pub fn vertex_optimum(mx: &Matrix, ub: f64, maximize: bool) -> Option<(f64, Vec<f64>)> {
    let n = mx.c.len();
    let m = mx.a.len();
    let mut faces: Vec<(Vec<f64>, f64)> = mx.a.iter().cloned().zip(mx.b.iter().copied()).collect();
    for j in 0..n {
        let e: Vec<f64> = (0..n).map(|k| if k == j { 1.0 } else { 0.0 }).collect();
        faces.push((e.clone(), 0.0));
        faces.push((e, ub));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for_each_subset(m + 2 * n, n, &mut |pick| {
        let sys: Vec<Vec<f64>> = pick.iter().map(|&i| faces[i].0.clone()).collect();
        let rhs: Vec<f64> = pick.iter().map(|&i| faces[i].1).collect();
        let Some(x) = solve_square(sys, rhs) else { return };
        if x.iter().any(|&v| v < -1e-9 || v > ub + 1e-9) || !mx.feasible(&x, 1e-9) {
            return;
        }
        let v = mx.value(&x);
        let better = match &best {
            None => true,
            Some((b, _)) => if maximize { v > *b } else { v < *b },
        };
        if better {
            best = Some((v, x));
        }
    });
    best
}

pub struct Assign {
    pub revenue: Vec<i64>,
    pub cost: Vec<Vec<Option<i64>>>,
    pub usage: Vec<Vec<i64>>,
    pub cap: Vec<i64>,
}

impl Assign {
    /// Integer data, at most `max_s` shipments and `max_c` carriers, some
    /// pairs without a cost row.
    pub fn random<R: Rng>(r: &mut R, max_s: usize, max_c: usize) -> Assign {
        let ns = r.random_range(1..=max_s);
        let nc = r.random_range(1..=max_c);
        Assign {
            revenue: (0..ns).map(|_| r.random_range(5..=30)).collect(),
            cost: (0..ns).map(|_| (0..nc).map(|_| r.random_bool(0.85).then(|| r.random_range(1..=35))).collect()).collect(),
            usage: (0..ns).map(|_| (0..nc).map(|_| r.random_range(1..=6)).collect()).collect(),
            cap: (0..nc).map(|_| r.random_range(3..=12)).collect(),
        }
    }

    pub fn store(&self) -> DataStore {
        let (ns, nc) = (self.revenue.len(), self.cap.len());
        let mut sets: Vec<Vec<String>> = (0..ns).map(|i| vec![s("shipments"), format!("S{i}")]).collect();
        sets.extend((0..nc).map(|j| vec![s("carriers"), format!("C{j}")]));
        let mut st = DataStore::new();
        st.insert("sets", table(&["set_name", "element"], sets));
        st.insert("revenue", table(&["shipment_id", "revenue"], (0..ns).map(|i| vec![format!("S{i}"), s(self.revenue[i])]).collect()));
        let pairs = || (0..ns).flat_map(|i| (0..nc).map(move |j| (i, j)));
        st.insert(
            "cost",
            table(&["shipment_id", "carrier_id", "cost"], pairs().filter_map(|(i, j)| self.cost[i][j].map(|c| vec![format!("S{i}"), format!("C{j}"), s(c)])).collect()),
        );
        st.insert(
            "capacity_consumption",
            table(&["shipment_id", "carrier_id", "capacity_consumption"], pairs().map(|(i, j)| vec![format!("S{i}"), format!("C{j}"), s(self.usage[i][j])]).collect()),
        );
        st.insert("carrier_capacity", table(&["carrier_id", "carrier_capacity"], (0..nc).map(|j| vec![format!("C{j}"), s(self.cap[j])]).collect()));
        st
    }

    /// Exhaustive search over "unassigned or one allowed carrier" per shipment.
    pub fn best(&self) -> i64 {
        let (ns, nc) = (self.revenue.len(), self.cap.len());
        let mut choice = vec![0usize; ns];
        let mut best = 0;
        loop {
            let mut load = vec![0i64; nc];
            let mut profit = 0;
            let mut ok = true;
            for i in 0..ns {
                if choice[i] > 0 {
                    let j = choice[i] - 1;
                    match self.cost[i][j] {
                        None => ok = false,
                        Some(c) => {
                            profit += self.revenue[i] - c;
                            load[j] += self.usage[i][j];
                        }
                    }
                }
            }
            if ok && load.iter().zip(&self.cap).all(|(l, c)| l <= c) {
                best = best.max(profit);
            }
            let mut k = 0;
            loop {
                if k == ns {
                    return best;
                }
                choice[k] += 1;
                if choice[k] <= nc {
                    break;
                }
                choice[k] = 0;
                k += 1;
            }
        }
    }
}
