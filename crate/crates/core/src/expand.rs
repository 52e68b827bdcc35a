//! Variable instantiation and expansion of IR expressions into linear rows.
//!
//! Expressions are first compiled against the materialized sets: index
//! symbols become slot numbers and names become table ids. Evaluation then
//! works purely on element positions.

use crate::data::{materialize_param, materialize_set, DataError, DataStore, ParamInstance, SetInstance};
use crate::diag::Diagnostic;
use crate::ir::{BinOp, ConstraintDef, Expr, IndexToken, IrModel, RowSense, VarType};
use crate::keyed::KeyTable;
use indexmap::IndexMap;
use std::collections::HashMap;
use std::sync::Arc;
use thiserror::Error;

pub type VarId = u32;

/// Widest reference arity the expander handles.
const MAX_ARITY: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExpandError {
    #[error("lag reaches before the first element of its ordered set")]
    LagUnderflow,
    #[error("infinite coefficient: {0}")]
    Coefficient(String),
    #[error("right-hand side is +inf with sense {0}")]
    InfRhs(RowSense),
    #[error("non-finite arithmetic: {0}")]
    NonFinite(String),
    #[error("ordered set {0:?} is empty")]
    EmptyOrderedSet(String),
    #[error("{0}")]
    Invalid(String),
}

/// A linear expression: terms sorted by variable id plus a constant.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearForm {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinearForm {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().fold(self.constant, |s, &(v, a)| s + a * x[v as usize])
    }
}

/// Sorts by variable id, merges duplicates in encounter order and drops zeros.
pub(crate) fn normalize(terms: &mut Vec<(VarId, f64)>) {
    terms.sort_by_key(|t| t.0);
    let mut out = 0;
    for i in 0..terms.len() {
        if out > 0 && terms[out - 1].0 == terms[i].0 {
            terms[out - 1].1 += terms[i].1;
        } else {
            terms[out] = terms[i];
            out += 1;
        }
    }
    terms.truncate(out);
    terms.retain(|t| t.1 != 0.0);
}

/// All instances of one declared variable.
#[derive(Debug, Clone)]
pub struct VarGroup {
    pub name: String,
    pub domain: Vec<String>,
    pub ty: VarType,
    pub first: VarId,
    pub count: u32,
    /// Column labels for solution files.
    pub labels: Vec<String>,
    pub(crate) set_ids: Vec<usize>,
    keys: Vec<u32>,
    index: KeyTable<u32>,
    ordered_pos: Option<usize>,
}

impl VarGroup {
    pub fn arity(&self) -> usize {
        self.set_ids.len()
    }

    /// Element positions of the `local`-th instance.
    pub fn key(&self, local: usize) -> &[u32] {
        let a = self.arity();
        &self.keys[local * a..(local + 1) * a]
    }

    pub fn id_of(&self, key: &[u32]) -> Option<VarId> {
        self.index.get(key)
    }

    pub fn ids(&self) -> std::ops::Range<VarId> {
        self.first..self.first + self.count
    }
}

/// Calls `f` for every tuple of the cross product, last position fastest.
fn for_each_tuple(dims: &[usize], mut f: impl FnMut(&[u32]) -> bool) {
    if dims.iter().any(|&d| d == 0) {
        return;
    }
    let mut key = vec![0u32; dims.len()];
    loop {
        if !f(&key) {
            return;
        }
        let mut k = dims.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            key[k] += 1;
            if (key[k] as usize) < dims[k] {
                break;
            }
            key[k] = 0;
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum CTok {
    Slot(usize),
    At(u32),
}

#[derive(Debug, Clone)]
enum CExpr {
    Const(f64),
    Param { id: usize, toks: Box<[CTok]> },
    Var { group: usize, toks: Box<[CTok]>, lag: Option<(usize, u32)> },
    Sum { binds: Box<[(usize, usize)]>, body: Box<CExpr>, vars: bool },
    Bin { op: BinOp, l: Box<CExpr>, r: Box<CExpr>, lv: bool, rv: bool },
}

impl CExpr {
    fn has_vars(&self) -> bool {
        match self {
            CExpr::Const(_) | CExpr::Param { .. } => false,
            CExpr::Var { .. } => true,
            CExpr::Sum { vars, .. } => *vars,
            CExpr::Bin { lv, rv, .. } => *lv || *rv,
        }
    }
}

/// Evaluation failure plus the inner-sum bindings active when it occurred.
#[derive(Debug)]
struct EvalErr {
    kind: ExpandError,
    inner: Vec<(usize, u32)>,
}

impl From<ExpandError> for EvalErr {
    fn from(kind: ExpandError) -> Self {
        EvalErr { kind, inner: Vec::new() }
    }
}

#[derive(Default)]
struct Acc {
    terms: Vec<(VarId, f64)>,
    constant: f64,
}

/// A constraint compiled against the environment.
#[derive(Debug, Clone)]
pub(crate) struct CConstraint {
    pub name: String,
    pub family: u32,
    domain: Vec<usize>,
    expr: CExpr,
    rhs: CExpr,
    pub sense: RowSense,
    filter: Option<(usize, Vec<usize>)>,
    slot_names: Vec<String>,
    slot_sets: Vec<usize>,
}

/// A term-less row that cannot hold: `0 <= negative` or `0 = nonzero`.
#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    pub family: u32,
    pub name: String,
    pub sense: RowSense,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub family: u32,
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

/// Rows of one constraint family plus what was skipped.
#[derive(Debug, Clone, Default)]
pub(crate) struct FamilyRows {
    pub rows: Vec<Row>,
    pub findings: Vec<Finding>,
    pub filtered: usize,
    pub inf_rhs: usize,
    pub lag_skipped: usize,
    pub trivial: usize,
}

/// Error located at an IR path with the index binding that triggered it.
#[derive(Debug, Clone, PartialEq)]
pub struct Located {
    pub path: String,
    pub binding: Vec<(String, String)>,
    pub kind: ExpandError,
}

impl std::fmt::Display for Located {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.path)?;
        if !self.binding.is_empty() {
            let parts: Vec<String> = self.binding.iter().map(|(s, e)| format!("{s}={e}")).collect();
            write!(f, " [{}]", parts.join(", "))?;
        }
        write!(f, ": {}", self.kind)
    }
}

/// Materialized sets, parameters and variables of one model.
#[derive(Debug, Clone)]
pub struct Env {
    pub sets: Vec<Arc<SetInstance>>,
    set_index: HashMap<String, usize>,
    params: Vec<ParamInstance>,
    param_index: HashMap<String, usize>,
    pub groups: Vec<VarGroup>,
    group_index: HashMap<String, usize>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub group_of: Vec<u32>,
    symbols: HashMap<String, usize>,
    set_symbols: Vec<String>,
    pub warnings: Vec<Diagnostic>,
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{0}")]
    Expand(Located),
}

impl Env {
    /// Materializes sets and parameters and instantiates every variable.
    pub fn build(model: &IrModel, store: &DataStore) -> Result<Env, EnvError> {
        let mut warnings = Vec::new();
        let mut set_map: IndexMap<String, Arc<SetInstance>> = IndexMap::new();
        for (name, def) in &model.sets {
            let (s, w) = materialize_set(name, def, store)?;
            warnings.extend(w);
            set_map.insert(name.clone(), Arc::new(s));
        }
        let mut params = Vec::new();
        let mut param_index = HashMap::new();
        for (name, def) in &model.parameters {
            param_index.insert(name.clone(), params.len());
            params.push(materialize_param(name, def, &set_map, store)?);
        }
        let mut symbols = HashMap::new();
        for (i, def) in model.sets.values().enumerate() {
            symbols.entry(def.index_symbol.clone()).or_insert(i);
        }
        let set_index = set_map.keys().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        let mut env = Env {
            sets: set_map.into_values().collect(),
            set_index,
            params,
            param_index,
            groups: Vec::new(),
            group_index: HashMap::new(),
            lb: Vec::new(),
            ub: Vec::new(),
            group_of: Vec::new(),
            symbols,
            set_symbols: model.sets.values().map(|d| d.index_symbol.clone()).collect(),
            warnings,
        };
        env.instantiate(model)?;
        Ok(env)
    }

    pub fn num_vars(&self) -> usize {
        self.lb.len()
    }

    pub fn group(&self, name: &str) -> Option<&VarGroup> {
        self.group_index.get(name).map(|&g| &self.groups[g])
    }

    pub fn param(&self, name: &str) -> Option<&ParamInstance> {
        self.param_index.get(name).map(|&p| &self.params[p])
    }

    pub fn set(&self, name: &str) -> Option<&SetInstance> {
        self.set_index.get(name).map(|&s| &*self.sets[s])
    }

    fn set_id(&self, name: &str) -> Result<usize, ExpandError> {
        self.set_index.get(name).copied().ok_or_else(|| ExpandError::Invalid(format!("unknown set {name:?}")))
    }

    fn instantiate(&mut self, model: &IrModel) -> Result<(), EnvError> {
        let invalid = |path: String, msg: String| {
            EnvError::Expand(Located { path, binding: Vec::new(), kind: ExpandError::Invalid(msg) })
        };
        for (name, def) in &model.variables {
            let path = format!("variables.{name}");
            let set_ids: Vec<usize> = def
                .domain
                .iter()
                .map(|s| self.set_id(s))
                .collect::<Result<_, _>>()
                .map_err(|e| invalid(path.clone(), e.to_string()))?;
            if set_ids.len() > MAX_ARITY {
                return Err(invalid(path, format!("domain wider than {MAX_ARITY} sets")));
            }
            let dims: Vec<usize> = set_ids.iter().map(|&s| self.sets[s].len()).collect();
            let filter = match &def.domain_filter {
                Some(f) => {
                    let p = self.param_index.get(f).copied().ok_or_else(|| invalid(path.clone(), format!("unknown parameter {f:?}")))?;
                    Some((p, self.params[p].arity()))
                }
                None => None,
            };
            let first = self.lb.len() as VarId;
            let (lb, ub) = (
                def.lower_bound.unwrap_or(f64::NEG_INFINITY),
                def.upper_bound.unwrap_or(f64::INFINITY),
            );
            let mut index = KeyTable::new(&dims);
            let mut keys = Vec::new();
            let mut next = first;
            let group = self.groups.len() as u32;
            let params = &self.params;
            for_each_tuple(&dims, |key| {
                if def.exclude_diagonal && key[0] == key[1] {
                    return true;
                }
                if let Some((p, m)) = filter {
                    if params[p].get_pos(&key[..m]).is_none() {
                        return true;
                    }
                }
                keys.extend_from_slice(key);
                index.insert(key, next);
                next += 1;
                true
            });
            let count = next - first;
            self.lb.extend(std::iter::repeat_n(lb, count as usize));
            self.ub.extend(std::iter::repeat_n(ub, count as usize));
            self.group_of.extend(std::iter::repeat_n(group, count as usize));
            let ordered_pos = set_ids.iter().position(|&s| self.sets[s].ordered);
            let g = VarGroup {
                name: name.clone(),
                domain: def.domain.clone(),
                ty: def.ty,
                first,
                count,
                labels: Vec::new(),
                set_ids,
                keys,
                index,
                ordered_pos,
            };
            for (i, fx) in def.fixings.iter().enumerate() {
                let fpath = format!("{path}.fixings[{i}]");
                let pos: Option<Vec<u32>> =
                    fx.key.iter().zip(&g.set_ids).map(|(e, &s)| self.sets[s].position(e)).collect();
                match pos.filter(|p| p.len() == g.arity()).and_then(|p| g.id_of(&p)) {
                    Some(id) => {
                        self.lb[id as usize] = fx.value;
                        self.ub[id as usize] = fx.value;
                    }
                    None => self.warnings.push(Diagnostic::warning(
                        "fixing_not_instantiated",
                        fpath,
                        format!("no instance with key {:?}", fx.key),
                    )),
                }
            }
            self.group_index.insert(name.clone(), self.groups.len());
            self.groups.push(g);
        }
        Ok(())
    }

    /// Element strings of a variable's key.
    pub fn var_key(&self, id: VarId) -> Vec<&str> {
        let g = &self.groups[self.group_of[id as usize] as usize];
        g.key((id - g.first) as usize)
            .iter()
            .zip(&g.set_ids)
            .map(|(&p, &s)| self.sets[s].elements[p as usize].as_str())
            .collect()
    }

    fn compile(&self, e: &Expr, names: &mut Vec<String>, sets: &mut Vec<usize>) -> Result<CExpr, ExpandError> {
        Ok(match e {
            Expr::Const(v) => CExpr::Const(*v),
            Expr::Param(p) => {
                let id = *self
                    .param_index
                    .get(&p.name)
                    .ok_or_else(|| ExpandError::Invalid(format!("unknown parameter {:?}", p.name)))?;
                CExpr::Param { id, toks: self.tokens(&p.indices, names)? }
            }
            Expr::Var(v) => {
                let group = *self
                    .group_index
                    .get(&v.name)
                    .ok_or_else(|| ExpandError::Invalid(format!("unknown variable {:?}", v.name)))?;
                let toks = self.tokens(&v.indices, names)?;
                if toks.len() != self.groups[group].arity() {
                    return Err(ExpandError::Invalid(format!("arity mismatch for {:?}", v.name)));
                }
                let lag = match v.lag {
                    None => None,
                    Some(l) => {
                        let pos = self.groups[group]
                            .ordered_pos
                            .ok_or_else(|| ExpandError::Invalid(format!("lag on {:?} without an ordered set", v.name)))?;
                        Some((pos, l.unsigned_abs() as u32))
                    }
                };
                CExpr::Var { group, toks, lag }
            }
            Expr::IndexedSum { over, body } => {
                let before = names.len();
                let mut binds = Vec::with_capacity(over.len());
                for s in over {
                    let sid = self.set_id(s)?;
                    binds.push((sid, names.len()));
                    names.push(self.symbol_of(sid).to_string());
                    sets.push(sid);
                }
                let body = self.compile(body, names, sets)?;
                names.truncate(before);
                let vars = body.has_vars();
                CExpr::Sum { binds: binds.into(), body: Box::new(body), vars }
            }
            Expr::Binary { op, left, right } => {
                let l = self.compile(left, names, sets)?;
                let r = self.compile(right, names, sets)?;
                let (lv, rv) = (l.has_vars(), r.has_vars());
                if *op == BinOp::Multiply && lv && rv {
                    return Err(ExpandError::Invalid("product of two variable expressions".into()));
                }
                CExpr::Bin { op: *op, l: Box::new(l), r: Box::new(r), lv, rv }
            }
        })
    }

    fn symbol_of(&self, set: usize) -> &str {
        &self.set_symbols[set]
    }

    fn tokens(&self, toks: &[IndexToken], names: &[String]) -> Result<Box<[CTok]>, ExpandError> {
        if toks.len() > MAX_ARITY {
            return Err(ExpandError::Invalid(format!("reference wider than {MAX_ARITY}")));
        }
        toks.iter()
            .map(|t| match t {
                IndexToken::Symbol(s) => names
                    .iter()
                    .rposition(|n| n == s)
                    .map(CTok::Slot)
                    .ok_or_else(|| ExpandError::Invalid(format!("unbound index symbol {s:?}"))),
                IndexToken::Positional { set, last } => {
                    let sid = self.set_id(set)?;
                    let n = self.sets[sid].len();
                    if n == 0 {
                        return Err(ExpandError::EmptyOrderedSet(set.clone()));
                    }
                    Ok(CTok::At(if *last { n as u32 - 1 } else { 0 }))
                }
            })
            .collect()
    }

    fn key<'k>(toks: &[CTok], slots: &[u32], buf: &'k mut [u32; MAX_ARITY]) -> &'k mut [u32] {
        for (i, t) in toks.iter().enumerate() {
            buf[i] = match *t {
                CTok::Slot(s) => slots[s],
                CTok::At(p) => p,
            };
        }
        &mut buf[..toks.len()]
    }

    fn resolve_var(&self, group: usize, toks: &[CTok], lag: Option<(usize, u32)>, slots: &[u32]) -> Result<Option<VarId>, EvalErr> {
        let mut buf = [0u32; MAX_ARITY];
        let key = Self::key(toks, slots, &mut buf);
        if let Some((pos, k)) = lag {
            if key[pos] < k {
                return Err(ExpandError::LagUnderflow.into());
            }
            key[pos] -= k;
        }
        Ok(self.groups[group].id_of(key))
    }

    fn lookup(&self, id: usize, toks: &[CTok], slots: &[u32]) -> f64 {
        let mut buf = [0u32; MAX_ARITY];
        let key = Self::key(toks, slots, &mut buf);
        self.params[id].lookup_pos(key).as_f64()
    }

    /// Value of a variable-free subtree; `+inf` is the missing-capacity sentinel.
    fn eval(&self, e: &CExpr, slots: &mut [u32]) -> Result<f64, EvalErr> {
        match e {
            CExpr::Const(v) => Ok(*v),
            CExpr::Param { id, toks } => Ok(self.lookup(*id, toks, slots)),
            CExpr::Var { .. } => Err(ExpandError::Invalid("variable in a constant context".into()).into()),
            CExpr::Sum { binds, body, .. } => {
                let mut total = 0.0;
                self.each_binding(binds, slots, &mut |env, slots| {
                    total += env.eval(body, slots)?;
                    Ok(())
                })?;
                Ok(total)
            }
            CExpr::Bin { op, l, r, .. } => {
                let a = self.eval(l, slots)?;
                let b = self.eval(r, slots)?;
                match op {
                    BinOp::Sum => Ok(a + b),
                    BinOp::Subtract => {
                        if b.is_infinite() {
                            Err(ExpandError::NonFinite(format!("{a} - {b}")).into())
                        } else {
                            Ok(a - b)
                        }
                    }
                    BinOp::Multiply => {
                        if a.is_infinite() || b.is_infinite() {
                            let other = if a.is_infinite() { b } else { a };
                            if other > 0.0 {
                                Ok(f64::INFINITY)
                            } else {
                                Err(ExpandError::NonFinite(format!("{a} * {b}")).into())
                            }
                        } else {
                            Ok(a * b)
                        }
                    }
                }
            }
        }
    }

    fn each_binding(
        &self,
        binds: &[(usize, usize)],
        slots: &mut [u32],
        f: &mut dyn FnMut(&Env, &mut [u32]) -> Result<(), EvalErr>,
    ) -> Result<(), EvalErr> {
        let Some((&(set, slot), rest)) = binds.split_first() else {
            return f(self, slots);
        };
        for p in 0..self.sets[set].len() as u32 {
            slots[slot] = p;
            if let Err(mut e) = self.each_binding(rest, slots, f) {
                e.inner.push((slot, p));
                return Err(e);
            }
        }
        Ok(())
    }

    fn lin(&self, e: &CExpr, scale: f64, slots: &mut [u32], acc: &mut Acc) -> Result<(), EvalErr> {
        if !e.has_vars() {
            let c = self.eval(e, slots)?;
            if c != 0.0 {
                acc.constant += scale * c;
            }
            return Ok(());
        }
        match e {
            CExpr::Var { group, toks, lag } => {
                if let Some(id) = self.resolve_var(*group, toks, *lag, slots)? {
                    acc.terms.push((id, scale));
                }
                Ok(())
            }
            CExpr::Sum { binds, body, .. } => self.each_binding(binds, slots, &mut |env, slots| env.lin(body, scale, slots, acc)),
            CExpr::Bin { op: BinOp::Sum, l, r, .. } => {
                self.lin(l, scale, slots, acc)?;
                self.lin(r, scale, slots, acc)
            }
            CExpr::Bin { op: BinOp::Subtract, l, r, .. } => {
                self.lin(l, scale, slots, acc)?;
                self.lin(r, -scale, slots, acc)
            }
            CExpr::Bin { op: BinOp::Multiply, l, r, lv, .. } => {
                let (vside, cside) = if *lv { (l, r) } else { (r, l) };
                // The variable side goes first: a term whose variables were
                // filtered out is dropped before its coefficient is looked up.
                if let CExpr::Var { group, toks, lag } = &**vside {
                    let Some(id) = self.resolve_var(*group, toks, *lag, slots)? else {
                        return Ok(());
                    };
                    let c = self.coefficient(cside, slots)?;
                    acc.terms.push((id, scale * c));
                    return Ok(());
                }
                let mut inner = Acc::default();
                self.lin(vside, 1.0, slots, &mut inner)?;
                if inner.terms.is_empty() && inner.constant == 0.0 {
                    return Ok(());
                }
                let c = self.coefficient(cside, slots)?;
                let s = scale * c;
                acc.terms.extend(inner.terms.into_iter().map(|(v, a)| (v, a * s)));
                acc.constant += inner.constant * s;
                Ok(())
            }
            CExpr::Const(_) | CExpr::Param { .. } => unreachable!("handled by the constant branch"),
        }
    }

    fn coefficient(&self, e: &CExpr, slots: &mut [u32]) -> Result<f64, EvalErr> {
        let c = self.eval(e, slots)?;
        if c.is_finite() {
            Ok(c)
        } else {
            Err(ExpandError::Coefficient(format!("coefficient {c} multiplies an existing variable")).into())
        }
    }

    fn linear(&self, e: &CExpr, slots: &mut [u32]) -> Result<LinearForm, EvalErr> {
        let mut acc = Acc::default();
        self.lin(e, 1.0, slots, &mut acc)?;
        normalize(&mut acc.terms);
        Ok(LinearForm { terms: acc.terms, constant: acc.constant })
    }

    fn located(&self, path: &str, names: &[String], sets: &[usize], outer: &[u32], e: EvalErr) -> Located {
        let mut binding: Vec<(String, String)> = outer
            .iter()
            .enumerate()
            .map(|(i, &p)| (names[i].clone(), self.sets[sets[i]].elements[p as usize].clone()))
            .collect();
        for &(slot, p) in e.inner.iter().rev() {
            if let (Some(n), Some(&s)) = (names.get(slot), sets.get(slot)) {
                binding.push((n.clone(), self.sets[s].elements[p as usize].clone()));
            }
        }
        Located { path: path.to_string(), binding, kind: e.kind }
    }

    /// Linearizes `expr` under a binding of index symbols to elements.
    pub fn linearize(&self, expr: &Expr, binding: &[(&str, &str)]) -> Result<LinearForm, ExpandError> {
        let mut names = Vec::new();
        let mut sets = Vec::new();
        let mut slots = Vec::new();
        for (sym, el) in binding {
            let sid = *self
                .symbols
                .get(*sym)
                .ok_or_else(|| ExpandError::Invalid(format!("no set uses index symbol {sym:?}")))?;
            let p = self.sets[sid]
                .position(el)
                .ok_or_else(|| ExpandError::Invalid(format!("{el:?} is not an element of {:?}", self.sets[sid].name)))?;
            names.push(sym.to_string());
            sets.push(sid);
            slots.push(p);
        }
        let c = self.compile(expr, &mut names, &mut sets)?;
        slots.resize(sets.len(), 0);
        let mut f = self.linear(&c, &mut slots).map_err(|e| e.kind)?;
        if !f.constant.is_finite() && c.has_vars() {
            return Err(ExpandError::NonFinite("constant part of a variable expression".into()));
        }
        normalize(&mut f.terms);
        Ok(f)
    }

    /// The objective as a linear form.
    pub fn objective(&self, expr: &Expr) -> Result<LinearForm, Located> {
        let mut names = Vec::new();
        let mut sets = Vec::new();
        let path = "objective.expression";
        let c = self
            .compile(expr, &mut names, &mut sets)
            .map_err(|kind| Located { path: path.into(), binding: Vec::new(), kind })?;
        let mut slots = vec![0u32; sets.len()];
        let f = self.linear(&c, &mut slots).map_err(|e| self.located(path, &names, &sets, &[], e))?;
        if !f.constant.is_finite() {
            return Err(Located {
                path: path.into(),
                binding: Vec::new(),
                kind: ExpandError::NonFinite("objective constant is not finite".into()),
            });
        }
        Ok(f)
    }

    pub(crate) fn compile_constraint(&self, name: &str, family: u32, c: &ConstraintDef) -> Result<CConstraint, Located> {
        let path = format!("constraints.{name}");
        let loc = |kind| Located { path: path.clone(), binding: Vec::new(), kind };
        let domain: Vec<usize> = c.domain.iter().map(|s| self.set_id(s)).collect::<Result<_, _>>().map_err(loc)?;
        let mut names: Vec<String> = domain.iter().map(|&s| self.symbol_of(s).to_string()).collect();
        let mut sets = domain.clone();
        let expr = self.compile(&c.expression, &mut names, &mut sets).map_err(loc)?;
        let rhs = self.compile(&c.rhs, &mut names, &mut sets).map_err(loc)?;
        let filter = match &c.sparse_filter {
            None => None,
            Some(f) => {
                let pid = *self
                    .param_index
                    .get(f)
                    .ok_or_else(|| loc(ExpandError::Invalid(format!("unknown parameter {f:?}"))))?;
                let pdom = &self.params[pid];
                let pdom_names: Vec<String> = pdom.sets.iter().map(|s| s.name.clone()).collect();
                let pos = crate::ir::subsequence_positions(&c.domain, &pdom_names)
                    .ok_or_else(|| loc(ExpandError::Invalid(format!("{f:?} does not match the constraint domain"))))?;
                Some((pid, pos))
            }
        };
        // Slot names and sets for error reporting: domain slots first, then sums.
        let mut slot_names: Vec<String> = domain.iter().map(|&s| self.symbol_of(s).to_string()).collect();
        let mut slot_sets = domain.clone();
        for &s in &sets[domain.len()..] {
            slot_names.push(self.symbol_of(s).to_string());
            slot_sets.push(s);
        }
        Ok(CConstraint { name: name.to_string(), family, domain, expr, rhs, sense: c.sense, filter, slot_names, slot_sets })
    }

    /// Expands one constraint family over its domain.
    pub(crate) fn expand_constraint(&self, c: &CConstraint) -> Result<FamilyRows, Located> {
        let path = format!("constraints.{}", c.name);
        let dims: Vec<usize> = c.domain.iter().map(|&s| self.sets[s].len()).collect();
        let mut out = FamilyRows::default();
        let mut slots = vec![0u32; c.slot_sets.len()];
        let mut err = None;
        let rhs_vars = c.rhs.has_vars();
        let mut fkey = Vec::new();
        for_each_tuple(&dims, |key| {
            slots[..key.len()].copy_from_slice(key);
            if let Some((pid, pos)) = &c.filter {
                fkey.clear();
                fkey.extend(pos.iter().map(|&k| key[k]));
                if self.params[*pid].get_pos(&fkey).is_none() {
                    out.filtered += 1;
                    return true;
                }
            }
            match self.expand_row(c, rhs_vars, &mut slots) {
                Ok(RowOutcome::Row(terms, rhs)) => {
                    let name = self.row_name(&c.name, &c.domain, key);
                    out.rows.push(Row { family: c.family, name, terms, sense: c.sense, rhs });
                }
                Ok(RowOutcome::Trivial) => out.trivial += 1,
                Ok(RowOutcome::Infeasible(rhs)) => {
                    let name = self.row_name(&c.name, &c.domain, key);
                    out.findings.push(Finding { family: c.family, name, sense: c.sense, rhs });
                }
                Ok(RowOutcome::SkipInf) => out.inf_rhs += 1,
                Ok(RowOutcome::SkipLag) => out.lag_skipped += 1,
                Err(e) => {
                    let mut names = c.slot_names.clone();
                    names.truncate(c.slot_sets.len());
                    err = Some(self.located(&path, &names, &c.slot_sets, key, e));
                    return false;
                }
            }
            true
        });
        match err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }

    fn row_name(&self, name: &str, domain: &[usize], key: &[u32]) -> String {
        let mut s = String::with_capacity(name.len() + 8 * key.len());
        s.push_str(name);
        for (&set, &p) in domain.iter().zip(key) {
            s.push('_');
            s.push_str(&self.sets[set].elements[p as usize]);
        }
        s
    }

    fn expand_row(&self, c: &CConstraint, rhs_vars: bool, slots: &mut [u32]) -> Result<RowOutcome, EvalErr> {
        let mut terms;
        let rhs_const;
        if !rhs_vars {
            let v = match self.eval(&c.rhs, slots) {
                Err(EvalErr { kind: ExpandError::LagUnderflow, .. }) => return Ok(RowOutcome::SkipLag),
                r => r?,
            };
            if v == f64::INFINITY {
                return match c.sense {
                    RowSense::Le => Ok(RowOutcome::SkipInf),
                    s => Err(ExpandError::InfRhs(s).into()),
                };
            }
            if !v.is_finite() {
                return Err(ExpandError::NonFinite(format!("right-hand side {v}")).into());
            }
            terms = Vec::new();
            rhs_const = v;
        } else {
            let mut acc = Acc::default();
            match self.lin(&c.rhs, -1.0, slots, &mut acc) {
                Err(EvalErr { kind: ExpandError::LagUnderflow, .. }) => return Ok(RowOutcome::SkipLag),
                r => r?,
            }
            if !acc.constant.is_finite() {
                return Err(ExpandError::Coefficient("right-hand side constant with variables is not finite".into()).into());
            }
            terms = acc.terms;
            rhs_const = -acc.constant;
        }
        let mut acc = Acc { terms: std::mem::take(&mut terms), constant: 0.0 };
        let rhs_len = acc.terms.len();
        match self.lin(&c.expr, 1.0, slots, &mut acc) {
            Err(EvalErr { kind: ExpandError::LagUnderflow, .. }) => return Ok(RowOutcome::SkipLag),
            r => r?,
        }
        if !acc.constant.is_finite() {
            return Err(ExpandError::NonFinite("left-hand side constant is not finite".into()).into());
        }
        // Keep the left-hand side terms ahead of moved right-hand side terms
        // so duplicates merge in expression order.
        acc.terms.rotate_left(rhs_len);
        normalize(&mut acc.terms);
        let rhs = rhs_const - acc.constant;
        if acc.terms.is_empty() {
            let holds = match c.sense {
                RowSense::Le => 0.0 <= rhs,
                RowSense::Ge => 0.0 >= rhs,
                RowSense::Eq => rhs == 0.0,
            };
            return Ok(if holds { RowOutcome::Trivial } else { RowOutcome::Infeasible(rhs) });
        }
        Ok(RowOutcome::Row(acc.terms, if rhs == 0.0 { 0.0 } else { rhs }))
    }
}

enum RowOutcome {
    Row(Vec<(VarId, f64)>, f64),
    Trivial,
    Infeasible(f64),
    SkipInf,
    SkipLag,
}
