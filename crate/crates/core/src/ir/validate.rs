use super::*;
use crate::diag::Diagnostic;
use serde::Serialize;

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<Diagnostic>,
    pub warnings: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Runs every static check and reports all findings, not just the first.
pub fn validate_ir(m: &IrModel) -> ValidationReport {
    let mut v = Validator { m, r: ValidationReport::default() };
    v.sets();
    v.params();
    v.vars();
    for (name, c) in &m.constraints {
        v.constraint(name, c);
    }
    if m.objective.sense != m.sense {
        v.err(
            "objective_sense_mismatch",
            "objective.sense",
            format!("objective sense {} differs from model sense {}", m.objective.sense.as_str(), m.sense.as_str()),
        );
    }
    let mut scope = Vec::new();
    v.expr(&m.objective.expression, "objective.expression", &mut scope);
    v.r
}

struct Validator<'a> {
    m: &'a IrModel,
    r: ValidationReport,
}

type Scope<'a> = Vec<(&'a str, &'a str)>;

impl<'a> Validator<'a> {
    fn err(&mut self, code: &str, path: impl Into<String>, msg: impl Into<String>) {
        self.r.errors.push(Diagnostic::error(code, path, msg));
    }

    fn warn(&mut self, code: &str, path: impl Into<String>, msg: impl Into<String>) {
        self.r.warnings.push(Diagnostic::warning(code, path, msg));
    }

    fn domain(&mut self, domain: &[String], path: &str) {
        for (k, s) in domain.iter().enumerate() {
            if !self.m.sets.contains_key(s) {
                self.err("unknown_set", format!("{path}[{k}]"), format!("unknown set {s:?}"));
            }
        }
    }

    fn sets(&mut self) {
        let m = self.m;
        for (i, (name, s)) in m.sets.iter().enumerate() {
            let path = format!("sets.{name}");
            if !is_identifier(&s.index_symbol) {
                self.err("bad_index_symbol", format!("{path}.index_symbol"), "index symbol must be an identifier");
            }
            if s.filter_column.is_some() != s.filter_value.is_some() {
                self.err(
                    "set_filter_incomplete",
                    &path,
                    "filter_column and filter_value must both be present or both absent",
                );
            }
            if let Some((other, _)) = m.sets.iter().take(i).find(|(_, o)| o.index_symbol == s.index_symbol) {
                self.warn(
                    "duplicate_index_symbol",
                    format!("{path}.index_symbol"),
                    format!("index symbol {:?} is also used by set {other:?}", s.index_symbol),
                );
            }
        }
    }

    fn params(&mut self) {
        let m = self.m;
        for (name, p) in &m.parameters {
            let path = format!("parameters.{name}");
            self.domain(&p.domain, &format!("{path}.domain"));
            match &p.index_columns {
                None if !p.domain.is_empty() => self.err(
                    "index_columns_mismatch",
                    format!("{path}.index_columns"),
                    "index_columns may be null only for a scalar parameter",
                ),
                Some(_) if p.domain.is_empty() => self.err(
                    "index_columns_mismatch",
                    format!("{path}.index_columns"),
                    "a scalar parameter takes index_columns: null",
                ),
                Some(cols) if cols.len() != p.domain.len() => self.err(
                    "index_columns_mismatch",
                    format!("{path}.index_columns"),
                    format!("{} index columns for a domain of {} sets", cols.len(), p.domain.len()),
                ),
                _ => {}
            }
        }
    }

    fn vars(&mut self) {
        let m = self.m;
        for (name, v) in &m.variables {
            let path = format!("variables.{name}");
            self.domain(&v.domain, &format!("{path}.domain"));
            let lb = v.lower_bound.unwrap_or(f64::NEG_INFINITY);
            let ub = v.upper_bound.unwrap_or(f64::INFINITY);
            if v.ty == VarType::Binary && !((0.0..=1.0).contains(&lb) && (0.0..=1.0).contains(&ub)) {
                self.err("binary_bounds", &path, "binary bounds must lie within [0, 1]");
            }
            if lb > ub {
                self.err("bound_order", &path, format!("lower bound {lb} exceeds upper bound {ub}"));
            }
            if lb.is_nan() || ub.is_nan() || lb == f64::INFINITY || ub == f64::NEG_INFINITY {
                self.err("bound_order", &path, "bounds must be numbers or null");
            }
            if let Some(f) = &v.domain_filter {
                match m.parameters.get(f) {
                    None => self.err("unknown_parameter", format!("{path}.domain_filter"), format!("unknown parameter {f:?}")),
                    Some(p) => {
                        if p.domain.is_empty() || !v.domain.starts_with(&p.domain) {
                            self.err(
                                "domain_filter_not_prefix",
                                format!("{path}.domain_filter"),
                                format!("domain of {f:?} is not a leading part of the variable domain"),
                            );
                        }
                    }
                }
            }
            if v.exclude_diagonal && !(v.domain.len() >= 2 && v.domain[0] == v.domain[1]) {
                self.err(
                    "exclude_diagonal_domain",
                    format!("{path}.exclude_diagonal"),
                    "exclude_diagonal needs the first two domain sets to be the same set",
                );
            }
            if v.upper_bound_set.is_some() {
                self.err(
                    "upper_bound_set_unsupported",
                    format!("{path}.upper_bound_set"),
                    "upper_bound_set must be null",
                );
            }
            for (i, fx) in v.fixings.iter().enumerate() {
                let fp = format!("{path}.fixings[{i}]");
                if fx.key.len() != v.domain.len() {
                    self.err("fixing_arity", &fp, format!("key has {} elements, domain has {}", fx.key.len(), v.domain.len()));
                }
                let ok = fx.value.is_finite()
                    && fx.value >= lb
                    && fx.value <= ub
                    && (v.ty != VarType::Binary || fx.value == 0.0 || fx.value == 1.0);
                if !ok {
                    self.err("fixing_value", &fp, format!("value {} is outside the variable's bounds", fx.value));
                }
            }
        }
    }

    fn constraint(&mut self, name: &'a str, c: &'a ConstraintDef) {
        let m = self.m;
        let path = format!("constraints.{name}");
        self.domain(&c.domain, &format!("{path}.domain"));
        let mut scope: Scope<'a> = Vec::new();
        for (k, s) in c.domain.iter().enumerate() {
            if let Some(set) = m.sets.get(s) {
                let sym = set.index_symbol.as_str();
                if scope.iter().any(|(b, _)| *b == sym) {
                    self.err(
                        "symbol_shadowing",
                        format!("{path}.domain[{k}]"),
                        format!("index symbol {sym:?} is bound twice"),
                    );
                }
                scope.push((sym, s.as_str()));
            }
        }
        self.expr(&c.expression, &format!("{path}.expression"), &mut scope);
        self.expr(&c.rhs, &format!("{path}.rhs"), &mut scope);
        if let Some(f) = &c.sparse_filter {
            match m.parameters.get(f) {
                None => self.err("unknown_parameter", format!("{path}.sparse_filter"), format!("unknown parameter {f:?}")),
                Some(p) => {
                    if subsequence_positions(&c.domain, &p.domain).is_none() {
                        self.err(
                            "sparse_filter_not_subsequence",
                            format!("{path}.sparse_filter"),
                            format!("domain of {f:?} is not a subsequence of the constraint domain"),
                        );
                    } else if !c.domain.starts_with(&p.domain) {
                        self.warn(
                            "sparse_filter_not_prefix",
                            format!("{path}.sparse_filter"),
                            format!("domain of {f:?} is a non-leading subsequence of the constraint domain"),
                        );
                    }
                }
            }
        }
    }

    fn expr(&mut self, e: &'a Expr, path: &str, scope: &mut Scope<'a>) {
        let m = self.m;
        match e {
            Expr::IndexedSum { over, body } => {
                let before = scope.len();
                for (k, s) in over.iter().enumerate() {
                    match m.sets.get(s) {
                        None => self.err("unknown_set", format!("{path}.over[{k}]"), format!("unknown set {s:?}")),
                        Some(set) => {
                            let sym = set.index_symbol.as_str();
                            if scope.iter().any(|(b, _)| *b == sym) {
                                self.err(
                                    "symbol_shadowing",
                                    format!("{path}.over[{k}]"),
                                    format!("index symbol {sym:?} is already bound"),
                                );
                            }
                            scope.push((sym, s.as_str()));
                        }
                    }
                }
                self.expr(body, &format!("{path}.body"), scope);
                scope.truncate(before);
            }
            Expr::Binary { op, left, right } => {
                if *op == BinOp::Multiply && left.has_vars() && right.has_vars() {
                    self.err("nonlinear_product", path, "both factors of a product contain variables");
                }
                self.expr(left, &format!("{path}.left"), scope);
                self.expr(right, &format!("{path}.right"), scope);
            }
            Expr::Var(v) => match m.variables.get(&v.name) {
                None => self.err("unknown_variable", format!("{path}.name"), format!("unknown variable {:?}", v.name)),
                Some(def) => self.reference(&def.domain, &v.indices, v.lag, path, scope),
            },
            Expr::Param(p) => match m.parameters.get(&p.name) {
                None => self.err("unknown_parameter", format!("{path}.name"), format!("unknown parameter {:?}", p.name)),
                Some(def) => self.reference(&def.domain, &p.indices, None, path, scope),
            },
            Expr::Const(x) => {
                if !x.is_finite() {
                    self.err("non_finite_constant", format!("{path}.value"), "constants must be finite");
                }
            }
        }
    }

    fn reference(&mut self, domain: &[String], indices: &[IndexToken], lag: Option<i64>, path: &str, scope: &Scope<'a>) {
        let m = self.m;
        if indices.len() != domain.len() {
            self.err(
                "arity_mismatch",
                format!("{path}.indices"),
                format!("{} indices for a domain of {} sets", indices.len(), domain.len()),
            );
        }
        for (k, tok) in indices.iter().enumerate() {
            let tp = format!("{path}.indices[{k}]");
            let expected = domain.get(k).map(String::as_str);
            match tok {
                IndexToken::Symbol(s) => match scope.iter().rev().find(|(b, _)| b == s) {
                    None => self.err("unbound_symbol", &tp, format!("index symbol {s:?} is not bound here")),
                    Some((_, set)) => {
                        if expected.is_some_and(|e| e != *set) {
                            self.err(
                                "index_set_mismatch",
                                &tp,
                                format!("{s:?} ranges over {set:?} but this position expects {:?}", expected.unwrap()),
                            );
                        }
                    }
                },
                IndexToken::Positional { set, .. } => match m.sets.get(set) {
                    None => self.err("unknown_set", &tp, format!("unknown set {set:?}")),
                    Some(def) => {
                        if !def.ordered {
                            self.err("positional_on_unordered", &tp, format!("set {set:?} is not ordered"));
                        }
                        if expected.is_some_and(|e| e != set) {
                            self.err(
                                "index_set_mismatch",
                                &tp,
                                format!("position expects {:?}, token names {set:?}", expected.unwrap()),
                            );
                        }
                    }
                },
            }
        }
        if let Some(l) = lag {
            let lp = format!("{path}.lag");
            if l >= 0 {
                self.err("lag_not_negative", &lp, format!("lag must be negative, found {l}"));
            }
            let ordered = domain.iter().filter(|s| m.sets.get(*s).is_some_and(|d| d.ordered)).count();
            match ordered {
                0 => self.err("lag_on_unordered", &lp, "lag needs an ordered set in the referenced domain"),
                1 => {}
                _ => self.err("lag_ambiguous", &lp, "lag is ambiguous with more than one ordered set position"),
            }
        }
    }
}

/// Positions of `sub` within `full` as a subsequence, matched greedily.
pub(crate) fn subsequence_positions(full: &[String], sub: &[String]) -> Option<Vec<usize>> {
    let mut out = Vec::with_capacity(sub.len());
    let mut start = 0;
    for s in sub {
        let k = full[start..].iter().position(|f| f == s)? + start;
        out.push(k);
        start = k + 1;
    }
    Some(out)
}
