//! LP file writer (CPLEX LP subset).

use crate::data::SetInstance;
use crate::expand::{Finding, LinearForm, VarGroup, VarId};
use crate::ir::{RowSense, Sense, VarType};
use crate::model::CanonicalModel;
use std::collections::HashSet;
use std::io::{self, Write};
use std::sync::Arc;
use thiserror::Error;

const MAX_NAME: usize = 255;
const WRAP: usize = 200;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("name {name:?} is longer than {MAX_NAME} characters")]
    NameOverflow { name: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Replaces every character outside `[A-Za-z0-9_]` with `_`.
pub fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect()
}

/// Shortest round-trip decimal; exponent form for very large or small values.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = v.abs();
    if !(1e-6..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn unique(name: String, id: usize, seen: &mut HashSet<String>) -> Result<String, LpError> {
    let name = if seen.contains(&name) { format!("{name}_{id}") } else { name };
    if name.len() > MAX_NAME {
        return Err(LpError::NameOverflow { name });
    }
    seen.insert(name.clone());
    Ok(name)
}

/// LP names for all variables: sanitized group and key joined by `_`.
pub fn var_names(sets: &[Arc<SetInstance>], groups: &[VarGroup]) -> Result<Vec<String>, LpError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for g in groups {
        let base = sanitize(&g.name);
        for local in 0..g.count as usize {
            let mut n = base.clone();
            for (&p, &s) in g.key(local).iter().zip(&g.set_ids) {
                n.push('_');
                n.push_str(&sanitize(&sets[s].elements[p as usize]));
            }
            let id = g.first as usize + local;
            out.push(unique(n, id, &mut seen)?);
        }
    }
    Ok(out)
}

/// Streaming LP writer: header and objective, then rows, then bounds.
pub struct LpWriter<W: Write> {
    out: W,
    names: Vec<String>,
    row_names: HashSet<String>,
    rows: usize,
    line: String,
}

impl<W: Write> LpWriter<W> {
    pub fn begin(out: W, sense: Sense, names: Vec<String>, objective: &LinearForm) -> Result<Self, LpError> {
        let mut w = LpWriter { out, names, row_names: HashSet::new(), rows: 0, line: String::new() };
        writeln!(w.out, "{}", if sense == Sense::Maximize { "Maximize" } else { "Minimize" })?;
        w.line.push_str(" obj:");
        w.terms(&objective.terms);
        if objective.constant != 0.0 {
            let c = objective.constant;
            w.push(&format!("{} {}", if c < 0.0 { "-" } else { "+" }, fmt_num(c.abs())));
        }
        w.flush_line()?;
        writeln!(w.out, "Subject To")?;
        Ok(w)
    }

    fn push(&mut self, tok: &str) {
        let col = self.line.len() - self.line.rfind('\n').map_or(0, |p| p + 1);
        if col + 1 + tok.len() > WRAP {
            self.line.push_str("\n  ");
        }
        self.line.push(' ');
        self.line.push_str(tok);
    }

    fn flush_line(&mut self) -> io::Result<()> {
        self.line.push('\n');
        self.out.write_all(self.line.as_bytes())?;
        self.line.clear();
        Ok(())
    }

    fn terms(&mut self, terms: &[(VarId, f64)]) {
        for (k, &(v, a)) in terms.iter().enumerate() {
            let name = &self.names[v as usize];
            let tok = match (k == 0, a) {
                (true, 1.0) => name.clone(),
                (true, -1.0) => format!("- {name}"),
                (true, a) => format!("{} {name}", fmt_num(a)),
                (false, 1.0) => format!("+ {name}"),
                (false, -1.0) => format!("- {name}"),
                (false, a) if a < 0.0 => format!("- {} {name}", fmt_num(-a)),
                (false, a) => format!("+ {} {name}", fmt_num(a)),
            };
            self.push(&tok);
        }
    }

    pub fn row(&mut self, name: &str, terms: &[(VarId, f64)], sense: RowSense, rhs: f64) -> Result<(), LpError> {
        let name = unique(sanitize(name), self.rows, &mut self.row_names)?;
        self.rows += 1;
        self.line.push(' ');
        self.line.push_str(&name);
        self.line.push(':');
        self.terms(terms);
        self.push(sense.as_str());
        self.push(&fmt_num(rhs));
        self.flush_line()?;
        Ok(())
    }

    /// An infeasible term-less row, kept as a comment.
    pub fn finding(&mut self, f: &Finding) -> Result<(), LpError> {
        writeln!(self.out, "\\ infeasible {}: 0 {} {}", sanitize(&f.name), f.sense.as_str(), fmt_num(f.rhs))?;
        Ok(())
    }

    pub fn finish(mut self, lb: &[f64], ub: &[f64], ty: impl Fn(VarId) -> VarType) -> Result<W, LpError> {
        writeln!(self.out, "Bounds")?;
        let mut binaries = Vec::new();
        let mut generals = Vec::new();
        for (id, name) in self.names.iter().enumerate() {
            let (l, u) = (lb[id], ub[id]);
            let binary = ty(id as VarId) == VarType::Binary;
            if binary {
                if l == 0.0 && u == 1.0 {
                    binaries.push(id);
                    continue;
                }
                generals.push(id);
            }
            if l == u {
                writeln!(self.out, " {name} = {}", fmt_num(l))?;
            } else if l == f64::NEG_INFINITY && u == f64::INFINITY {
                writeln!(self.out, " {name} free")?;
            } else if l != 0.0 && u != f64::INFINITY {
                writeln!(self.out, " {} <= {name} <= {}", fmt_num(l), fmt_num(u))?;
            } else if l != 0.0 {
                writeln!(self.out, " {name} >= {}", fmt_num(l))?;
            } else if u != f64::INFINITY {
                writeln!(self.out, " {name} <= {}", fmt_num(u))?;
            }
        }
        for (title, list) in [("Binaries", binaries), ("Generals", generals)] {
            if list.is_empty() {
                continue;
            }
            writeln!(self.out, "{title}")?;
            for id in list {
                writeln!(self.out, " {}", self.names[id])?;
            }
        }
        writeln!(self.out, "End")?;
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Writes a compiled model as an LP file.
pub fn emit_lp<W: Write>(cm: &CanonicalModel, out: W) -> Result<W, LpError> {
    let names = var_names(&cm.sets, &cm.groups)?;
    let mut w = LpWriter::begin(out, cm.sense, names, &cm.objective)?;
    let mut rows = cm.rows.iter().peekable();
    let mut findings = cm.findings.iter().peekable();
    for fam in 0..cm.families.len() as u32 {
        while let Some(r) = rows.next_if(|r| r.family == fam) {
            w.row(&r.name, &r.terms, r.sense, r.rhs)?;
        }
        while let Some(f) = findings.next_if(|f| f.family == fam) {
            w.finding(f)?;
        }
    }
    w.finish(&cm.lb, &cm.ub, |id| cm.var_type(id))
}

pub fn emit_lp_string(cm: &CanonicalModel) -> Result<String, LpError> {
    let bytes = emit_lp(cm, Vec::new())?;
    Ok(String::from_utf8(bytes).expect("LP output is ASCII"))
}
