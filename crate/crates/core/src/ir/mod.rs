//! IR data model, parser, serializer and validator.
//!
//! Maps are [`IndexMap`]s so declaration order survives a round trip and
//! drives set iteration, variable id assignment and row order downstream.

pub mod json;
mod parse;
mod serialize;
mod validate;

use indexmap::IndexMap;
use std::fmt;
use thiserror::Error;

pub use parse::{parse_constraint, parse_expr, parse_ir, ParsedIr};
pub use serialize::{constraint_to_value, expr_to_value, ir_to_value, serialize_ir};
pub use validate::{validate_ir, ValidationReport};
pub(crate) use validate::subsequence_positions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Maximize,
    Minimize,
}

impl Sense {
    pub fn as_str(self) -> &'static str {
        match self {
            Sense::Maximize => "maximize",
            Sense::Minimize => "minimize",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum RowSense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl RowSense {
    pub fn as_str(self) -> &'static str {
        match self {
            RowSense::Le => "<=",
            RowSense::Eq => "=",
            RowSense::Ge => ">=",
        }
    }

    pub fn parse(s: &str) -> Option<RowSense> {
        match s {
            "<=" => Some(RowSense::Le),
            "=" | "==" => Some(RowSense::Eq),
            ">=" => Some(RowSense::Ge),
            _ => None,
        }
    }
}

impl fmt::Display for RowSense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamType {
    Float,
    Int,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissingDefault {
    Zero,
    Inf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VarType {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrModel {
    pub problem_class: String,
    pub model_type: String,
    pub sense: Sense,
    pub sets: IndexMap<String, SetDef>,
    pub parameters: IndexMap<String, ParamDef>,
    pub variables: IndexMap<String, VarDef>,
    pub constraints: IndexMap<String, ConstraintDef>,
    pub objective: ObjectiveDef,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetDef {
    /// Declared size; informational only.
    pub size: Option<u64>,
    pub index_symbol: String,
    pub source: String,
    pub column: String,
    pub filter_column: Option<String>,
    pub filter_value: Option<String>,
    pub ordered: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamDef {
    pub domain: Vec<String>,
    pub ty: ParamType,
    pub source: String,
    pub column: String,
    /// `None` exactly when the domain is empty (scalar parameter).
    pub index_columns: Option<Vec<String>>,
    pub missing_default: MissingDefault,
    pub optional: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDef {
    pub description: Option<String>,
    pub label: Option<String>,
    pub domain: Vec<String>,
    pub ty: VarType,
    /// `None` is unbounded below.
    pub lower_bound: Option<f64>,
    /// `None` is unbounded above.
    pub upper_bound: Option<f64>,
    pub domain_filter: Option<String>,
    pub exclude_diagonal: bool,
    /// Accepted for compatibility; must be absent or null.
    pub upper_bound_set: Option<String>,
    /// Per-instance fixings applied after instantiation.
    pub fixings: Vec<Fixing>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fixing {
    pub key: Vec<String>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintDef {
    pub domain: Vec<String>,
    pub expression: Expr,
    pub sense: RowSense,
    pub rhs: Expr,
    pub sparse_filter: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveDef {
    pub sense: Sense,
    pub expression: Expr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Sum,
    Subtract,
    Multiply,
}

impl BinOp {
    pub fn as_str(self) -> &'static str {
        match self {
            BinOp::Sum => "sum",
            BinOp::Subtract => "subtract",
            BinOp::Multiply => "multiply",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    IndexedSum { over: Vec<String>, body: Box<Expr> },
    Binary { op: BinOp, left: Box<Expr>, right: Box<Expr> },
    Var(VarRef),
    Param(ParamRef),
    Const(f64),
}

impl Expr {
    pub fn binary(op: BinOp, left: Expr, right: Expr) -> Expr {
        Expr::Binary { op, left: Box::new(left), right: Box::new(right) }
    }

    /// True if any variable reference occurs in the subtree.
    pub fn has_vars(&self) -> bool {
        match self {
            Expr::IndexedSum { body, .. } => body.has_vars(),
            Expr::Binary { left, right, .. } => left.has_vars() || right.has_vars(),
            Expr::Var(_) => true,
            Expr::Param(_) | Expr::Const(_) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarRef {
    pub name: String,
    pub indices: Vec<IndexToken>,
    /// Negative shift on the ordered-set position, e.g. `-1` for `t-1`.
    pub lag: Option<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamRef {
    pub name: String,
    pub indices: Vec<IndexToken>,
}

/// An index position in a reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum IndexToken {
    /// A bound index symbol such as `i`.
    Symbol(String),
    /// `Set[0]` (first element) or `Set[-1]` (last element) of an ordered set.
    Positional { set: String, last: bool },
}

impl IndexToken {
    /// Parses a token string; `None` for anything outside the grammar.
    pub fn parse(s: &str) -> Option<IndexToken> {
        if let Some(open) = s.find('[') {
            let set = &s[..open];
            let rest = s[open + 1..].strip_suffix(']')?;
            if !is_identifier(set) {
                return None;
            }
            match rest {
                "0" => Some(IndexToken::Positional { set: set.to_string(), last: false }),
                "-1" => Some(IndexToken::Positional { set: set.to_string(), last: true }),
                _ => None,
            }
        } else if is_identifier(s) {
            Some(IndexToken::Symbol(s.to_string()))
        } else {
            None
        }
    }
}

impl fmt::Display for IndexToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexToken::Symbol(s) => f.write_str(s),
            IndexToken::Positional { set, last: false } => write!(f, "{set}[0]"),
            IndexToken::Positional { set, last: true } => write!(f, "{set}[-1]"),
        }
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IrError {
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("bad index token {token:?} at {path}")]
    Token { path: String, token: String },
    #[error("duplicate key {key:?} at {path}")]
    DuplicateKey { path: String, key: String },
}

impl IrError {
    pub fn path(&self) -> Option<&str> {
        match self {
            IrError::Json { .. } => None,
            IrError::Schema { path, .. }
            | IrError::Token { path, .. }
            | IrError::DuplicateKey { path, .. } => Some(path),
        }
    }
}

impl IrModel {
    /// The set whose `index_symbol` is `sym`, if any.
    pub fn set_for_symbol(&self, sym: &str) -> Option<&str> {
        self.sets.iter().find(|(_, s)| s.index_symbol == sym).map(|(n, _)| n.as_str())
    }
}
