//! Compiler and solver for algebraic optimization models described in a
//! JSON intermediate representation (IR).
//!
//! The pipeline is: [`ir::parse_ir`] and [`ir::validate_ir`] for the model
//! text, [`data::DataStore`] for the CSV tables, [`model::compile`] to expand
//! the model into a [`model::CanonicalModel`], [`lp::emit_lp`] for the
//! solver-independent LP file, and [`solver::solve`] for the bundled
//! simplex / branch-and-bound solver. [`whatif`] applies data and structural
//! patches and diffs scenario solutions.

pub mod data;
pub mod diag;
pub mod expand;
pub mod fixtures;
pub mod ir;
mod keyed;
pub mod lp;
pub mod model;
pub mod solver;
pub mod whatif;

pub use diag::{Diagnostic, Severity};

/// Separator between group name and key elements in internal variable names.
pub const KEY_SEP: char = '\u{1f}';
