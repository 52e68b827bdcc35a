//! The three reference IR documents shipped with the crate.

pub const SUPPLY_CHAIN_LP_IR: &str = include_str!("../fixtures/supply_chain_lp.ir.json");
pub const SUPPLY_CHAIN_MIP_IR: &str = include_str!("../fixtures/supply_chain_mip.ir.json");
pub const ASSIGNMENT_IR: &str = include_str!("../fixtures/assignment.ir.json");
