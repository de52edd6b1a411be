//! Shared test fixtures: the bundled five-vertex reference network.

use crate::model::{parse_instance, ProblemInstance};

/// JSON source of the bundled reference model (also shipped in `models/`).
pub const REFERENCE_MODEL: &str = include_str!("../../../models/example1.json");

/// The five-vertex reference network with its costs and capacity bounds.
pub fn reference_instance() -> ProblemInstance {
    parse_instance(REFERENCE_MODEL).expect("bundled reference model must parse")
}

/// The reference network without capacity bounds.
pub fn unconstrained_reference_instance() -> ProblemInstance {
    let mut inst = reference_instance();
    inst.bounds = None;
    inst
}
