//! Boundary-value mutation testing for MiniC programs.

pub mod evaluator;
pub mod minilang;
pub mod mutator;
pub mod report;
pub mod subjects;
pub mod suitegen;
pub mod tracer;
