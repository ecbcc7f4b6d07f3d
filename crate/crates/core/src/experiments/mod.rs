//! Semicontinuity experiments, randomized property suites and their instance generators.

pub mod lsc;
pub mod random;
pub mod sequences;
pub mod suites;

pub use lsc::{lsc_experiment, LscOptions, LscReport, LscRow};
pub use sequences::{PlanSequence, BUILTIN_SEQUENCES};
pub use suites::{property_suite, property_suites, SuiteOutcome, SuiteReport, SUITES};
