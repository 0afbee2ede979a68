//! Experiment driver for the hpdg solver: convergence studies, cycle-count
//! tables, residual histories, variant equivalence and the memory-access
//! model. Every run emits CSV tables and a JSON manifest that reproduces it.

pub mod config;
pub mod experiments;
pub mod reference;
pub mod table;

pub use config::{Experiment, RunManifest, RunSpec, SolverSettings};
pub use table::Table;
