//! Experiment runner for collective label-flipping studies.
//!
//! A JSON [`ExperimentConfig`] names a data source, the firm's learner, the
//! collective's strategy and an optional sweep axis. [`run_once`] runs one
//! cell, [`sweep`] the full grid with a no-action baseline per repetition,
//! [`pareto`] adds a post-processing point, and [`theory_check`] runs the
//! closed-form verifiers.

pub mod config;
pub mod error;
pub mod pareto;
pub mod pipeline;
pub mod sweep;
pub mod theory_check;

pub use config::{DataSource, ExperimentConfig, FirmSpec, SweepAxis};
pub use error::{HarnessError, Result};
pub use pareto::{non_dominated, pareto, ParetoTable};
pub use pipeline::{run_once, ExperimentResult};
pub use sweep::{sweep, RowKind, SweepOptions, SweepTable};
pub use theory_check::{theory_check, TheoryTarget};
