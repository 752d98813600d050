//! Simulation of algorithmic collective action for group fairness.
//!
//! A minority sub-population relabels part of its own training data, a firm
//! trains a classifier by empirical risk minimisation, and the crate measures
//! error, statistical parity, equalized odds and collective success. The
//! [`theory`] module checks the accompanying closed-form results on
//! enumerable and Gaussian models.

pub mod data;
pub mod models;
pub mod error;
pub mod metrics;
pub mod rng;
pub mod strategies;
pub mod theory;

pub use data::{split, TabularDataset};
pub use error::{Error, Result};
