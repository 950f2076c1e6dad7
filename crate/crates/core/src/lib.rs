//! Procedural spatial-navigation tasks for language models: map topologies,
//! task generation, prompt rendering, evaluation, error analysis and the
//! human-baseline service.

pub mod analysis;
pub mod error;
pub mod harness;
pub mod humanlab;
pub mod jsonl;
pub mod render;
pub mod scalar;
pub mod seed;
pub mod taskgen;
pub mod topology;

pub use error::{Error, Result};
pub use scalar::Real;

pub type RegressionFit = analysis::LogisticFit<f64>;
pub type RegressionFit32 = analysis::LogisticFit<f32>;
pub type AccuracyTable = harness::AccuracyTable<f64>;
pub type AccuracyTable32 = harness::AccuracyTable<f32>;
