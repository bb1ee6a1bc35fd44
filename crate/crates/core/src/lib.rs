//! Dequantization of reviewer scores: merges integer scores with partial
//! rankings into real-valued scores by solving a small convex quadratic
//! program, with λ selection by quantization validation, reference
//! baselines, metrics, a synthetic data generator and an experiment
//! harness.

pub mod baselines;
pub mod dequantizer;
pub mod error;
pub mod experiment;
pub mod io;
pub mod metrics;
pub mod model;
pub mod qp;
pub mod qv;
pub mod synth;

pub use dequantizer::{dequantize, DequantizerConfig, Lambda};
pub use error::{Error, InfeasibleChain, Result};
pub use model::{Assignment, DequantizedScores, PartialRanking, ReviewDataset, ScoreScale};
