//! λ selection by quantization validation: quantize the reported scores a
//! second time, dequantize the coarser data for every candidate λ, and
//! keep the λ whose output best recovers the order of the reported scores.

use serde::{Deserialize, Serialize};

use crate::dequantizer::{dequantize_detailed, DequantizerConfig, Lambda};
use crate::error::{Error, Result};
use crate::metrics::{kendall_tau_error_with, TIE_TOLERANCE};
use crate::model::{derive_rankings_from_raw_scores, ReviewDataset, ScoreScale};

/// Two candidate errors closer than this are treated as equal.
const TIE_BREAK_TOLERANCE: f64 = 1e-12;

/// `⌈z/2⌉`.
pub fn ceil_half(z: i64) -> i64 {
    -((-z).div_euclid(2))
}

/// `exp(t/4)` for `t = 0, …, 39`.
pub fn default_grid() -> Vec<f64> {
    (0..40).map(|t| (t as f64 / 4.0).exp()).collect()
}

#[derive(Debug, Clone)]
pub struct QVConfig {
    pub grid: Vec<f64>,
    /// Monotone non-decreasing map applied to every score.
    pub quantizer: fn(i64) -> i64,
}

impl Default for QVConfig {
    fn default() -> Self {
        Self {
            grid: default_grid(),
            quantizer: ceil_half,
        }
    }
}

impl QVConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidInput("lambda grid is empty".into()));
        }
        if self.grid.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidInput("lambda grid values must be positive".into()));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("lambda grid must be strictly increasing".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QVReport {
    pub candidates: Vec<f64>,
    /// Validation error per candidate, in grid order.
    pub errors: Vec<f64>,
    pub selected_index: usize,
    pub selected_lambda: f64,
}

/// Scores mapped through `quantizer`; rankings rebuilt from strict
/// inequalities of the original scores, so papers merged into one coarse
/// level keep their original order.
pub fn coarsen(dataset: &ReviewDataset, quantizer: fn(i64) -> i64) -> Result<ReviewDataset> {
    let scale = dataset.scale();
    let coarse_scale = ScoreScale::new(quantizer(scale.lower), quantizer(scale.upper))
        .map_err(|_| Error::DegenerateValidation)?;
    let scores: Vec<i64> = dataset.scores().iter().map(|&z| quantizer(z)).collect();
    let original: Vec<f64> = dataset.scores().iter().map(|&z| z as f64).collect();
    let rankings = derive_rankings_from_raw_scores(dataset.assignment(), &original);
    dataset.with_scores(coarse_scale, scores, rankings)
}

/// Runs validation for every λ in the grid and returns the one with the
/// smallest error, the smallest λ among equal errors. Uses the ε and
/// solver settings of `deq_config`; its λ is ignored.
pub fn select_lambda(
    dataset: &ReviewDataset,
    config: &QVConfig,
    deq_config: &DequantizerConfig,
) -> Result<QVReport> {
    config.validate()?;
    let truth: Vec<f64> = dataset.scores().iter().map(|&z| z as f64).collect();
    if truth.windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::DegenerateValidation);
    }
    let coarse = coarsen(dataset, config.quantizer)?;
    let mut errors = Vec::with_capacity(config.grid.len());
    let mut warm: Option<Vec<f64>> = None;
    for &lambda in &config.grid {
        let cfg = DequantizerConfig {
            lambda: Lambda::Fixed(lambda),
            ..*deq_config
        };
        let out = dequantize_detailed(&coarse, &cfg, warm.as_deref())?;
        let estimate = out.scores.values();
        errors.push(kendall_tau_error_with(&truth, estimate, 0.0, TIE_TOLERANCE)?);
        warm = Some(out.solution.values);
    }
    let best = errors.iter().copied().fold(f64::INFINITY, f64::min);
    let selected_index = errors
        .iter()
        .position(|&e| e <= best + TIE_BREAK_TOLERANCE)
        .expect("grid is nonempty");
    Ok(QVReport {
        selected_lambda: config.grid[selected_index],
        candidates: config.grid.clone(),
        errors,
        selected_index,
    })
}
