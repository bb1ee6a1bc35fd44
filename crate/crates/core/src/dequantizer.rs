//! Builds and solves the dequantization program: a consensus term pulling
//! each review towards the mean of its paper, a λ-weighted fit to the
//! quantized scores, boxes of half a score unit around each score, and an
//! ε gap for every reported ranking pair.
//!
//! The quadratic form uses the Hessian of the literal objective, so
//! `½ yᵀQy + cᵀy + offset` equals
//! `Σ_p Σ_r (y_rp − ȳ_p)² + λ Σ (y_rp − z_rp)²` exactly:
//! each paper with μ reviews contributes `2(I − 11ᵀ/μ)`, the fit term
//! contributes `2λI`, `c = −2λz` and `offset = λ Σ z²`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{validate, DequantizedScores, ReviewDataset};
use crate::qp::{self, PairConstraint, QPProblem, Solution, SolverSettings, SparseBuilder};
use crate::qv::{self, QVConfig, QVReport};

pub const DEFAULT_EPSILON: f64 = 0.05;

/// λ used by [`Lambda::ConsensusOnly`]; small but positive so the program
/// stays strictly convex.
pub const CONSENSUS_ONLY_LAMBDA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda {
    Fixed(f64),
    /// Select λ by quantization validation over the default grid.
    Auto,
    /// Fit term switched off (λ = [`CONSENSUS_ONLY_LAMBDA`]).
    ConsensusOnly,
}

impl Lambda {
    fn concrete(self) -> Option<f64> {
        match self {
            Lambda::Fixed(v) => Some(v),
            Lambda::ConsensusOnly => Some(CONSENSUS_ONLY_LAMBDA),
            Lambda::Auto => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DequantizerConfig {
    pub lambda: Lambda,
    pub epsilon: f64,
    pub solver: SolverSettings,
}

impl Default for DequantizerConfig {
    fn default() -> Self {
        Self {
            lambda: Lambda::Auto,
            epsilon: DEFAULT_EPSILON,
            solver: SolverSettings::default(),
        }
    }
}

impl DequantizerConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda: Lambda::Fixed(lambda),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Lambda::Fixed(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidInput(format!("lambda must be positive, got {l}")));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidInput(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        self.solver.validate()
    }
}

/// Assembles the program for a concrete λ. Fails on `Lambda::Auto`.
pub fn assemble(dataset: &ReviewDataset, config: &DequantizerConfig) -> Result<QPProblem> {
    config.validate()?;
    let lambda = config
        .lambda
        .concrete()
        .ok_or_else(|| Error::InvalidInput("assemble needs a concrete lambda".into()))?;
    validate(dataset).map_err(Error::Validation)?;
    Ok(assemble_unchecked(dataset, lambda, config.epsilon))
}

pub(crate) fn assemble_unchecked(dataset: &ReviewDataset, lambda: f64, epsilon: f64) -> QPProblem {
    let n = dataset.len();
    let z = dataset.scores();
    let mut q = SparseBuilder::new(n);
    for reviews in dataset.assignment().reviews_by_paper() {
        let mu = reviews.len() as f64;
        for &i in &reviews {
            for &j in &reviews {
                let identity = if i == j { 1.0 } else { 0.0 };
                q.add(i, j, 2.0 * (identity - 1.0 / mu));
            }
        }
    }
    for i in 0..n {
        q.add(i, i, 2.0 * lambda);
    }
    let pairs = dataset
        .ranking_constraints()
        .expect("validated dataset has assigned ranking pairs")
        .into_iter()
        .map(|(upper, lower)| PairConstraint {
            upper,
            lower,
            gap: epsilon,
        })
        .collect();
    QPProblem {
        quadratic: q.build(),
        linear: z.iter().map(|&v| -2.0 * lambda * v as f64).collect(),
        offset: lambda * z.iter().map(|&v| (v * v) as f64).sum::<f64>(),
        pairs,
        lower: z.iter().map(|&v| v as f64 - 0.5).collect(),
        upper: z.iter().map(|&v| v as f64 + 0.5).collect(),
    }
}

/// Full result of a dequantization run.
#[derive(Debug, Clone)]
pub struct Dequantized {
    pub scores: DequantizedScores,
    pub lambda: f64,
    pub solution: Solution,
    /// Present when λ was selected automatically.
    pub selection: Option<QVReport>,
}

pub fn dequantize(dataset: &ReviewDataset, config: &DequantizerConfig) -> Result<DequantizedScores> {
    dequantize_detailed(dataset, config, None).map(|d| d.scores)
}

/// Like [`dequantize`], optionally warm-starting the solver and keeping
/// the solver diagnostics and λ selection report.
pub fn dequantize_detailed(
    dataset: &ReviewDataset,
    config: &DequantizerConfig,
    start: Option<&[f64]>,
) -> Result<Dequantized> {
    config.validate()?;
    validate(dataset).map_err(Error::Validation)?;
    let (lambda, selection) = match config.lambda.concrete() {
        Some(l) => (l, None),
        None => {
            let report = qv::select_lambda(dataset, &QVConfig::default(), config)?;
            (report.selected_lambda, Some(report))
        }
    };
    let problem = assemble_unchecked(dataset, lambda, config.epsilon);
    let solution = if dataset.len() == 1 {
        // fit term only: the score itself
        let values = vec![dataset.scores()[0] as f64];
        Solution {
            objective_value: problem.objective(&values),
            values,
            iterations: 0,
            residuals: qp::Residuals {
                primal_infeasibility: 0.0,
                stationarity: 0.0,
            },
            multipliers: qp::Multipliers {
                lower: vec![0.0],
                upper: vec![0.0],
                pairs: Vec::new(),
            },
        }
    } else {
        qp::solve_from(&problem, &config.solver, start)?
    };
    check_consistency(dataset, &problem, &solution.values, config.solver.feasibility_tolerance)?;
    Ok(Dequantized {
        scores: DequantizedScores::new(dataset.shared_assignment(), solution.values.clone())?,
        lambda,
        solution,
        selection,
    })
}

fn check_consistency(dataset: &ReviewDataset, problem: &QPProblem, y: &[f64], tol: f64) -> Result<()> {
    let worst = problem.max_violation(y);
    if worst > tol {
        return Err(Error::MaxIterations {
            iterations: 0,
            primal: worst,
            stationarity: f64::NAN,
        });
    }
    debug_assert_eq!(y.len(), dataset.len());
    Ok(())
}

/// `log P(y | x*)` under independent `N(x*_p, σ²)` reviews, restricted to
/// the quantization boxes: `−∞` if some `y_rp` leaves `[z_rp − ½, z_rp + ½]`.
///
/// `x_star` is indexed like `dataset.assignment().papers()`.
pub fn thurstone_joint_loglikelihood(
    dataset: &ReviewDataset,
    y: &DequantizedScores,
    x_star: &[f64],
    sigma: f64,
) -> f64 {
    let assignment = dataset.assignment();
    assert_eq!(x_star.len(), assignment.papers().len(), "one x* per paper");
    assert!(sigma > 0.0, "sigma must be positive");
    let values = y.values();
    let mut total = 0.0;
    for (i, review) in assignment.reviews().iter().enumerate() {
        let z = dataset.scores()[i] as f64;
        if values[i] < z - 0.5 || values[i] > z + 0.5 {
            return f64::NEG_INFINITY;
        }
        let d = values[i] - x_star[review.paper];
        total += -d * d / (2.0 * sigma * sigma) - 0.5 * (2.0 * PI * sigma * sigma).ln();
    }
    total
}

/// Per-paper mean of `values`, the maximizer of the log-likelihood over x*.
pub fn profile_x_star(dataset: &ReviewDataset, values: &[f64]) -> Vec<f64> {
    dataset
        .assignment()
        .reviews_by_paper()
        .into_iter()
        .map(|reviews| {
            if reviews.is_empty() {
                0.0
            } else {
                reviews.iter().map(|&i| values[i]).sum::<f64>() / reviews.len() as f64
            }
        })
        .collect()
}
