use std::fmt;

use thiserror::Error;

use crate::model::Violation;

/// A chain of pair constraints that cannot be satisfied inside the boxes.
///
/// `chain` lists variable indices from the variable whose lower bound is
/// pushed up to the variable whose upper bound is pulled down.
#[derive(Debug, Clone, PartialEq)]
pub struct InfeasibleChain {
    pub chain: Vec<usize>,
    pub required_span: f64,
    pub available_span: f64,
}

impl fmt::Display for InfeasibleChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path: Vec<String> = self.chain.iter().map(|i| i.to_string()).collect();
        write!(
            f,
            "chain {} needs span {:.6} but boxes allow {:.6}",
            path.join(" > "),
            self.required_span,
            self.available_span
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset failed validation with {} violation(s)", .0.len())]
    Validation(Vec<Violation>),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("quadratic program is infeasible: {0}")]
    Infeasible(InfeasibleChain),

    #[error("pair constraints with positive gaps form a cycle through variables {0:?}")]
    Cycle(Vec<usize>),

    #[error("solver stopped after {iterations} iterations (primal {primal:.3e}, stationarity {stationarity:.3e})")]
    MaxIterations {
        iterations: usize,
        primal: f64,
        stationarity: f64,
    },

    #[error("brute-force oracle supports at most {max} variables, got {n}")]
    DimensionTooLarge { n: usize, max: usize },

    #[error("reviewer {0} does not give a total ranking within a quantization bin")]
    NotTotalRanking(String),

    #[error("ranked groups are inconsistent with the rankings of reviewer {reviewer}: {reason}")]
    GroupsInconsistent { reviewer: String, reason: String },

    #[error("closed form needs an equal number of reviews per paper (found {min} and {max})")]
    UnequalReviewCounts { min: usize, max: usize },

    #[error("validation data has no strictly ordered score pair")]
    DegenerateValidation,

    #[error("every truth pair is tied")]
    AllTied,

    #[error("empty input")]
    Empty,

    #[error("could not repair duplicate assignment pairs after {0} attempts")]
    RetryExhausted(usize),

    #[error("paper {paper} has {found} reviews, {required} required")]
    InsufficientReviews {
        paper: String,
        found: usize,
        required: usize,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("trial {trial} ({point}): {source}")]
    Trial {
        trial: usize,
        point: String,
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// The underlying error of a failed experiment trial, or `self`.
    pub fn root(&self) -> &Error {
        match self {
            Error::Trial { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
