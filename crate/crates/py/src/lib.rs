//! Python bindings: `import dequant`.
//!
//! Reviews are `(reviewer_id, paper_id, score)` tuples and rankings are
//! `(reviewer_id, better_paper_id, worse_paper_id)` tuples.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use dequant_core::baselines::bre_adjusted_scores;
use dequant_core::dequantizer::{dequantize, DequantizerConfig, Lambda, DEFAULT_EPSILON};
use dequant_core::metrics;
use dequant_core::model::{validate, DequantizedScores, PartialRanking, ReviewDataset, ScoreScale};
use dequant_core::qv::{select_lambda as qv_select, QVConfig};
use dequant_core::synth::{generate, SynthConfig};
use dequant_core::Error;

type Review = (String, String, i64);
type Pair = (String, String, String);
type Scored = (String, String, f64);

fn to_py(e: Error) -> PyErr {
    match e.root() {
        Error::Infeasible(_)
        | Error::Cycle(_)
        | Error::MaxIterations { .. }
        | Error::DegenerateValidation
        | Error::RetryExhausted(_) => PyRuntimeError::new_err(e.to_string()),
        Error::Validation(violations) => {
            let lines: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            PyValueError::new_err(format!("{e}\n{}", lines.join("\n")))
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn dataset(reviews: Vec<Review>, rankings: Vec<Pair>, scale: Option<(i64, i64)>) -> PyResult<ReviewDataset> {
    let scale = match scale {
        Some((lo, hi)) => ScoreScale::new(lo, hi).map_err(to_py)?,
        None => ScoreScale::spanning(reviews.iter().map(|r| r.2))
            .ok_or_else(|| PyValueError::new_err("no reviews"))?,
    };
    let mut by_reviewer: BTreeMap<String, PartialRanking> = BTreeMap::new();
    for (r, better, worse) in rankings {
        by_reviewer
            .entry(r.clone())
            .or_insert_with(|| PartialRanking::new(r))
            .ordered_pairs
            .push((better, worse));
    }
    let ds = ReviewDataset::from_records(scale, reviews, by_reviewer.into_values().collect())
        .map_err(to_py)?;
    validate(&ds).map_err(|v| to_py(Error::Validation(v)))?;
    Ok(ds)
}

fn parse_lambda(value: &Bound<'_, PyAny>) -> PyResult<Lambda> {
    if let Ok(v) = value.extract::<f64>() {
        return Ok(Lambda::Fixed(v));
    }
    match value.extract::<String>()?.to_ascii_lowercase().as_str() {
        "auto" => Ok(Lambda::Auto),
        "consensus" | "consensus_only" => Ok(Lambda::ConsensusOnly),
        other => Err(PyValueError::new_err(format!("unknown lambda {other:?}"))),
    }
}

fn rows(scores: &DequantizedScores) -> Vec<Scored> {
    scores
        .iter()
        .map(|(r, p, v)| (r.to_string(), p.to_string(), v))
        .collect()
}

/// Dequantized score of every review, in (reviewer, paper) order. `lambda_`
/// is a positive number, `"auto"` (the default) or `"consensus"`.
#[pyfunction]
#[pyo3(signature = (reviews, rankings=Vec::new(), lambda_=None, epsilon=DEFAULT_EPSILON, scale=None))]
fn dequantize_scores(
    py: Python<'_>,
    reviews: Vec<Review>,
    rankings: Vec<Pair>,
    lambda_: Option<Bound<'_, PyAny>>,
    epsilon: f64,
    scale: Option<(i64, i64)>,
) -> PyResult<Vec<Scored>> {
    let ds = dataset(reviews, rankings, scale)?;
    let config = DequantizerConfig {
        lambda: match &lambda_ {
            Some(v) => parse_lambda(v)?,
            None => Lambda::Auto,
        },
        epsilon,
        ..DequantizerConfig::default()
    };
    let out = py.detach(|| dequantize(&ds, &config)).map_err(to_py)?;
    Ok(rows(&out))
}

/// `(selected λ, [(λ, validation error), ...])`.
#[pyfunction]
#[pyo3(signature = (reviews, rankings=Vec::new(), epsilon=DEFAULT_EPSILON, scale=None))]
fn select_lambda(
    py: Python<'_>,
    reviews: Vec<Review>,
    rankings: Vec<Pair>,
    epsilon: f64,
    scale: Option<(i64, i64)>,
) -> PyResult<(f64, Vec<(f64, f64)>)> {
    let ds = dataset(reviews, rankings, scale)?;
    let config = DequantizerConfig {
        epsilon,
        ..DequantizerConfig::default()
    };
    let report = py
        .detach(|| qv_select(&ds, &QVConfig::default(), &config))
        .map_err(to_py)?;
    let table = report.candidates.iter().copied().zip(report.errors.iter().copied()).collect();
    Ok((report.selected_lambda, table))
}

#[pyfunction]
#[pyo3(signature = (reviews, rankings, epsilon=DEFAULT_EPSILON, scale=None))]
fn bre_adjusted(
    reviews: Vec<Review>,
    rankings: Vec<Pair>,
    epsilon: f64,
    scale: Option<(i64, i64)>,
) -> PyResult<Vec<Scored>> {
    let ds = dataset(reviews, rankings, scale)?;
    Ok(rows(&bre_adjusted_scores(&ds, epsilon).map_err(to_py)?))
}

/// Synthetic instance as `(reviews, rankings, truth)`.
#[pyfunction]
#[pyo3(signature = (num_papers=60, sigma=0.5, reviews_per_paper=4, papers_per_reviewer=4, seed=0))]
fn simulate(
    num_papers: usize,
    sigma: f64,
    reviews_per_paper: usize,
    papers_per_reviewer: usize,
    seed: u64,
) -> PyResult<(Vec<Review>, Vec<Pair>, Vec<Scored>)> {
    let inst = generate(&SynthConfig {
        num_papers,
        sigma,
        reviews_per_paper,
        papers_per_reviewer,
        seed,
        ..SynthConfig::default()
    })
    .map_err(to_py)?;
    let ds = &inst.dataset;
    let asg = ds.assignment();
    let reviews = (0..ds.len())
        .map(|i| (asg.reviewer_id(i).to_string(), asg.paper_id(i).to_string(), ds.scores()[i]))
        .collect();
    let truth = (0..ds.len())
        .map(|i| (asg.reviewer_id(i).to_string(), asg.paper_id(i).to_string(), inst.truth_y[i]))
        .collect();
    let rankings = ds
        .rankings()
        .iter()
        .flat_map(|r| {
            r.ordered_pairs
                .iter()
                .map(move |(b, w)| (r.reviewer.clone(), b.clone(), w.clone()))
        })
        .collect();
    Ok((reviews, rankings, truth))
}

#[pyfunction]
#[pyo3(signature = (truth, estimate, tie_tolerance=metrics::TIE_TOLERANCE))]
fn kendall_tau_error(truth: Vec<f64>, estimate: Vec<f64>, tie_tolerance: f64) -> PyResult<f64> {
    metrics::kendall_tau_error_with(&truth, &estimate, 0.0, tie_tolerance).map_err(to_py)
}

#[pyfunction]
fn l2_error(truth: Vec<f64>, estimate: Vec<f64>) -> PyResult<f64> {
    metrics::l2_error(&truth, &estimate).map_err(to_py)
}

#[pymodule]
fn dequant(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(dequantize_scores, m)?)?;
    m.add_function(wrap_pyfunction!(select_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(bre_adjusted, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(kendall_tau_error, m)?)?;
    m.add_function(wrap_pyfunction!(l2_error, m)?)?;
    Ok(())
}
