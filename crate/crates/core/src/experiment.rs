//! Repeated-trial comparison of the dequantizer against the baselines over
//! a one-parameter sweep, on synthetic or conference-style data.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    bre_adjusted_scores, groups_from_rankings, groups_from_raw_scores, partial_rankings_adjusted_scores,
    quantized_baseline,
};
use crate::dequantizer::{dequantize_detailed, DequantizerConfig, Lambda, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::io::{prepare_conference_style, read_raw_scores};
use crate::metrics::{
    kendall_tau_error_with, l2_error, project_to_original_scale, tie_fraction, trial_statistics,
    TrialStatistics, TIE_TOLERANCE,
};
use crate::model::ReviewDataset;
use crate::qp::SolverSettings;
use crate::synth::{generate, trial_seed, SynthConfig};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Proposed,
    Quantized,
    BreAdjusted,
    PartialRankingsAdjusted,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Proposed,
        Method::Quantized,
        Method::BreAdjusted,
        Method::PartialRankingsAdjusted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Quantized => "quantized",
            Method::BreAdjusted => "bre_adjusted",
            Method::PartialRankingsAdjusted => "partial_rankings_adjusted",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Kendall,
    L2,
    Ties,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::Kendall, MetricKind::L2, MetricKind::Ties];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Kendall => "kendall",
            MetricKind::L2 => "l2",
            MetricKind::Ties => "ties",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Sigma,
    PapersPerReviewer,
    ReviewsPerPaper,
    Lambda,
    Epsilon,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Sigma => "sigma",
            SweepParameter::PapersPerReviewer => "papers_per_reviewer",
            SweepParameter::ReviewsPerPaper => "reviews_per_paper",
            SweepParameter::Lambda => "lambda",
            SweepParameter::Epsilon => "epsilon",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            SweepParameter::Sigma,
            SweepParameter::PapersPerReviewer,
            SweepParameter::ReviewsPerPaper,
            SweepParameter::Lambda,
            SweepParameter::Epsilon,
        ]
        .into_iter()
        .find(|p| p.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DataSource {
    Synthetic(SynthConfig),
    /// Raw `paper_id,score` file, rebuilt on a fresh random assignment in
    /// every trial.
    Conference {
        raw_path: PathBuf,
        reviews_per_paper: usize,
        papers_per_reviewer: usize,
    },
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub methods: Vec<Method>,
    pub sweep: Option<Sweep>,
    pub trials: usize,
    pub source: DataSource,
    pub metrics: Vec<MetricKind>,
    pub lambda: Lambda,
    pub epsilon: f64,
    pub solver: SolverSettings,
    /// Trial `t` uses data seed `trial_seed(seed, t)` at every sweep point.
    pub seed: u64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            sweep: None,
            trials: 20,
            source: DataSource::Synthetic(SynthConfig::default()),
            metrics: MetricKind::ALL.to_vec(),
            lambda: Lambda::Auto,
            epsilon: DEFAULT_EPSILON,
            solver: SolverSettings::default(),
            seed: 0,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.methods.is_empty() || self.metrics.is_empty() {
            return bad("at least one method and one metric are required".into());
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return bad("sweep has no values".into());
            }
            for &v in &sweep.values {
                let ok = match sweep.parameter {
                    SweepParameter::Sigma => v >= 0.0 && v.is_finite(),
                    SweepParameter::PapersPerReviewer | SweepParameter::ReviewsPerPaper => {
                        v >= 1.0 && v.fract() == 0.0
                    }
                    SweepParameter::Lambda => v > 0.0 && v.is_finite(),
                    SweepParameter::Epsilon => v > 0.0 && v < 1.0,
                };
                if !ok {
                    return bad(format!("invalid {} value {v}", sweep.parameter.name()));
                }
            }
            let synthetic_only = matches!(
                sweep.parameter,
                SweepParameter::Sigma | SweepParameter::ReviewsPerPaper
            );
            if synthetic_only && matches!(self.source, DataSource::Conference { .. }) {
                return bad(format!(
                    "{} cannot be swept on conference data",
                    sweep.parameter.name()
                ));
            }
        }
        DequantizerConfig {
            lambda: self.lambda,
            epsilon: self.epsilon,
            solver: self.solver,
        }
        .validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub source: DataSource,
    pub sweep: Option<Sweep>,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub metrics: Vec<MetricKind>,
    /// `"auto"`, `"consensus_only"` or the fixed value.
    pub lambda: String,
    pub epsilon: f64,
    pub feasibility_tolerance: f64,
    pub optimality_tolerance: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    #[serde(flatten)]
    pub stats: TrialStatistics,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub kendall: Option<MetricSummary>,
    pub l2: Option<MetricSummary>,
    pub ties: Option<MetricSummary>,
    /// λ chosen in each trial when selected automatically.
    pub selected_lambdas: Vec<f64>,
}

impl MethodResult {
    pub fn metric(&self, kind: MetricKind) -> Option<&MetricSummary> {
        match kind {
            MetricKind::Kendall => self.kendall.as_ref(),
            MetricKind::L2 => self.l2.as_ref(),
            MetricKind::Ties => self.ties.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: Option<f64>,
    pub results: Vec<MethodResult>,
}

impl SweepPoint {
    pub fn method(&self, method: Method) -> Option<&MethodResult> {
        self.results.iter().find(|r| r.method == method)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub report_version: u32,
    pub header: ReportHeader,
    pub points: Vec<SweepPoint>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `"auto"`, `"consensus_only"` or the fixed value, as in report headers.
pub fn lambda_label(lambda: Lambda) -> String {
    match lambda {
        Lambda::Auto => "auto".into(),
        Lambda::ConsensusOnly => "consensus_only".into(),
        Lambda::Fixed(v) => v.to_string(),
    }
}

struct TrialData {
    dataset: ReviewDataset,
    truth: Vec<f64>,
    /// Conference data: compare ℓ2 on the original integer scale.
    project_l2: bool,
}

#[derive(Default)]
struct TrialOutcome {
    kendall: Vec<f64>,
    l2: Vec<f64>,
    ties: Vec<f64>,
    lambda: Option<f64>,
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let raw = match &spec.source {
        DataSource::Conference { raw_path, .. } => Some(read_raw_scores(raw_path)?),
        DataSource::Synthetic(_) => None,
    };
    let values: Vec<Option<f64>> = match &spec.sweep {
        Some(s) => s.values.iter().copied().map(Some).collect(),
        None => vec![None],
    };

    let mut points = Vec::with_capacity(values.len());
    for value in values {
        let point_label = match (&spec.sweep, value) {
            (Some(s), Some(v)) => format!("{} = {v}", s.parameter.name()),
            _ => "base".to_string(),
        };
        let outcomes: Vec<Vec<TrialOutcome>> = (0..spec.trials)
            .into_par_iter()
            .map(|t| {
                run_trial(spec, raw.as_ref(), value, t).map_err(|e| Error::Trial {
                    trial: t,
                    point: point_label.clone(),
                    source: Box::new(e),
                })
            })
            .collect::<Result<_>>()?;

        let mut results = Vec::with_capacity(spec.methods.len());
        for (m, &method) in spec.methods.iter().enumerate() {
            let gather = |f: fn(&TrialOutcome) -> &Vec<f64>| -> Vec<f64> {
                outcomes.iter().flat_map(|o| f(&o[m]).iter().copied()).collect()
            };
            let summary = |kind: MetricKind, vals: Vec<f64>| -> Result<Option<MetricSummary>> {
                if !spec.metrics.contains(&kind) {
                    return Ok(None);
                }
                Ok(Some(MetricSummary {
                    stats: trial_statistics(&vals)?,
                    values: vals,
                }))
            };
            results.push(MethodResult {
                method,
                kendall: summary(MetricKind::Kendall, gather(|o| &o.kendall))?,
                l2: summary(MetricKind::L2, gather(|o| &o.l2))?,
                ties: summary(MetricKind::Ties, gather(|o| &o.ties))?,
                selected_lambdas: outcomes.iter().filter_map(|o| o[m].lambda).collect(),
            });
        }
        points.push(SweepPoint { value, results });
    }

    Ok(ExperimentReport {
        report_version: REPORT_VERSION,
        header: ReportHeader {
            source: spec.source.clone(),
            sweep: spec.sweep.clone(),
            trials: spec.trials,
            methods: spec.methods.clone(),
            metrics: spec.metrics.clone(),
            lambda: lambda_label(spec.lambda),
            epsilon: spec.epsilon,
            feasibility_tolerance: spec.solver.feasibility_tolerance,
            optimality_tolerance: spec.solver.optimality_tolerance,
            seed: spec.seed,
        },
        points,
    })
}

fn trial_data(
    spec: &ExperimentSpec,
    raw: Option<&std::collections::BTreeMap<String, Vec<f64>>>,
    value: Option<f64>,
    seed: u64,
) -> Result<TrialData> {
    let param = spec.sweep.as_ref().map(|s| s.parameter);
    match &spec.source {
        DataSource::Synthetic(base) => {
            let mut cfg = SynthConfig { seed, ..*base };
            if let (Some(p), Some(v)) = (param, value) {
                match p {
                    SweepParameter::Sigma => cfg.sigma = v,
                    SweepParameter::PapersPerReviewer => cfg.papers_per_reviewer = v as usize,
                    SweepParameter::ReviewsPerPaper => cfg.reviews_per_paper = v as usize,
                    SweepParameter::Lambda | SweepParameter::Epsilon => {}
                }
            }
            let inst = generate(&cfg)?;
            Ok(TrialData {
                dataset: inst.dataset,
                truth: inst.truth_y,
                project_l2: false,
            })
        }
        DataSource::Conference {
            reviews_per_paper,
            papers_per_reviewer,
            ..
        } => {
            let mut load = *papers_per_reviewer;
            if let (Some(SweepParameter::PapersPerReviewer), Some(v)) = (param, value) {
                load = v as usize;
            }
            let inst = prepare_conference_style(raw.expect("read above"), *reviews_per_paper, load, seed)?;
            Ok(TrialData {
                dataset: inst.dataset,
                truth: inst.truth_y,
                project_l2: true,
            })
        }
    }
}

fn run_trial(
    spec: &ExperimentSpec,
    raw: Option<&std::collections::BTreeMap<String, Vec<f64>>>,
    value: Option<f64>,
    trial: usize,
) -> Result<Vec<TrialOutcome>> {
    let data = trial_data(spec, raw, value, trial_seed(spec.seed, trial as u64))?;
    let param = spec.sweep.as_ref().map(|s| s.parameter);
    let mut lambda = spec.lambda;
    let mut epsilon = spec.epsilon;
    match (param, value) {
        (Some(SweepParameter::Lambda), Some(v)) => lambda = Lambda::Fixed(v),
        (Some(SweepParameter::Epsilon), Some(v)) => epsilon = v,
        _ => {}
    }

    let mut out = Vec::with_capacity(spec.methods.len());
    for &method in &spec.methods {
        let mut outcome = TrialOutcome::default();
        let estimate = match method {
            Method::Proposed => {
                let cfg = DequantizerConfig {
                    lambda,
                    epsilon,
                    solver: spec.solver,
                };
                let d = dequantize_detailed(&data.dataset, &cfg, None)?;
                if lambda == Lambda::Auto {
                    outcome.lambda = Some(d.lambda);
                }
                d.scores.into_values()
            }
            Method::Quantized => quantized_baseline(&data.dataset).into_values(),
            // Exact truth ties (clipping, repeated raw scores) leave some
            // rankings non-total; the grouped variant treats them as ties.
            Method::BreAdjusted => match bre_adjusted_scores(&data.dataset, epsilon) {
                Err(Error::NotTotalRanking(_)) => {
                    let groups = groups_from_rankings(&data.dataset)?;
                    partial_rankings_adjusted_scores(&data.dataset, epsilon, &groups)?
                }
                other => other?,
            }
            .into_values(),
            Method::PartialRankingsAdjusted => {
                let groups = groups_from_raw_scores(data.dataset.assignment(), &data.truth);
                partial_rankings_adjusted_scores(&data.dataset, epsilon, &groups)?.into_values()
            }
        };
        if spec.metrics.contains(&MetricKind::Kendall) {
            outcome
                .kendall
                .push(kendall_tau_error_with(&data.truth, &estimate, 0.0, TIE_TOLERANCE)?);
        }
        if spec.metrics.contains(&MetricKind::L2) {
            let l2 = if data.project_l2 {
                let projected: Vec<f64> = estimate
                    .iter()
                    .map(|&v| project_to_original_scale(v) as f64)
                    .collect();
                l2_error(&data.truth, &projected)?
            } else {
                l2_error(&data.truth, &estimate)?
            };
            outcome.l2.push(l2);
        }
        if spec.metrics.contains(&MetricKind::Ties) {
            outcome.ties.push(tie_fraction(&estimate, TIE_TOLERANCE));
        }
        out.push(outcome);
    }
    Ok(out)
}

/// Plain-text table: one row per sweep point and method, mean ± standard
/// error for each metric.
pub fn format_table(report: &ExperimentReport) -> String {
    let param = report
        .header
        .sweep
        .as_ref()
        .map_or("point", |s| s.parameter.name());
    let metrics = &report.header.metrics;
    let mut s = String::new();
    let _ = write!(s, "{param:>20} {:>26}", "method");
    for m in metrics {
        let _ = write!(s, " {:>22}", m.name());
    }
    s.push('\n');
    for point in &report.points {
        let label = point.value.map_or("-".to_string(), |v| v.to_string());
        for r in &point.results {
            let _ = write!(s, "{label:>20} {:>26}", r.method.name());
            for &m in metrics {
                match r.metric(m) {
                    Some(ms) => {
                        let cell = format!("{:.4} ± {:.4}", ms.stats.mean, ms.stats.standard_error);
                        let _ = write!(s, " {cell:>22}");
                    }
                    None => {
                        let _ = write!(s, " {:>22}", "-");
                    }
                }
            }
            s.push('\n');
        }
    }
    s
}

/// One row per (point, method, metric) for external plotting.
pub fn write_sweep_csv<W: Write>(report: &ExperimentReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["parameter", "value", "method", "metric", "mean", "standard_error", "trials"])
        .map_err(io)?;
    let param = report
        .header
        .sweep
        .as_ref()
        .map_or("", |s| s.parameter.name());
    for point in &report.points {
        for r in &point.results {
            for &m in &report.header.metrics {
                if let Some(ms) = r.metric(m) {
                    w.write_record([
                        param.to_string(),
                        point.value.map_or(String::new(), |v| v.to_string()),
                        r.method.name().to_string(),
                        m.name().to_string(),
                        ms.stats.mean.to_string(),
                        ms.stats.standard_error.to_string(),
                        ms.stats.trials.to_string(),
                    ])
                    .map_err(io)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}
