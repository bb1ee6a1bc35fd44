use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dequant_core::baselines::{
    bre_adjusted_scores, groups_from_rankings, partial_rankings_adjusted_scores,
    quantized_baseline, score_only_closed_form,
};
use dequant_core::dequantizer::{dequantize_detailed, DequantizerConfig, Lambda, DEFAULT_EPSILON};
use dequant_core::experiment::{
    format_table, lambda_label, run_experiment, write_sweep_csv, DataSource, ExperimentSpec, Method,
    MetricKind, Sweep, SweepParameter,
};
use dequant_core::io::{load_reviews, write_dataset, write_scores, write_scores_to, write_truth};
use dequant_core::model::{DequantizedScores, ReviewDataset, ScoreScale};
use dequant_core::qp::SolverSettings;
use dequant_core::qv::{select_lambda, QVConfig, QVReport};
use dequant_core::synth::{generate, SynthConfig};
use dequant_core::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "dequant", version, about = "Dequantize reviewer scores using partial rankings")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Minimum gap enforced between ranked papers.
    #[arg(long, global = true, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,

    /// Fit weight: a positive number, `auto` (quantization validation) or
    /// `consensus` (fit term dropped).
    #[arg(long, global = true, default_value = "auto", value_parser = parse_lambda)]
    lambda: Lambda,

    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Feasibility tolerance of the solver.
    #[arg(long, global = true, default_value_t = 1e-6)]
    feastol: f64,

    /// Output file (directory for `simulate`). Defaults to stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Input {
    /// `reviewer_id,paper_id,score` file.
    #[arg(long)]
    reviews: PathBuf,

    /// `reviewer_id,better_paper_id,worse_paper_id` file.
    #[arg(long)]
    rankings: Option<PathBuf>,

    /// Lowest score of the scale; inferred from the data when omitted.
    #[arg(long, requires = "scale_max")]
    scale_min: Option<i64>,

    #[arg(long, requires = "scale_min")]
    scale_max: Option<i64>,
}

#[derive(Debug, Args)]
struct Synthetic {
    #[arg(long, default_value_t = 60)]
    papers: usize,

    #[arg(long, default_value_t = 0.5)]
    sigma: f64,

    #[arg(long, default_value_t = 4)]
    reviews_per_paper: usize,

    #[arg(long, default_value_t = 4)]
    papers_per_reviewer: usize,
}

impl Synthetic {
    fn config(&self, seed: u64) -> SynthConfig {
        SynthConfig {
            num_papers: self.papers,
            sigma: self.sigma,
            reviews_per_paper: self.reviews_per_paper,
            papers_per_reviewer: self.papers_per_reviewer,
            seed,
            ..SynthConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BaselineKind {
    Quantized,
    BreAdjusted,
    PartialRankingsAdjusted,
    /// Scores-only closed form; needs a numeric --lambda.
    ClosedForm,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dequantize a reviews file and write one row per review.
    Dequantize {
        #[command(flatten)]
        input: Input,

        /// Also write a JSON report with the selected λ and solver details.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Generate a synthetic dataset: reviews.csv, rankings.csv, truth.csv.
    Simulate {
        #[command(flatten)]
        synthetic: Synthetic,
    },
    /// Repeated trials comparing the dequantizer with the baselines.
    Experiment {
        #[command(flatten)]
        synthetic: Synthetic,

        /// Raw `paper_id,score` conference file instead of synthetic data.
        #[arg(long)]
        raw_scores: Option<PathBuf>,

        /// Sweep as `parameter=v1,v2,...` (sigma, papers_per_reviewer,
        /// reviews_per_paper, lambda, epsilon).
        #[arg(long, value_parser = parse_sweep)]
        sweep: Option<Sweep>,

        #[arg(long, default_value_t = 20)]
        trials: usize,

        #[arg(long, value_delimiter = ',', value_parser = parse_method,
              default_value = "proposed,quantized,bre_adjusted,partial_rankings_adjusted")]
        methods: Vec<Method>,

        #[arg(long, value_delimiter = ',', value_parser = parse_metric, default_value = "kendall,l2,ties")]
        metrics: Vec<MetricKind>,

        /// Also write one CSV row per point, method and metric.
        #[arg(long)]
        sweep_csv: Option<PathBuf>,
    },
    /// Run quantization validation and report the error of every λ.
    Qv {
        #[command(flatten)]
        input: Input,
    },
    /// Compute a baseline instead of the dequantizer.
    Baseline {
        #[command(flatten)]
        input: Input,

        #[arg(long, value_enum)]
        method: BaselineKind,
    },
    /// Check a dataset and list every violation.
    Validate {
        #[command(flatten)]
        input: Input,
    },
}

fn parse_lambda(s: &str) -> Result<Lambda, String> {
    match s.to_ascii_lowercase().as_str() {
        "auto" => Ok(Lambda::Auto),
        "consensus" | "consensus_only" => Ok(Lambda::ConsensusOnly),
        other => match other.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(Lambda::Fixed(v)),
            _ => Err(format!("expected a positive number, `auto` or `consensus`, got {s:?}")),
        },
    }
}

fn parse_sweep(s: &str) -> Result<Sweep, String> {
    let (name, values) = s
        .split_once('=')
        .ok_or_else(|| format!("expected parameter=v1,v2,..., got {s:?}"))?;
    let parameter = SweepParameter::parse(name.trim())
        .ok_or_else(|| format!("unknown sweep parameter {name:?}"))?;
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad sweep value {v:?}")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Sweep { parameter, values })
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| format!("unknown method {s:?}"))
}

fn parse_metric(s: &str) -> Result<MetricKind, String> {
    MetricKind::parse(s).ok_or_else(|| format!("unknown metric {s:?}"))
}

/// Flag values echoed into every JSON report.
#[derive(Debug, Serialize)]
struct Header {
    command: &'static str,
    reviews: Option<PathBuf>,
    rankings: Option<PathBuf>,
    lambda: String,
    epsilon: f64,
    feasibility_tolerance: f64,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct DequantizeReport {
    report_version: u32,
    header: Header,
    lambda: f64,
    objective: f64,
    iterations: usize,
    quantization_validation: Option<QVReport>,
}

#[derive(Debug, Serialize)]
struct QvOutput {
    report_version: u32,
    header: Header,
    #[serde(flatten)]
    report: QVReport,
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::InvalidInput(_) | Error::DimensionTooLarge { .. } => EXIT_USAGE,
        Error::Infeasible(_)
        | Error::Cycle(_)
        | Error::MaxIterations { .. }
        | Error::DegenerateValidation
        | Error::RetryExhausted(_) => EXIT_SOLVER,
        _ => EXIT_VALIDATION,
    }
}

fn report_error(e: &Error) {
    eprintln!("error: {e}");
    if let Error::Validation(violations) = e.root() {
        for v in violations {
            eprintln!("  {v}");
        }
    }
}

fn load(input: &Input) -> Result<ReviewDataset, Failure> {
    let scale = match (input.scale_min, input.scale_max) {
        (Some(lo), Some(hi)) => Some(ScoreScale::new(lo, hi)?),
        _ => None,
    };
    Ok(load_reviews(&input.reviews, input.rankings.as_deref(), scale)?)
}

fn header(cli: &Cli, command: &'static str, input: Option<&Input>) -> Header {
    Header {
        command,
        reviews: input.map(|i| i.reviews.clone()),
        rankings: input.and_then(|i| i.rankings.clone()),
        lambda: lambda_label(cli.lambda),
        epsilon: cli.epsilon,
        feasibility_tolerance: cli.feastol,
        seed: cli.seed,
    }
}

fn deq_config(cli: &Cli) -> DequantizerConfig {
    DequantizerConfig {
        lambda: cli.lambda,
        epsilon: cli.epsilon,
        solver: SolverSettings {
            feasibility_tolerance: cli.feastol,
            ..SolverSettings::default()
        },
    }
}

fn emit_scores(cli: &Cli, scores: &DequantizedScores, ds: &ReviewDataset) -> Result<(), Failure> {
    match &cli.output {
        Some(path) => write_scores(scores, ds, path)?,
        None => write_scores_to(scores, ds, io::stdout().lock())?,
    }
    Ok(())
}

fn emit_text(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let config = deq_config(cli);
    config.validate()?;
    match &cli.command {
        Command::Dequantize { input, report } => {
            let ds = load(input)?;
            let out = dequantize_detailed(&ds, &config, None)?;
            emit_scores(cli, &out.scores, &ds)?;
            if let Some(path) = report {
                let doc = DequantizeReport {
                    report_version: 1,
                    header: header(cli, "dequantize", Some(input)),
                    lambda: out.lambda,
                    objective: out.solution.objective_value,
                    iterations: out.solution.iterations,
                    quantization_validation: out.selection,
                };
                fs::write(path, serde_json::to_string_pretty(&doc).map_err(Error::from)?)?;
            }
            eprintln!("lambda = {}", out.lambda);
        }
        Command::Simulate { synthetic } => {
            let dir = cli
                .output
                .as_ref()
                .ok_or_else(|| Failure::Usage("simulate needs --output DIR".into()))?;
            fs::create_dir_all(dir)?;
            let inst = generate(&synthetic.config(cli.seed))?;
            let ds = &inst.dataset;
            write_dataset(ds, &dir.join("reviews.csv"), &dir.join("rankings.csv"))?;
            write_truth(ds, &inst.truth_y, &dir.join("truth.csv"))?;
            let pairs: usize = ds.rankings().iter().map(|r| r.ordered_pairs.len()).sum();
            eprintln!(
                "wrote {} reviews by {} reviewers and {pairs} ranking pairs to {}",
                ds.len(),
                ds.assignment().reviewers().len(),
                dir.display()
            );
        }
        Command::Experiment {
            synthetic,
            raw_scores,
            sweep,
            trials,
            methods,
            metrics,
            sweep_csv,
        } => {
            let source = match raw_scores {
                Some(path) => DataSource::Conference {
                    raw_path: path.clone(),
                    reviews_per_paper: synthetic.reviews_per_paper,
                    papers_per_reviewer: synthetic.papers_per_reviewer,
                },
                None => DataSource::Synthetic(synthetic.config(cli.seed)),
            };
            let spec = ExperimentSpec {
                methods: methods.clone(),
                sweep: sweep.clone(),
                trials: *trials,
                source,
                metrics: metrics.clone(),
                lambda: cli.lambda,
                epsilon: cli.epsilon,
                solver: config.solver,
                seed: cli.seed,
            };
            let report = run_experiment(&spec)?;
            print!("{}", format_table(&report));
            if let Some(path) = &cli.output {
                fs::write(path, report.to_json()?)?;
            }
            if let Some(path) = sweep_csv {
                write_sweep_csv(&report, fs::File::create(path)?)?;
            }
        }
        Command::Qv { input } => {
            let ds = load(input)?;
            let report = select_lambda(&ds, &QVConfig::default(), &config)?;
            let mut text = String::from("lambda,validation_error\n");
            for (l, err) in report.candidates.iter().zip(&report.errors) {
                text.push_str(&format!("{l},{err}\n"));
            }
            eprintln!("selected lambda = {}", report.selected_lambda);
            match &cli.output {
                Some(path) => {
                    let doc = QvOutput {
                        report_version: 1,
                        header: header(cli, "qv", Some(input)),
                        report,
                    };
                    fs::write(path, serde_json::to_string_pretty(&doc).map_err(Error::from)?)?;
                }
                None => emit_text(None, &text)?,
            }
        }
        Command::Baseline { input, method } => {
            let ds = load(input)?;
            let scores = match method {
                BaselineKind::Quantized => quantized_baseline(&ds),
                BaselineKind::BreAdjusted => bre_adjusted_scores(&ds, cli.epsilon)?,
                BaselineKind::PartialRankingsAdjusted => {
                    let groups = groups_from_rankings(&ds)?;
                    partial_rankings_adjusted_scores(&ds, cli.epsilon, &groups)?
                }
                BaselineKind::ClosedForm => match cli.lambda {
                    Lambda::Fixed(l) => score_only_closed_form(&ds, l)?,
                    _ => return Err(Failure::Usage("closed-form needs a numeric --lambda".into())),
                },
            };
            emit_scores(cli, &scores, &ds)?;
        }
        Command::Validate { input } => {
            // Loading runs the full check and reports every violation.
            let ds = load(input)?;
            let pairs: usize = ds.rankings().iter().map(|r| r.ordered_pairs.len()).sum();
            println!(
                "ok: {} reviews, {} reviewers, {} papers, {pairs} ranking pairs",
                ds.len(),
                ds.assignment().reviewers().len(),
                ds.assignment().papers().len()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Core(e)) => {
            report_error(&e);
            ExitCode::from(exit_code(&e))
        }
    }
}
