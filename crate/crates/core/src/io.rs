//! CSV reading and writing, and preparation of conference-style raw score
//! files.
//!
//! Formats (UTF-8, header row required):
//!
//! * reviews: `reviewer_id,paper_id,score`
//! * rankings: `reviewer_id,better_paper_id,worse_paper_id`
//! * output: `reviewer_id,paper_id,quantized_score,dequantized_score,percentile`
//! * raw conference scores: `paper_id,score`

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::metrics::percentiles;
use crate::model::{
    derive_rankings_from_raw_scores, validate, Assignment, DequantizedScores, PartialRanking,
    ReviewDataset, ScoreScale,
};
use crate::synth::regular_bipartite_edges;

#[derive(Debug, Deserialize)]
struct ReviewRow {
    reviewer_id: String,
    paper_id: String,
    score: String,
}

#[derive(Debug, Deserialize)]
struct RankingRow {
    reviewer_id: String,
    better_paper_id: String,
    worse_paper_id: String,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    paper_id: String,
    score: String,
}

fn parse_error(path: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

/// Deserializes every row, tagging each with its 1-based line number.
fn read_rows<T: for<'de> Deserialize<'de>, R: Read>(reader: R, path: &str) -> Result<Vec<(usize, T)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.deserialize::<T>() {
        match rec {
            Ok(row) => out.push((out.len() + 2, row)),
            Err(e) => {
                let line = e.position().map_or(out.len() + 2, |p| p.line() as usize);
                return Err(parse_error(path, line, e.to_string()));
            }
        }
    }
    Ok(out)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

/// Reads a reviews file and an optional rankings file, then validates the
/// result. Without `scale`, the score range spans the smallest and largest
/// score in the file.
pub fn load_reviews(
    reviews: &Path,
    rankings: Option<&Path>,
    scale: Option<ScoreScale>,
) -> Result<ReviewDataset> {
    let rankings_data = match rankings {
        Some(p) => Some((open(p)?, p.display().to_string())),
        None => None,
    };
    load_reviews_from(
        open(reviews)?,
        &reviews.display().to_string(),
        rankings_data.as_ref().map(|(f, name)| (f, name.as_str())),
        scale,
    )
}

/// [`load_reviews`] over arbitrary readers; `name`s appear in errors.
pub fn load_reviews_from<R: Read, S: Read>(
    reviews: R,
    reviews_name: &str,
    rankings: Option<(S, &str)>,
    scale: Option<ScoreScale>,
) -> Result<ReviewDataset> {
    let rows: Vec<(usize, ReviewRow)> = read_rows(reviews, reviews_name)?;
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    let mut records = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        if row.reviewer_id.is_empty() || row.paper_id.is_empty() {
            return Err(parse_error(reviews_name, line, "empty reviewer or paper id"));
        }
        let score: i64 = row
            .score
            .parse()
            .map_err(|_| parse_error(reviews_name, line, format!("score {:?} is not an integer", row.score)))?;
        let key = (row.reviewer_id.clone(), row.paper_id.clone());
        if let Some(first) = seen.insert(key, line) {
            return Err(parse_error(
                reviews_name,
                line,
                format!(
                    "duplicate review of {} by {} (first on line {first})",
                    row.paper_id, row.reviewer_id
                ),
            ));
        }
        records.push((row.reviewer_id, row.paper_id, score));
    }
    if records.is_empty() {
        return Err(parse_error(reviews_name, 1, "no reviews"));
    }

    let mut by_reviewer: BTreeMap<String, PartialRanking> = BTreeMap::new();
    if let Some((reader, name)) = rankings {
        let rows: Vec<(usize, RankingRow)> = read_rows(reader, name)?;
        for (line, row) in rows {
            if row.reviewer_id.is_empty() || row.better_paper_id.is_empty() || row.worse_paper_id.is_empty() {
                return Err(parse_error(name, line, "empty id"));
            }
            by_reviewer
                .entry(row.reviewer_id.clone())
                .or_insert_with(|| PartialRanking::new(row.reviewer_id.clone()))
                .ordered_pairs
                .push((row.better_paper_id, row.worse_paper_id));
        }
    }

    let scale = match scale {
        Some(s) => s,
        None => ScoreScale::spanning(records.iter().map(|r| r.2)).expect("nonempty"),
    };
    let dataset = ReviewDataset::from_records(scale, records, by_reviewer.into_values().collect())?;
    validate(&dataset).map_err(Error::Validation)?;
    Ok(dataset)
}

/// Writes one row per review, sorted by paper id and then by dequantized
/// score (highest first, reviewer id breaking ties). Floats use the
/// shortest representation that reads back to the same value.
pub fn write_scores(scores: &DequantizedScores, dataset: &ReviewDataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_scores_to(scores, dataset, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_scores_to<W: Write>(scores: &DequantizedScores, dataset: &ReviewDataset, out: W) -> Result<()> {
    if scores.values().len() != dataset.len() || scores.assignment().reviews() != dataset.assignment().reviews() {
        return Err(Error::InvalidInput("scores do not belong to this dataset".into()));
    }
    let values = scores.values();
    let pct = percentiles(values);
    let asg = dataset.assignment();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        asg.paper_id(a)
            .cmp(asg.paper_id(b))
            .then(values[b].total_cmp(&values[a]))
            .then(asg.reviewer_id(a).cmp(asg.reviewer_id(b)))
    });
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["reviewer_id", "paper_id", "quantized_score", "dequantized_score", "percentile"])
        .map_err(csv_io)?;
    for i in order {
        w.write_record([
            asg.reviewer_id(i).to_string(),
            asg.paper_id(i).to_string(),
            dataset.scores()[i].to_string(),
            values[i].to_string(),
            pct[i].to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a dataset in the reviews and rankings formats, in assignment
/// order, so [`load_reviews`] reads it back unchanged.
pub fn write_dataset(dataset: &ReviewDataset, reviews: &Path, rankings: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(reviews)?);
    write_reviews_to(dataset, &mut w)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(rankings)?);
    write_rankings_to(dataset, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_reviews_to<W: Write>(dataset: &ReviewDataset, out: W) -> Result<()> {
    let asg = dataset.assignment();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["reviewer_id", "paper_id", "score"]).map_err(csv_io)?;
    for (i, z) in dataset.scores().iter().enumerate() {
        w.write_record([asg.reviewer_id(i), asg.paper_id(i), &z.to_string()])
            .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rankings_to<W: Write>(dataset: &ReviewDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["reviewer_id", "better_paper_id", "worse_paper_id"])
        .map_err(csv_io)?;
    for ranking in dataset.rankings() {
        for (better, worse) in &ranking.ordered_pairs {
            w.write_record([&ranking.reviewer, better, worse]).map_err(csv_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `reviewer_id,paper_id,truth` rows in assignment order.
pub fn write_truth(dataset: &ReviewDataset, truth: &[f64], path: &Path) -> Result<()> {
    if truth.len() != dataset.len() {
        return Err(Error::InvalidInput("truth does not cover the assignment".into()));
    }
    let asg = dataset.assignment();
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["reviewer_id", "paper_id", "truth"]).map_err(csv_io)?;
    for (i, y) in truth.iter().enumerate() {
        w.write_record([asg.reviewer_id(i), asg.paper_id(i), &y.to_string()])
            .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Reads back the dequantized column of a file written by [`write_scores`]
/// as `(reviewer_id, paper_id, value)`.
pub fn read_scores(path: &Path) -> Result<Vec<(String, String, f64)>> {
    #[derive(Deserialize)]
    struct Row {
        reviewer_id: String,
        paper_id: String,
        dequantized_score: f64,
    }
    let name = path.display().to_string();
    let rows: Vec<(usize, Row)> = read_rows(open(path)?, &name)?;
    Ok(rows
        .into_iter()
        .map(|(_, r)| (r.reviewer_id, r.paper_id, r.dequantized_score))
        .collect())
}

/// Conference data rebuilt on a synthetic assignment, with the retained
/// raw scores as evaluation truth.
#[derive(Debug, Clone)]
pub struct ConferenceInstance {
    pub dataset: ReviewDataset,
    /// Raw score of every review, aligned with the assignment.
    pub truth_y: Vec<f64>,
    /// Papers removed so the review count divides evenly among reviewers.
    pub dropped_papers: Vec<String>,
}

/// Raw conference scores grouped by paper, in file order within a paper.
pub fn read_raw_scores(path: &Path) -> Result<BTreeMap<String, Vec<f64>>> {
    read_raw_scores_from(open(path)?, &path.display().to_string())
}

pub fn read_raw_scores_from<R: Read>(reader: R, name: &str) -> Result<BTreeMap<String, Vec<f64>>> {
    let rows: Vec<(usize, RawRow)> = read_rows(reader, name)?;
    let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (line, row) in rows {
        let y: f64 = row
            .score
            .parse()
            .map_err(|_| parse_error(name, line, format!("score {:?} is not a number", row.score)))?;
        if !(1.0..=10.0).contains(&y) {
            return Err(parse_error(name, line, format!("score {y} outside [1, 10]")));
        }
        if row.paper_id.is_empty() {
            return Err(parse_error(name, line, "empty paper id"));
        }
        out.entry(row.paper_id).or_default().push(y);
    }
    Ok(out)
}

/// Rebuilds a dequantization problem from raw 1–10 conference scores:
///
/// 1. keep `reviews_per_paper` reviews of every paper, chosen uniformly at
///    random (order within the paper preserved);
/// 2. if the total review count is not a multiple of
///    `papers_per_reviewer`, drop the fewest papers (chosen at random) that
///    make it one;
/// 3. draw a random regular assignment of anonymous reviewers
///    (`r001`, …) and give the retained reviews of each paper to its
///    reviewers in order;
/// 4. quantize by `z = ⌈y/2⌉` on the scale 1–5 and derive every reviewer's
///    ranking from the raw scores.
///
/// All randomness comes from one ChaCha20 stream seeded with `seed`, used
/// in the order above.
pub fn prepare_conference_style(
    raw: &BTreeMap<String, Vec<f64>>,
    reviews_per_paper: usize,
    papers_per_reviewer: usize,
    seed: u64,
) -> Result<ConferenceInstance> {
    if reviews_per_paper == 0 || papers_per_reviewer == 0 {
        return Err(Error::InvalidInput("loads must be positive".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut retained: Vec<(String, Vec<f64>)> = Vec::with_capacity(raw.len());
    for (paper, ys) in raw {
        if ys.len() < reviews_per_paper {
            return Err(Error::InsufficientReviews {
                paper: paper.clone(),
                found: ys.len(),
                required: reviews_per_paper,
            });
        }
        let mut keep = sample(&mut rng, ys.len(), reviews_per_paper).into_vec();
        keep.sort_unstable();
        retained.push((paper.clone(), keep.into_iter().map(|k| ys[k]).collect()));
    }

    let mut drop = 0;
    while drop < retained.len() && !((retained.len() - drop) * reviews_per_paper).is_multiple_of(papers_per_reviewer) {
        drop += 1;
    }
    let dropped: HashSet<usize> = if drop > 0 {
        sample(&mut rng, retained.len(), drop).into_iter().collect()
    } else {
        HashSet::new()
    };
    let mut dropped_papers = Vec::new();
    let mut papers = Vec::new();
    for (k, entry) in retained.into_iter().enumerate() {
        if dropped.contains(&k) {
            dropped_papers.push(entry.0);
        } else {
            papers.push(entry);
        }
    }
    if papers.is_empty() {
        return Err(Error::InvalidInput("no papers left after preprocessing".into()));
    }

    let num_papers = papers.len();
    let num_reviewers = num_papers * reviews_per_paper / papers_per_reviewer;
    let edges = regular_bipartite_edges(num_papers, num_reviewers, papers_per_reviewer, reviews_per_paper, &mut rng)?;
    let rid = crate::synth::sequential_ids("r", num_reviewers);
    let mut reviewers_of: Vec<Vec<usize>> = vec![Vec::new(); num_papers];
    for &(r, p) in &edges {
        reviewers_of[p].push(r);
    }
    let assignment = Assignment::from_pairs(
        edges.iter().map(|&(r, p)| (rid[r].clone(), papers[p].0.clone())),
    )?;
    let mut truth_y = vec![0.0; assignment.len()];
    for (p, reviewers) in reviewers_of.iter().enumerate() {
        for (k, &r) in reviewers.iter().enumerate() {
            let i = assignment
                .position(&rid[r], &papers[p].0)
                .expect("edge is in the assignment");
            truth_y[i] = papers[p].1[k];
        }
    }
    let scores: Vec<i64> = truth_y.iter().map(|&y| quantize_real(y)).collect();
    let rankings = derive_rankings_from_raw_scores(&assignment, &truth_y);
    let dataset = ReviewDataset::new(ScoreScale::new(1, 5)?, Arc::new(assignment), scores, rankings)?;
    validate(&dataset).map_err(Error::Validation)?;
    Ok(ConferenceInstance {
        dataset,
        truth_y,
        dropped_papers,
    })
}

/// `⌈y/2⌉` for real `y`.
fn quantize_real(y: f64) -> i64 {
    (y / 2.0).ceil() as i64
}

/// [`prepare_conference_style`] reading the raw scores from `path`.
pub fn prepare_iclr_style(
    raw_path: &Path,
    reviews_per_paper: usize,
    papers_per_reviewer: usize,
    seed: u64,
) -> Result<ConferenceInstance> {
    let raw = read_raw_scores(raw_path)?;
    prepare_conference_style(&raw, reviews_per_paper, papers_per_reviewer, seed)
}
