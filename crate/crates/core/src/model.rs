//! Reviewers, papers, assignments, quantized scores and partial rankings.
//!
//! Reviewer and paper ids are opaque strings. Dense indices follow the
//! lexicographic order of the ids, and reviews (the optimization variables)
//! are ordered by `(reviewer index, paper index)`, so matrix layouts are
//! reproducible across runs.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer score interval `[lower, upper]` reviewers report on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreScale {
    pub lower: i64,
    pub upper: i64,
}

impl ScoreScale {
    pub fn new(lower: i64, upper: i64) -> Result<Self> {
        if lower >= upper {
            return Err(Error::InvalidInput(format!(
                "score scale needs lower < upper, got [{lower}, {upper}]"
            )));
        }
        Ok(Self { lower, upper })
    }

    /// Smallest scale containing every score, at least one step wide.
    pub fn spanning(scores: impl IntoIterator<Item = i64>) -> Option<Self> {
        let mut it = scores.into_iter();
        let first = it.next()?;
        let (lo, hi) = it.fold((first, first), |(lo, hi), z| (lo.min(z), hi.max(z)));
        Some(Self {
            lower: lo,
            upper: hi.max(lo + 1),
        })
    }

    pub fn contains(&self, score: i64) -> bool {
        (self.lower..=self.upper).contains(&score)
    }
}

/// One assigned reviewer-paper pair, by dense index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Review {
    pub reviewer: usize,
    pub paper: usize,
}

/// The set of assigned reviewer-paper pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    reviewers: Vec<String>,
    papers: Vec<String>,
    reviews: Vec<Review>,
    lookup: HashMap<Review, usize>,
}

impl Assignment {
    /// Builds an assignment from `(reviewer_id, paper_id)` pairs.
    ///
    /// Duplicate pairs are rejected.
    pub fn from_pairs<I, R, P>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (R, P)>,
        R: Into<String>,
        P: Into<String>,
    {
        let raw: Vec<(String, String)> = pairs
            .into_iter()
            .map(|(r, p)| (r.into(), p.into()))
            .collect();
        let reviewers: Vec<String> = raw
            .iter()
            .map(|(r, _)| r.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let papers: Vec<String> = raw
            .iter()
            .map(|(_, p)| p.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();

        let mut reviews = Vec::with_capacity(raw.len());
        let mut seen = BTreeSet::new();
        for (r, p) in &raw {
            let review = Review {
                reviewer: reviewers.binary_search(r).expect("reviewer id collected"),
                paper: papers.binary_search(p).expect("paper id collected"),
            };
            if !seen.insert(review) {
                return Err(Error::InvalidInput(format!(
                    "duplicate assignment pair ({r}, {p})"
                )));
            }
            reviews.push(review);
        }
        reviews.sort_unstable();
        let lookup = reviews.iter().enumerate().map(|(i, &rv)| (rv, i)).collect();
        Ok(Self {
            reviewers,
            papers,
            reviews,
            lookup,
        })
    }

    pub fn len(&self) -> usize {
        self.reviews.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reviews.is_empty()
    }

    pub fn reviewers(&self) -> &[String] {
        &self.reviewers
    }

    pub fn papers(&self) -> &[String] {
        &self.papers
    }

    /// Reviews in variable order.
    pub fn reviews(&self) -> &[Review] {
        &self.reviews
    }

    pub fn reviewer_index(&self, id: &str) -> Option<usize> {
        self.reviewers.binary_search_by(|r| r.as_str().cmp(id)).ok()
    }

    pub fn paper_index(&self, id: &str) -> Option<usize> {
        self.papers.binary_search_by(|p| p.as_str().cmp(id)).ok()
    }

    /// Variable index of the review `(reviewer, paper)`, if assigned.
    pub fn position(&self, reviewer: &str, paper: &str) -> Option<usize> {
        let review = Review {
            reviewer: self.reviewer_index(reviewer)?,
            paper: self.paper_index(paper)?,
        };
        self.index_of(review)
    }

    pub fn index_of(&self, review: Review) -> Option<usize> {
        self.lookup.get(&review).copied()
    }

    pub fn reviewer_id(&self, variable: usize) -> &str {
        &self.reviewers[self.reviews[variable].reviewer]
    }

    pub fn paper_id(&self, variable: usize) -> &str {
        &self.papers[self.reviews[variable].paper]
    }

    /// Variable indices grouped by paper index.
    pub fn reviews_by_paper(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.papers.len()];
        for (i, rv) in self.reviews.iter().enumerate() {
            out[rv.paper].push(i);
        }
        out
    }

    /// Variable indices grouped by reviewer index.
    pub fn reviews_by_reviewer(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.reviewers.len()];
        for (i, rv) in self.reviews.iter().enumerate() {
            out[rv.reviewer].push(i);
        }
        out
    }
}

/// Strict preferences reported by one reviewer, as `(better, worse)` paper ids.
///
/// Pairs are stored as given; implied pairs are neither added nor removed.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PartialRanking {
    pub reviewer: String,
    pub ordered_pairs: Vec<(String, String)>,
}

impl PartialRanking {
    pub fn new(reviewer: impl Into<String>) -> Self {
        Self {
            reviewer: reviewer.into(),
            ordered_pairs: Vec::new(),
        }
    }

    pub fn with_pair(mut self, better: impl Into<String>, worse: impl Into<String>) -> Self {
        self.ordered_pairs.push((better.into(), worse.into()));
        self
    }
}

/// Quantized scores and partial rankings over an assignment.
#[derive(Debug, Clone)]
pub struct ReviewDataset {
    scale: ScoreScale,
    assignment: Arc<Assignment>,
    scores: Vec<i64>,
    rankings: Vec<PartialRanking>,
}

impl ReviewDataset {
    /// `scores` are aligned with `assignment.reviews()`.
    pub fn new(
        scale: ScoreScale,
        assignment: Arc<Assignment>,
        scores: Vec<i64>,
        rankings: Vec<PartialRanking>,
    ) -> Result<Self> {
        if scores.len() != assignment.len() {
            return Err(Error::InvalidInput(format!(
                "{} scores for {} assigned pairs",
                scores.len(),
                assignment.len()
            )));
        }
        Ok(Self {
            scale,
            assignment,
            scores,
            rankings,
        })
    }

    /// Builds a dataset from `(reviewer_id, paper_id, score)` records.
    pub fn from_records<I, R, P>(
        scale: ScoreScale,
        records: I,
        rankings: Vec<PartialRanking>,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (R, P, i64)>,
        R: Into<String>,
        P: Into<String>,
    {
        let records: Vec<(String, String, i64)> = records
            .into_iter()
            .map(|(r, p, z)| (r.into(), p.into(), z))
            .collect();
        let assignment =
            Assignment::from_pairs(records.iter().map(|(r, p, _)| (r.clone(), p.clone())))?;
        let mut scores = vec![0; assignment.len()];
        for (r, p, z) in &records {
            let idx = assignment.position(r, p).expect("pair was just inserted");
            scores[idx] = *z;
        }
        Self::new(scale, Arc::new(assignment), scores, rankings)
    }

    pub fn scale(&self) -> ScoreScale {
        self.scale
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    pub fn shared_assignment(&self) -> Arc<Assignment> {
        Arc::clone(&self.assignment)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[i64] {
        &self.scores
    }

    pub fn score(&self, reviewer: &str, paper: &str) -> Option<i64> {
        self.assignment
            .position(reviewer, paper)
            .map(|i| self.scores[i])
    }

    pub fn rankings(&self) -> &[PartialRanking] {
        &self.rankings
    }

    /// Same assignment with replaced scores, scale and rankings.
    pub fn with_scores(
        &self,
        scale: ScoreScale,
        scores: Vec<i64>,
        rankings: Vec<PartialRanking>,
    ) -> Result<Self> {
        Self::new(scale, self.shared_assignment(), scores, rankings)
    }

    /// Ranking pairs as `(better variable, worse variable)` indices, in the
    /// order they were reported.
    pub fn ranking_constraints(&self) -> Result<Vec<(usize, usize)>> {
        let mut out = Vec::new();
        for ranking in &self.rankings {
            for (better, worse) in &ranking.ordered_pairs {
                let (Some(i), Some(j)) = (
                    self.assignment.position(&ranking.reviewer, better),
                    self.assignment.position(&ranking.reviewer, worse),
                ) else {
                    return Err(Error::Validation(vec![Violation::unassigned(
                        &ranking.reviewer,
                        better,
                        worse,
                    )]));
                };
                out.push((i, j));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationKind {
    OutOfRange,
    UnassignedPair,
    RankScoreInconsistent,
    RankCycle,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::OutOfRange => "OUT_OF_RANGE",
            Self::UnassignedPair => "UNASSIGNED_PAIR",
            Self::RankScoreInconsistent => "RANK_SCORE_INCONSISTENT",
            Self::RankCycle => "RANK_CYCLE",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub reviewer: String,
    /// Papers involved: one for a score, `(better, worse)` for a ranking
    /// pair, every paper on a cycle for `RankCycle`.
    pub papers: Vec<String>,
    pub detail: String,
}

impl Violation {
    fn unassigned(reviewer: &str, better: &str, worse: &str) -> Self {
        Self {
            kind: ViolationKind::UnassignedPair,
            reviewer: reviewer.to_string(),
            papers: vec![better.to_string(), worse.to_string()],
            detail: "ranking pair refers to a paper without a score from this reviewer".into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} reviewer={} papers=[{}]: {}",
            self.kind,
            self.reviewer,
            self.papers.join(","),
            self.detail
        )
    }
}

/// Checks every dataset invariant and returns all violations found.
pub fn validate(dataset: &ReviewDataset) -> std::result::Result<(), Vec<Violation>> {
    let assignment = dataset.assignment();
    let scale = dataset.scale();
    let mut violations = Vec::new();

    for (i, &z) in dataset.scores().iter().enumerate() {
        if !scale.contains(z) {
            violations.push(Violation {
                kind: ViolationKind::OutOfRange,
                reviewer: assignment.reviewer_id(i).to_string(),
                papers: vec![assignment.paper_id(i).to_string()],
                detail: format!("score {z} outside [{}, {}]", scale.lower, scale.upper),
            });
        }
    }

    // Merge ranking entries per reviewer, keeping first-seen order.
    let mut per_reviewer: BTreeMap<&str, Vec<(&str, &str)>> = BTreeMap::new();
    for ranking in dataset.rankings() {
        per_reviewer
            .entry(ranking.reviewer.as_str())
            .or_default()
            .extend(
                ranking
                    .ordered_pairs
                    .iter()
                    .map(|(b, w)| (b.as_str(), w.as_str())),
            );
    }

    for (reviewer, pairs) in per_reviewer {
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for (better, worse) in pairs {
            let (Some(i), Some(j)) = (
                assignment.position(reviewer, better),
                assignment.position(reviewer, worse),
            ) else {
                violations.push(Violation::unassigned(reviewer, better, worse));
                continue;
            };
            if i == j {
                violations.push(Violation {
                    kind: ViolationKind::RankCycle,
                    reviewer: reviewer.to_string(),
                    papers: vec![better.to_string()],
                    detail: "paper ranked above itself".into(),
                });
                continue;
            }
            let (zi, zj) = (dataset.scores()[i], dataset.scores()[j]);
            if zi < zj {
                violations.push(Violation {
                    kind: ViolationKind::RankScoreInconsistent,
                    reviewer: reviewer.to_string(),
                    papers: vec![better.to_string(), worse.to_string()],
                    detail: format!("ranked above but scored {zi} < {zj}"),
                });
            }
            edges.push((i, j));
        }
        let on_cycle = cyclic_nodes(&edges);
        if !on_cycle.is_empty() {
            violations.push(Violation {
                kind: ViolationKind::RankCycle,
                reviewer: reviewer.to_string(),
                papers: on_cycle
                    .into_iter()
                    .map(|v| assignment.paper_id(v).to_string())
                    .collect(),
                detail: "transitive closure of the ranking is cyclic".into(),
            });
        }
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Nodes that survive peeling sources in both edge directions, i.e. nodes
/// on a cycle or strictly between two cycles. Sorted ascending.
fn cyclic_nodes(edges: &[(usize, usize)]) -> Vec<usize> {
    let nodes: BTreeSet<usize> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    let peel = |forward: bool| -> BTreeSet<usize> {
        let mut indeg: BTreeMap<usize, usize> = nodes.iter().map(|&v| (v, 0)).collect();
        let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &(a, b) in edges {
            let (from, to) = if forward { (a, b) } else { (b, a) };
            adj.entry(from).or_default().push(to);
            *indeg.get_mut(&to).expect("node present") += 1;
        }
        let mut queue: VecDeque<usize> = indeg
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&v, _)| v)
            .collect();
        let mut removed = BTreeSet::new();
        while let Some(v) = queue.pop_front() {
            removed.insert(v);
            for &w in adj.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
                let d = indeg.get_mut(&w).expect("node present");
                *d -= 1;
                if *d == 0 {
                    queue.push_back(w);
                }
            }
        }
        nodes.difference(&removed).copied().collect()
    };
    let fwd = peel(true);
    let bwd = peel(false);
    fwd.intersection(&bwd).copied().collect()
}

/// Rankings implied by real-valued scores: `(p, p')` whenever
/// `raw[p] > raw[p']` for the same reviewer. Ties give no pair.
///
/// `raw` is aligned with `assignment.reviews()`. One ranking per reviewer,
/// possibly empty, in reviewer order.
pub fn derive_rankings_from_raw_scores(assignment: &Assignment, raw: &[f64]) -> Vec<PartialRanking> {
    assert_eq!(raw.len(), assignment.len(), "raw scores must cover the assignment");
    assignment
        .reviews_by_reviewer()
        .into_iter()
        .enumerate()
        .map(|(r, vars)| {
            let mut ranking = PartialRanking::new(assignment.reviewers()[r].clone());
            for &i in &vars {
                for &j in &vars {
                    if raw[i] > raw[j] {
                        ranking.ordered_pairs.push((
                            assignment.paper_id(i).to_string(),
                            assignment.paper_id(j).to_string(),
                        ));
                    }
                }
            }
            ranking
        })
        .collect()
}

/// Real-valued score per assigned review, aligned with the originating
/// assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct DequantizedScores {
    assignment: Arc<Assignment>,
    values: Vec<f64>,
}

impl DequantizedScores {
    pub fn new(assignment: Arc<Assignment>, values: Vec<f64>) -> Result<Self> {
        if values.len() != assignment.len() {
            return Err(Error::InvalidInput(format!(
                "{} values for {} assigned pairs",
                values.len(),
                assignment.len()
            )));
        }
        Ok(Self { assignment, values })
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, reviewer: &str, paper: &str) -> Option<f64> {
        self.assignment
            .position(reviewer, paper)
            .map(|i| self.values[i])
    }

    /// `(reviewer_id, paper_id, value)` in variable order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, f64)> + '_ {
        (0..self.values.len()).map(move |i| {
            (
                self.assignment.reviewer_id(i),
                self.assignment.paper_id(i),
                self.values[i],
            )
        })
    }
}
