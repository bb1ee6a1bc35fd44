//! Synthetic review data from a Thurstone model on a random regular
//! assignment.
//!
//! Randomness comes from ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded with
//! the 64-bit seed, so instances are identical across platforms. Draw
//! order: assignment, then one true score per paper, then one noise draw
//! per review in variable order.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{derive_rankings_from_raw_scores, Assignment, ReviewDataset, ScoreScale};

const REPAIR_ATTEMPTS_PER_EDGE: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_papers: usize,
    pub sigma: f64,
    pub reviews_per_paper: usize,
    pub papers_per_reviewer: usize,
    pub seed: u64,
    pub truth_range: (f64, f64),
    pub clip_range: (f64, f64),
    pub score_range: (i64, i64),
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_papers: 60,
            sigma: 0.5,
            reviews_per_paper: 4,
            papers_per_reviewer: 4,
            seed: 0,
            truth_range: (1.0, 9.0),
            clip_range: (0.0, 10.0),
            score_range: (0, 10),
        }
    }
}

impl SynthConfig {
    pub fn num_reviewers(&self) -> usize {
        self.num_papers * self.reviews_per_paper / self.papers_per_reviewer.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.num_papers == 0 || self.reviews_per_paper == 0 || self.papers_per_reviewer == 0 {
            return bad("paper count and loads must be positive".into());
        }
        if !(self.num_papers * self.reviews_per_paper).is_multiple_of(self.papers_per_reviewer) {
            return bad(format!(
                "{} papers x {} reviews is not divisible by {} papers per reviewer",
                self.num_papers, self.reviews_per_paper, self.papers_per_reviewer
            ));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be nonnegative, got {}", self.sigma));
        }
        if !(self.truth_range.0 <= self.truth_range.1 && self.clip_range.0 <= self.clip_range.1) {
            return bad("empty truth or clip range".into());
        }
        if self.score_range.0 >= self.score_range.1 {
            return bad("score range must have lower < upper".into());
        }
        Ok(())
    }
}

/// A dataset together with the latent values it was generated from.
#[derive(Debug, Clone)]
pub struct SynthInstance {
    pub dataset: ReviewDataset,
    /// Indexed like `dataset.assignment().papers()`.
    pub truth_x_star: Vec<f64>,
    /// Unquantized clipped scores, aligned with the assignment.
    pub truth_y: Vec<f64>,
}

/// Seed of trial `trial` under `master` (SplitMix64 of the pair).
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    let mut x = master ^ trial.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Zero-padded ids `prefix001, prefix002, …` (at least three digits).
pub fn sequential_ids(prefix: &str, count: usize) -> Vec<String> {
    let width = count.to_string().len().max(3);
    (1..=count).map(|k| format!("{prefix}{k:0width$}")).collect()
}

/// Pairs `(reviewer, paper)` where every reviewer has `papers_per_reviewer`
/// distinct papers and every paper `reviews_per_paper` distinct reviewers.
///
/// Reviewer slots are matched to a shuffled list of paper slots; any
/// repeated pair is then removed by swapping papers with a random other
/// edge.
pub fn regular_bipartite_edges<R: Rng + ?Sized>(
    num_papers: usize,
    num_reviewers: usize,
    papers_per_reviewer: usize,
    reviews_per_paper: usize,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    if num_papers * reviews_per_paper != num_reviewers * papers_per_reviewer {
        return Err(Error::InvalidInput(format!(
            "{num_papers} papers x {reviews_per_paper} reviews != {num_reviewers} reviewers x {papers_per_reviewer} papers"
        )));
    }
    if papers_per_reviewer > num_papers || reviews_per_paper > num_reviewers {
        return Err(Error::InvalidInput(
            "loads exceed the number of papers or reviewers".into(),
        ));
    }
    let mut papers: Vec<usize> = (0..num_papers)
        .flat_map(|p| std::iter::repeat_n(p, reviews_per_paper))
        .collect();
    papers.shuffle(rng);
    let reviewers: Vec<usize> = (0..num_reviewers)
        .flat_map(|r| std::iter::repeat_n(r, papers_per_reviewer))
        .collect();
    let mut edges: Vec<(usize, usize)> = reviewers.into_iter().zip(papers).collect();
    let m = edges.len();

    let mut count: HashMap<(usize, usize), usize> = HashMap::with_capacity(m);
    for &e in &edges {
        *count.entry(e).or_insert(0) += 1;
    }
    let mut duplicates: Vec<usize> = (0..m).filter(|&k| count[&edges[k]] > 1).collect();
    let budget = REPAIR_ATTEMPTS_PER_EDGE * m.max(1);
    let mut attempts = 0;
    while let Some(k) = duplicates.pop() {
        while count[&edges[k]] > 1 {
            attempts += 1;
            if attempts > budget {
                return Err(Error::RetryExhausted(budget));
            }
            let other = rng.random_range(0..m);
            let (r1, p1) = edges[k];
            let (r2, p2) = edges[other];
            if r1 == r2 || p1 == p2 {
                continue;
            }
            let free = |e| count.get(&e).copied().unwrap_or(0) == 0;
            if !free((r1, p2)) || !free((r2, p1)) {
                continue;
            }
            for e in [(r1, p1), (r2, p2)] {
                *count.get_mut(&e).expect("counted") -= 1;
            }
            for e in [(r1, p2), (r2, p1)] {
                *count.entry(e).or_insert(0) += 1;
            }
            edges[k] = (r1, p2);
            edges[other] = (r2, p1);
        }
    }
    Ok(edges)
}

pub fn random_regular_assignment(
    num_papers: usize,
    num_reviewers: usize,
    papers_per_reviewer: usize,
    reviews_per_paper: usize,
    seed: u64,
) -> Result<Assignment> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    assignment_with_rng(num_papers, num_reviewers, papers_per_reviewer, reviews_per_paper, &mut rng)
}

fn assignment_with_rng<R: Rng + ?Sized>(
    num_papers: usize,
    num_reviewers: usize,
    papers_per_reviewer: usize,
    reviews_per_paper: usize,
    rng: &mut R,
) -> Result<Assignment> {
    let edges = regular_bipartite_edges(num_papers, num_reviewers, papers_per_reviewer, reviews_per_paper, rng)?;
    let rid = sequential_ids("r", num_reviewers);
    let pid = sequential_ids("p", num_papers);
    Assignment::from_pairs(edges.into_iter().map(|(r, p)| (rid[r].clone(), pid[p].clone())))
}

/// Draws one synthetic instance.
pub fn generate(config: &SynthConfig) -> Result<SynthInstance> {
    config.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let assignment = assignment_with_rng(
        config.num_papers,
        config.num_reviewers(),
        config.papers_per_reviewer,
        config.reviews_per_paper,
        &mut rng,
    )?;
    let (lo, hi) = config.truth_range;
    let x_star: Vec<f64> = (0..config.num_papers)
        .map(|_| if hi > lo { rng.random_range(lo..hi) } else { lo })
        .collect();
    let (clip_lo, clip_hi) = config.clip_range;
    let (z_lo, z_hi) = config.score_range;
    let mut truth_y = Vec::with_capacity(assignment.len());
    let mut scores = Vec::with_capacity(assignment.len());
    for review in assignment.reviews() {
        let noise: f64 = StandardNormal.sample(&mut rng);
        let y = (x_star[review.paper] + config.sigma * noise).clamp(clip_lo, clip_hi);
        truth_y.push(y);
        scores.push(((y + 0.5).floor() as i64).clamp(z_lo, z_hi));
    }
    let rankings = derive_rankings_from_raw_scores(&assignment, &truth_y);
    let dataset = ReviewDataset::new(
        ScoreScale::new(z_lo, z_hi)?,
        Arc::new(assignment),
        scores,
        rankings,
    )?;
    Ok(SynthInstance {
        dataset,
        truth_x_star: x_star,
        truth_y,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;
    use proptest::prelude::*;

    fn degrees(a: &Assignment) -> (Vec<usize>, Vec<usize>) {
        (
            a.reviews_by_reviewer().iter().map(Vec::len).collect(),
            a.reviews_by_paper().iter().map(Vec::len).collect(),
        )
    }

    #[test]
    fn degree_one_is_a_matching() {
        let a = random_regular_assignment(4, 4, 1, 1, 3).unwrap();
        let (r, p) = degrees(&a);
        assert_eq!(r, vec![1; 4]);
        assert_eq!(p, vec![1; 4]);
    }

    #[test]
    fn default_config_has_sixty_reviewers() {
        let cfg = SynthConfig::default();
        assert_eq!(cfg.num_reviewers(), 60);
        let inst = generate(&cfg).unwrap();
        let (r, p) = degrees(inst.dataset.assignment());
        assert_eq!(r, vec![4; 60]);
        assert_eq!(p, vec![4; 60]);
        assert_eq!(inst.dataset.assignment().reviewers()[0], "r001");
        assert!(validate(&inst.dataset).is_ok());
    }

    #[test]
    fn seeds_give_different_assignments() {
        let mut same = 0;
        for s in 0..100u64 {
            let a = random_regular_assignment(60, 60, 4, 4, trial_seed(7, 2 * s)).unwrap();
            let b = random_regular_assignment(60, 60, 4, 4, trial_seed(7, 2 * s + 1)).unwrap();
            if a.reviews() == b.reviews() {
                same += 1;
            }
        }
        assert_eq!(same, 0);
    }

    #[test]
    fn zero_noise_reproduces_truth() {
        let cfg = SynthConfig {
            sigma: 0.0,
            seed: 11,
            ..SynthConfig::default()
        };
        let inst = generate(&cfg).unwrap();
        for (i, review) in inst.dataset.assignment().reviews().iter().enumerate() {
            let x = inst.truth_x_star[review.paper];
            assert_eq!(inst.truth_y[i], x);
            assert_eq!(inst.dataset.scores()[i], (x + 0.5).floor() as i64);
        }
    }

    #[test]
    fn same_seed_same_instance() {
        let cfg = SynthConfig {
            seed: 99,
            ..SynthConfig::default()
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.truth_y, b.truth_y);
        assert_eq!(a.dataset.scores(), b.dataset.scores());
        assert_eq!(a.dataset.rankings(), b.dataset.rankings());
    }

    #[test]
    fn mean_score_is_near_five() {
        let mut means = Vec::new();
        for t in 0..20 {
            let cfg = SynthConfig {
                seed: trial_seed(5, t),
                ..SynthConfig::default()
            };
            let inst = generate(&cfg).unwrap();
            let z = inst.dataset.scores();
            means.push(z.iter().sum::<i64>() as f64 / z.len() as f64);
        }
        let stats = crate::metrics::trial_statistics(&means).unwrap();
        assert!((stats.mean - 5.0).abs() <= 3.0 * stats.standard_error, "{stats:?}");
    }

    #[test]
    fn indivisible_loads_are_rejected() {
        let cfg = SynthConfig {
            num_papers: 5,
            reviews_per_paper: 3,
            papers_per_reviewer: 4,
            ..SynthConfig::default()
        };
        assert!(generate(&cfg).is_err());
    }

    #[test]
    fn dense_assignment_is_repaired() {
        // every reviewer reviews every paper: only one valid assignment
        let a = random_regular_assignment(5, 5, 5, 5, 1).unwrap();
        assert_eq!(a.len(), 25);
    }

    proptest! {
        #[test]
        fn degrees_are_exact(p in 2usize..30, mu in 1usize..5, kappa in 1usize..5, seed: u64) {
            prop_assume!((p * mu) % kappa == 0);
            let r = p * mu / kappa;
            prop_assume!(kappa <= p && mu <= r);
            let a = random_regular_assignment(p, r, kappa, mu, seed).unwrap();
            let (rd, pd) = degrees(&a);
            prop_assert!(rd.iter().all(|&d| d == kappa));
            prop_assert!(pd.iter().all(|&d| d == mu));
        }

        #[test]
        fn generated_data_is_consistent(seed: u64, sigma in 0.0f64..2.0) {
            let cfg = SynthConfig { num_papers: 12, sigma, seed, ..SynthConfig::default() };
            let inst = generate(&cfg).unwrap();
            prop_assert!(validate(&inst.dataset).is_ok());
            let z = inst.dataset.scores();
            for vars in inst.dataset.assignment().reviews_by_reviewer() {
                for &a in &vars {
                    for &b in &vars {
                        if inst.truth_y[a] > inst.truth_y[b] {
                            prop_assert!(z[a] >= z[b]);
                        }
                    }
                }
            }
        }
    }
}
