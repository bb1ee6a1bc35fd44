//! Reference methods: the quantized scores themselves, rank-proportional
//! adjustments within quantization bins (individually or by ranked
//! groups), and the closed form of the scores-only program.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Assignment, DequantizedScores, ReviewDataset};

/// Papers of one reviewer sharing a quantized score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizationBin {
    pub reviewer: String,
    pub score: i64,
    pub members: Vec<String>,
}

/// Papers a reviewer considers mutually tied; `index` 0 is the best group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedGroup {
    pub index: usize,
    pub members: Vec<String>,
}

/// A reviewer's papers split into totally ordered groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewerGroups {
    pub reviewer: String,
    pub groups: Vec<RankedGroup>,
}

pub fn quantized_baseline(dataset: &ReviewDataset) -> DequantizedScores {
    let values = dataset.scores().iter().map(|&z| z as f64).collect();
    DequantizedScores::new(dataset.shared_assignment(), values).expect("aligned with assignment")
}

/// Quantization bins of every reviewer, members in paper-id order.
pub fn quantization_bins(dataset: &ReviewDataset) -> Vec<QuantizationBin> {
    let asg = dataset.assignment();
    let mut out = Vec::new();
    for vars in asg.reviews_by_reviewer() {
        let mut bins: BTreeMap<i64, Vec<String>> = BTreeMap::new();
        for &i in &vars {
            bins.entry(dataset.scores()[i])
                .or_default()
                .push(asg.paper_id(i).to_string());
        }
        for (score, members) in bins.into_iter().rev() {
            out.push(QuantizationBin {
                reviewer: asg.reviewer_id(vars[0]).to_string(),
                score,
                members,
            });
        }
    }
    out
}

/// `reach[a][b]`: variable `a` is ranked above `b` (transitively) by the
/// reviewer owning both. Indexed locally over `vars`.
fn reviewer_closure(vars: &[usize], pairs: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let local: HashMap<usize, usize> = vars.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let m = vars.len();
    let mut reach = vec![vec![false; m]; m];
    for &(a, b) in pairs {
        if let (Some(&i), Some(&j)) = (local.get(&a), local.get(&b)) {
            reach[i][j] = true;
        }
    }
    for k in 0..m {
        for i in 0..m {
            if reach[i][k] {
                for j in 0..m {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    reach
}

fn pairs_by_reviewer(dataset: &ReviewDataset) -> Result<Vec<Vec<(usize, usize)>>> {
    let asg = dataset.assignment();
    let mut out = vec![Vec::new(); asg.reviewers().len()];
    for (a, b) in dataset.ranking_constraints()? {
        out[asg.reviews()[a].reviewer].push((a, b));
    }
    Ok(out)
}

/// Within each bin of `m` papers ranked `p_1 ≻ … ≻ p_m`, shifts the score
/// of the paper ranked `k`-th from the top by `ε((m+1)/2 − k)`, so every
/// bin keeps its mean.
///
/// Needs each reviewer's rankings (with transitivity) to order every pair
/// of papers in a bin.
pub fn bre_adjusted_scores(dataset: &ReviewDataset, epsilon: f64) -> Result<DequantizedScores> {
    let asg = dataset.assignment();
    let z = dataset.scores();
    let mut values: Vec<f64> = z.iter().map(|&v| v as f64).collect();
    let pairs = pairs_by_reviewer(dataset)?;
    for (r, vars) in asg.reviews_by_reviewer().into_iter().enumerate() {
        let reach = reviewer_closure(&vars, &pairs[r]);
        for a in 0..vars.len() {
            let (mut above, mut below) = (0i64, 0i64);
            for b in 0..vars.len() {
                if a == b || z[vars[a]] != z[vars[b]] {
                    continue;
                }
                match (reach[a][b], reach[b][a]) {
                    (true, false) => below += 1,
                    (false, true) => above += 1,
                    _ => return Err(Error::NotTotalRanking(asg.reviewers()[r].clone())),
                }
            }
            values[vars[a]] += epsilon / 2.0 * (below - above) as f64;
        }
    }
    DequantizedScores::new(dataset.shared_assignment(), values)
}

/// Like [`bre_adjusted_scores`] but moving whole groups: within a bin whose
/// papers fall into more than one group, each paper is raised by `ε` times
/// the number of the bin's groups below its own, then the bin is shifted
/// back to its original mean.
pub fn partial_rankings_adjusted_scores(
    dataset: &ReviewDataset,
    epsilon: f64,
    groups: &[ReviewerGroups],
) -> Result<DequantizedScores> {
    let asg = dataset.assignment();
    let z = dataset.scores();
    let group_of = group_lookup(dataset, groups)?;
    let mut values: Vec<f64> = z.iter().map(|&v| v as f64).collect();
    for vars in asg.reviews_by_reviewer() {
        let mut bins: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for &i in &vars {
            bins.entry(z[i]).or_default().push(i);
        }
        for members in bins.values() {
            let mut levels: Vec<usize> = members.iter().map(|&i| group_of[i]).collect();
            levels.sort_unstable();
            levels.dedup();
            if levels.len() < 2 {
                continue;
            }
            let offsets: Vec<f64> = members
                .iter()
                .map(|&i| {
                    let below = levels.iter().filter(|&&g| g > group_of[i]).count();
                    epsilon * below as f64
                })
                .collect();
            let mean = offsets.iter().sum::<f64>() / offsets.len() as f64;
            for (&i, off) in members.iter().zip(&offsets) {
                values[i] += off - mean;
            }
        }
    }
    DequantizedScores::new(dataset.shared_assignment(), values)
}

/// Group index of every variable, after checking that the groups cover
/// each reviewer's papers exactly once and respect every ranking pair.
fn group_lookup(dataset: &ReviewDataset, groups: &[ReviewerGroups]) -> Result<Vec<usize>> {
    let asg = dataset.assignment();
    let mut group_of = vec![usize::MAX; dataset.len()];
    let inconsistent = |reviewer: &str, reason: String| Error::GroupsInconsistent {
        reviewer: reviewer.to_string(),
        reason,
    };
    for rg in groups {
        for g in &rg.groups {
            for paper in &g.members {
                let i = asg.position(&rg.reviewer, paper).ok_or_else(|| {
                    inconsistent(&rg.reviewer, format!("paper {paper} is not assigned"))
                })?;
                if group_of[i] != usize::MAX {
                    return Err(inconsistent(&rg.reviewer, format!("paper {paper} is in two groups")));
                }
                group_of[i] = g.index;
            }
        }
    }
    if let Some(i) = group_of.iter().position(|&g| g == usize::MAX) {
        return Err(inconsistent(
            asg.reviewer_id(i),
            format!("paper {} is in no group", asg.paper_id(i)),
        ));
    }
    for (a, b) in dataset.ranking_constraints()? {
        if group_of[a] >= group_of[b] {
            return Err(inconsistent(
                asg.reviewer_id(a),
                format!(
                    "ranking {} > {} disagrees with the group order",
                    asg.paper_id(a),
                    asg.paper_id(b)
                ),
            ));
        }
    }
    Ok(group_of)
}

/// Groups from real-valued scores: the level sets of each reviewer's raw
/// values, best first.
pub fn groups_from_raw_scores(assignment: &Assignment, raw: &[f64]) -> Vec<ReviewerGroups> {
    assignment
        .reviews_by_reviewer()
        .into_iter()
        .enumerate()
        .map(|(r, vars)| {
            let mut sorted = vars.clone();
            sorted.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]));
            let mut groups: Vec<RankedGroup> = Vec::new();
            let mut last = None;
            for i in sorted {
                if last != Some(raw[i]) {
                    groups.push(RankedGroup {
                        index: groups.len(),
                        members: Vec::new(),
                    });
                    last = Some(raw[i]);
                }
                groups
                    .last_mut()
                    .expect("pushed above")
                    .members
                    .push(assignment.paper_id(i).to_string());
            }
            ReviewerGroups {
                reviewer: assignment.reviewers()[r].clone(),
                groups,
            }
        })
        .collect()
}

/// Groups implied by the rankings together with strict score differences.
/// Papers are grouped when neither is above the other; this only works
/// when "neither above" is transitive, otherwise `GroupsInconsistent`.
pub fn groups_from_rankings(dataset: &ReviewDataset) -> Result<Vec<ReviewerGroups>> {
    let asg = dataset.assignment();
    let z = dataset.scores();
    let mut pairs = pairs_by_reviewer(dataset)?;
    let mut out = Vec::new();
    for (r, vars) in asg.reviews_by_reviewer().into_iter().enumerate() {
        for &a in &vars {
            for &b in &vars {
                if z[a] > z[b] {
                    pairs[r].push((a, b));
                }
            }
        }
        let reach = reviewer_closure(&vars, &pairs[r]);
        let m = vars.len();
        let above: Vec<usize> = (0..m).map(|a| (0..m).filter(|&b| reach[b][a]).count()).collect();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&a| (above[a], asg.paper_id(vars[a]).to_string()));
        let mut groups: Vec<RankedGroup> = Vec::new();
        let mut prev: Option<usize> = None;
        for &a in &order {
            let same = prev.is_some_and(|p| !reach[p][a] && !reach[a][p]);
            if !same {
                groups.push(RankedGroup {
                    index: groups.len(),
                    members: Vec::new(),
                });
            }
            groups
                .last_mut()
                .expect("pushed above")
                .members
                .push(asg.paper_id(vars[a]).to_string());
            prev = Some(a);
        }
        // Every pair across groups must be ordered, every pair inside unordered.
        let gi: HashMap<&str, usize> = groups
            .iter()
            .flat_map(|g| g.members.iter().map(move |p| (p.as_str(), g.index)))
            .collect();
        for a in 0..m {
            for b in 0..m {
                let (ga, gb) = (gi[asg.paper_id(vars[a])], gi[asg.paper_id(vars[b])]);
                let ok = if ga < gb {
                    reach[a][b]
                } else if ga == gb {
                    !reach[a][b]
                } else {
                    true
                };
                if !ok {
                    return Err(Error::GroupsInconsistent {
                        reviewer: asg.reviewers()[r].clone(),
                        reason: format!(
                            "papers {} and {} are not ordered consistently with a group ranking",
                            asg.paper_id(vars[a]),
                            asg.paper_id(vars[b])
                        ),
                    });
                }
            }
        }
        out.push(ReviewerGroups {
            reviewer: asg.reviewers()[r].clone(),
            groups,
        });
    }
    Ok(out)
}

/// Closed-form solution of the scores-only program when every paper has
/// the same number of reviews μ:
/// `ỹ_rp = (1+μλ)/(μ(1+λ))·z_rp + Σ_{r'≠r} z_r'p/(μ(1+λ))`,
/// clipped to `[z_rp − ½, z_rp + ½]`. Rankings are ignored.
pub fn score_only_closed_form(dataset: &ReviewDataset, lambda: f64) -> Result<DequantizedScores> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    let z = dataset.scores();
    let by_paper = dataset.assignment().reviews_by_paper();
    let counts: Vec<usize> = by_paper.iter().map(Vec::len).filter(|&c| c > 0).collect();
    let (min, max) = (
        counts.iter().copied().min().unwrap_or(0),
        counts.iter().copied().max().unwrap_or(0),
    );
    if min != max {
        return Err(Error::UnequalReviewCounts { min, max });
    }
    let mu = max as f64;
    // own weight is 1 − (μ−1)·other, so ỹ = z + other·Σ_{r'≠r}(z_r' − z)
    let other = 1.0 / (mu * (1.0 + lambda));
    let mut values = vec![0.0; z.len()];
    for reviews in &by_paper {
        for &i in reviews {
            let zi = z[i] as f64;
            let spread: f64 = reviews.iter().map(|&j| (z[j] - z[i]) as f64).sum();
            let raw = zi + other * spread;
            values[i] = raw.clamp(zi - 0.5, zi + 0.5);
        }
    }
    DequantizedScores::new(dataset.shared_assignment(), values)
}
