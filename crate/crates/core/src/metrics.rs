//! Error measures between a truth vector and an estimate, both aligned with
//! the same assignment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Estimate differences below this are counted as ties.
pub const TIE_TOLERANCE: f64 = 1e-4;

/// Truth-tie threshold for real values read from files.
pub const LOADED_TRUTH_TIE_TOLERANCE: f64 = 1e-12;

fn same_len(truth: &[f64], estimate: &[f64]) -> Result<()> {
    if truth.len() != estimate.len() {
        return Err(Error::InvalidInput(format!(
            "truth has {} entries, estimate has {}",
            truth.len(),
            estimate.len()
        )));
    }
    Ok(())
}

/// Normalized Kendall-tau error with exact truth ties and the default
/// estimate tie tolerance.
pub fn kendall_tau_error(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    kendall_tau_error_with(truth, estimate, 0.0, TIE_TOLERANCE)
}

/// Fraction of truth-ordered pairs (over all entries, not per reviewer)
/// that the estimate reverses, with estimate ties counting one half.
/// Pairs whose truth differs by at most `truth_tie` are skipped; estimates
/// closer than `estimate_tie` are ties.
pub fn kendall_tau_error_with(
    truth: &[f64],
    estimate: &[f64],
    truth_tie: f64,
    estimate_tie: f64,
) -> Result<f64> {
    same_len(truth, estimate)?;
    let n = truth.len();
    let mut ordered = 0u64;
    let mut penalty2 = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            let dt = truth[i] - truth[j];
            if dt.abs() <= truth_tie {
                continue;
            }
            ordered += 1;
            let de = estimate[i] - estimate[j];
            if de.abs() < estimate_tie {
                penalty2 += 1;
            } else if (dt > 0.0) != (de > 0.0) {
                penalty2 += 2;
            }
        }
    }
    if ordered == 0 {
        return Err(Error::AllTied);
    }
    Ok(penalty2 as f64 / (2 * ordered) as f64)
}

/// O(n log n) Kendall-tau error with exact ties on both sides, by counting
/// inversions with a merge sort.
pub fn kendall_tau_error_exact_ties(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    same_len(truth, estimate)?;
    let n = truth.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        truth[a]
            .total_cmp(&truth[b])
            .then(estimate[a].total_cmp(&estimate[b]))
    });

    let total = (n as u64) * (n as u64).saturating_sub(1) / 2;
    let truth_ties = count_tied_pairs(idx.iter().map(|&i| truth[i]));
    let joint_ties = {
        let mut t = 0u64;
        let mut run = 0u64;
        for k in 0..n {
            if k > 0 && truth[idx[k]] == truth[idx[k - 1]] && estimate[idx[k]] == estimate[idx[k - 1]] {
                run += 1;
            } else {
                run = 0;
            }
            t += run;
        }
        t
    };
    let mut est_sorted: Vec<f64> = estimate.to_vec();
    est_sorted.sort_by(f64::total_cmp);
    let estimate_ties = count_tied_pairs(est_sorted.into_iter());

    let ordered = total - truth_ties;
    if ordered == 0 {
        return Err(Error::AllTied);
    }
    let mut seq: Vec<f64> = idx.iter().map(|&i| estimate[i]).collect();
    let mut buf = seq.clone();
    let discordant = inversions(&mut seq, &mut buf);
    let tied_only_in_estimate = estimate_ties - joint_ties;
    Ok((2 * discordant + tied_only_in_estimate) as f64 / (2 * ordered) as f64)
}

/// Tied pairs among an already sorted sequence.
fn count_tied_pairs(sorted: impl Iterator<Item = f64>) -> u64 {
    let mut total = 0u64;
    let mut run = 0u64;
    let mut prev: Option<f64> = None;
    for v in sorted {
        if prev == Some(v) {
            run += 1;
        } else {
            run = 0;
        }
        total += run;
        prev = Some(v);
    }
    total
}

/// Pairs `i < j` with `v[i] > v[j]`; sorts `v` in place.
fn inversions(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        inversions(l, bl) + inversions(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            count += (mid - i) as u64;
            buf[k] = v[j];
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    count
}

/// Euclidean distance between the two vectors.
pub fn l2_error(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    same_len(truth, estimate)?;
    Ok(truth
        .iter()
        .zip(estimate)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Maps a score on the halved scale back to the original integer scale:
/// `2ŷ − ½` rounded to the nearest integer, halves rounded up.
pub fn project_to_original_scale(y_hat: f64) -> i64 {
    (2.0 * y_hat).floor() as i64
}

/// Fraction of unordered pairs whose values differ by less than `tolerance`.
pub fn tie_fraction(values: &[f64], tolerance: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0u64;
    let mut j = 0;
    for i in 0..n {
        if j < i + 1 {
            j = i + 1;
        }
        while j < n && sorted[j] - sorted[i] < tolerance {
            j += 1;
        }
        ties += (j - i - 1) as u64;
    }
    ties as f64 / ((n * (n - 1) / 2) as f64)
}

/// Percentile of each value: `(mean rank − ½) / n · 100`, with equal values
/// sharing their mean rank.
pub fn percentiles(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        // 1-based ranks start+1 ..= end
        let mean_rank = (start + 1 + end) as f64 / 2.0;
        for &i in &idx[start..end] {
            out[i] = (mean_rank - 0.5) / n as f64 * 100.0;
        }
        start = end;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialStatistics {
    pub mean: f64,
    /// Sample standard deviation over √n; 0 for a single trial.
    pub standard_error: f64,
    pub trials: usize,
}

pub fn trial_statistics(errors: &[f64]) -> Result<TrialStatistics> {
    let n = errors.len();
    if n == 0 {
        return Err(Error::Empty);
    }
    let mean = errors.iter().sum::<f64>() / n as f64;
    let standard_error = if n == 1 {
        0.0
    } else {
        let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    };
    Ok(TrialStatistics {
        mean,
        standard_error,
        trials: n,
    })
}
