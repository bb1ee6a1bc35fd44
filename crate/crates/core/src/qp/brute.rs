//! Exhaustive test oracle for tiny problems: lattice search over the boxes,
//! zooming down to the requested grid step, then an exact refinement that
//! enumerates every combination of near-active constraints and keeps the
//! KKT points. Shares no code with the ADMM path.

use super::feasibility::tighten;
use super::{Multipliers, QPProblem, Residuals, Solution};
use crate::error::{Error, Result};

pub const BRUTE_FORCE_MAX_DIM: usize = 6;

const LATTICE_BUDGET: usize = 120_000;
const ENUMERATION_BUDGET: usize = 400_000;
const KKT_TOL: f64 = 1e-9;

/// Minimizes `problem` by exhaustive search. Only for `n ≤ 6` and finite
/// boxes; `iterations` in the result counts objective evaluations.
pub fn brute_force_minimize(problem: &QPProblem, grid_step: f64) -> Result<Solution> {
    problem.validate()?;
    let n = problem.n();
    if n > BRUTE_FORCE_MAX_DIM {
        return Err(Error::DimensionTooLarge {
            n,
            max: BRUTE_FORCE_MAX_DIM,
        });
    }
    if !(grid_step > 0.0) {
        return Err(Error::InvalidInput("grid step must be positive".into()));
    }
    if problem
        .lower
        .iter()
        .chain(&problem.upper)
        .any(|v| !v.is_finite())
    {
        return Err(Error::InvalidInput("brute force needs finite boxes".into()));
    }
    let t = tighten(problem)?;
    if (0..n).any(|i| t.lower[i] > t.upper[i] + 1e-9) {
        return Err(Error::Infeasible(crate::error::InfeasibleChain {
            chain: Vec::new(),
            required_span: f64::NAN,
            available_span: f64::NAN,
        }));
    }

    let mut evals = 0usize;
    let feasible = |y: &[f64]| problem.max_violation(y) <= 1e-12;

    // The propagated lower corner is always feasible.
    let mut best = t.lower.clone();
    let mut best_f = problem.objective(&best);
    for corner in [t.upper.clone()] {
        if feasible(&corner) {
            let f = problem.objective(&corner);
            if f < best_f {
                best_f = f;
                best = corner;
            }
        }
    }

    // Coarse lattice over the whole (tightened) box.
    let per_dim = points_per_dim(n);
    let mut lo: Vec<f64> = t.lower.clone();
    let mut step: Vec<f64> = (0..n)
        .map(|i| {
            let width = t.upper[i] - t.lower[i];
            if width <= 0.0 {
                0.0
            } else {
                (width / (per_dim - 1) as f64).max(grid_step.min(width))
            }
        })
        .collect();
    let mut counts: Vec<usize> = (0..n)
        .map(|i| {
            if step[i] == 0.0 {
                1
            } else {
                ((t.upper[i] - t.lower[i]) / step[i]).floor() as usize + 1
            }
        })
        .collect();
    scan(problem, &lo, &step, &counts, &mut best, &mut best_f, &mut evals);

    // Zoom around the incumbent until the lattice is as fine as requested.
    let half = (per_dim - 1) / 2;
    while step.iter().any(|&s| s > grid_step) {
        for i in 0..n {
            let radius = 2.0 * step[i];
            let new_step = (radius / half as f64).max(grid_step);
            let from = (best[i] - radius).max(t.lower[i]);
            let to = (best[i] + radius).min(t.upper[i]);
            lo[i] = from;
            step[i] = if to > from { new_step } else { 0.0 };
            counts[i] = if step[i] == 0.0 {
                1
            } else {
                ((to - from) / new_step).floor() as usize + 1
            };
        }
        scan(problem, &lo, &step, &counts, &mut best, &mut best_f, &mut evals);
        if step.iter().all(|&s| s <= grid_step) {
            break;
        }
    }

    let mut result = Solution {
        objective_value: best_f,
        residuals: Residuals {
            primal_infeasibility: problem.max_violation(&best),
            stationarity: f64::NAN,
        },
        values: best.clone(),
        iterations: evals,
        multipliers: Multipliers::default(),
    };
    if let Some((y, mult, f)) = refine(problem, &best, grid_step) {
        if f <= best_f + 1e-12 {
            result.values = y;
            result.objective_value = f;
            result.residuals = Residuals {
                primal_infeasibility: problem.max_violation(&result.values),
                stationarity: super::stationarity_residual(problem, &result.values, &mult),
            };
            result.multipliers = mult;
        }
    }
    Ok(result)
}

fn points_per_dim(n: usize) -> usize {
    let mut k = (LATTICE_BUDGET as f64).powf(1.0 / n.max(1) as f64).floor() as usize;
    k = k.clamp(5, 2001);
    if k.is_multiple_of(2) {
        k -= 1;
    }
    k
}

fn scan(
    problem: &QPProblem,
    lo: &[f64],
    step: &[f64],
    counts: &[usize],
    best: &mut [f64],
    best_f: &mut f64,
    evals: &mut usize,
) {
    let n = lo.len();
    let mut idx = vec![0usize; n];
    let mut y: Vec<f64> = lo.to_vec();
    loop {
        if problem.max_violation(&y) <= 1e-12 {
            let f = problem.objective(&y);
            *evals += 1;
            if f < *best_f {
                *best_f = f;
                best.copy_from_slice(&y);
            }
        }
        // odometer
        let mut d = 0;
        loop {
            if d == n {
                return;
            }
            idx[d] += 1;
            if idx[d] < counts[d] {
                y[d] = lo[d] + idx[d] as f64 * step[d];
                break;
            }
            idx[d] = 0;
            y[d] = lo[d];
            d += 1;
        }
    }
}

#[derive(Clone, Copy)]
enum Hold {
    Free,
    Lower,
    Upper,
}

/// Enumerates held-constraint combinations near `near` and returns the best
/// point satisfying every KKT condition.
fn refine(problem: &QPProblem, near: &[f64], grid_step: f64) -> Option<(Vec<f64>, Multipliers, f64)> {
    let n = problem.n();
    let mut radius = (100.0 * grid_step).max(0.05);
    loop {
        let box_options: Vec<Vec<Hold>> = (0..n)
            .map(|i| {
                let mut o = vec![Hold::Free];
                if near[i] - problem.lower[i] <= radius {
                    o.push(Hold::Lower);
                }
                if problem.upper[i] - near[i] <= radius {
                    o.push(Hold::Upper);
                }
                o
            })
            .collect();
        let near_pairs: Vec<usize> = problem
            .pairs
            .iter()
            .enumerate()
            .filter(|(_, pc)| near[pc.upper] - near[pc.lower] - pc.gap <= radius)
            .map(|(k, _)| k)
            .collect();
        let combos = box_options.iter().map(Vec::len).product::<usize>()
            * (1usize << near_pairs.len().min(40));
        if combos > ENUMERATION_BUDGET && radius > 10.0 * grid_step {
            radius /= 2.0;
            continue;
        }
        return enumerate(problem, &box_options, &near_pairs);
    }
}

fn enumerate(
    problem: &QPProblem,
    box_options: &[Vec<Hold>],
    near_pairs: &[usize],
) -> Option<(Vec<f64>, Multipliers, f64)> {
    let n = problem.n();
    let mut choice = vec![0usize; n];
    let mut best: Option<(Vec<f64>, Multipliers, f64)> = None;
    loop {
        let holds: Vec<Hold> = (0..n).map(|i| box_options[i][choice[i]]).collect();
        for mask in 0u64..(1u64 << near_pairs.len()) {
            let held: Vec<usize> = near_pairs
                .iter()
                .enumerate()
                .filter(|(b, _)| mask & (1 << b) != 0)
                .map(|(_, &k)| k)
                .collect();
            if let Some((y, mult)) = kkt_point(problem, &holds, &held) {
                let f = problem.objective(&y);
                if best.as_ref().is_none_or(|b| f < b.2) {
                    best = Some((y, mult, f));
                }
            }
        }
        let mut d = 0;
        loop {
            if d == n {
                return best;
            }
            choice[d] += 1;
            if choice[d] < box_options[d].len() {
                break;
            }
            choice[d] = 0;
            d += 1;
        }
    }
}

/// Solves the full KKT system with the given constraints held as
/// equalities; returns the point only if it is feasible and every
/// multiplier is nonnegative.
fn kkt_point(problem: &QPProblem, holds: &[Hold], held_pairs: &[usize]) -> Option<(Vec<f64>, Multipliers)> {
    let n = problem.n();
    // Constraint normals and right-hand sides, in "g(y) ≥ 0" orientation.
    let mut normals: Vec<(Vec<f64>, f64)> = Vec::new();
    for (i, h) in holds.iter().enumerate() {
        let mut a = vec![0.0; n];
        match h {
            Hold::Free => continue,
            Hold::Lower => {
                a[i] = 1.0;
                normals.push((a, problem.lower[i]));
            }
            Hold::Upper => {
                a[i] = -1.0;
                normals.push((a, -problem.upper[i]));
            }
        }
    }
    for &k in held_pairs {
        let pc = problem.pairs[k];
        let mut a = vec![0.0; n];
        a[pc.upper] = 1.0;
        a[pc.lower] = -1.0;
        normals.push((a, pc.gap));
    }
    let k = normals.len();
    let dim = n + k;
    // [Q  −Aᵀ] [y]   [−c]
    // [A   0 ] [ν] = [ b]
    let mut mat = vec![vec![0.0; dim]; dim];
    let mut rhs = vec![0.0; dim];
    for i in 0..n {
        for &(j, v) in problem.quadratic.row(i) {
            mat[i][j] = v;
        }
        rhs[i] = -problem.linear[i];
    }
    for (r, (a, b)) in normals.iter().enumerate() {
        for j in 0..n {
            mat[i_of(n, r)][j] = a[j];
            mat[j][i_of(n, r)] = -a[j];
        }
        rhs[i_of(n, r)] = *b;
    }
    let sol = gauss_solve(mat, rhs)?;
    let y = sol[..n].to_vec();
    if problem.max_violation(&y) > KKT_TOL {
        return None;
    }
    let mut mult = Multipliers {
        lower: vec![0.0; n],
        upper: vec![0.0; n],
        pairs: vec![0.0; problem.pairs.len()],
    };
    let mut r = 0;
    for (i, h) in holds.iter().enumerate() {
        match h {
            Hold::Free => continue,
            Hold::Lower => mult.lower[i] = sol[n + r],
            Hold::Upper => mult.upper[i] = sol[n + r],
        }
        r += 1;
    }
    for &kk in held_pairs {
        mult.pairs[kk] = sol[n + r];
        r += 1;
    }
    let negative = mult
        .lower
        .iter()
        .chain(&mult.upper)
        .chain(&mult.pairs)
        .any(|&v| v < -KKT_TOL);
    if negative {
        return None;
    }
    Some((y, mult))
}

fn i_of(n: usize, r: usize) -> usize {
    n + r
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(1.0);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}
