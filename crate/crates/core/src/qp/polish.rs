//! Active-set polish: solve the equality-constrained QP on a guessed active
//! set, then move constraints in or out until every KKT condition holds.

use std::collections::HashSet;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{stationarity_residual, Multipliers, QPProblem};

const MAX_ROUNDS: usize = 30;
const ACTIVE_SLACK: f64 = 1e-9;

/// Constraint index, `(free slot, coefficient)` terms, right-hand side.
type EqualityRow = (usize, Vec<(usize, f64)>, f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum BoxState {
    Free,
    AtLower,
    AtUpper,
}

/// Iterate in the ADMM convention: `z` is the projected constraint value
/// and `y` the signed dual of each row (boxes first, then pairs).
pub(super) struct AdmmPoint<'a> {
    pub z: &'a [f64],
    pub y: &'a [f64],
}

pub(super) struct Polished {
    pub values: Vec<f64>,
    pub multipliers: Multipliers,
    pub stationarity: f64,
    pub primal: f64,
}

pub(super) fn polish(
    problem: &QPProblem,
    q_dense: &DMatrix<f64>,
    point: AdmmPoint<'_>,
    optimality_tolerance: f64,
) -> Option<Polished> {
    let n = problem.n();
    let mut boxes: Vec<BoxState> = (0..n)
        .map(|i| {
            let (z, y) = (point.z[i], point.y[i]);
            if problem.lower[i] == problem.upper[i] || z - problem.lower[i] < -y {
                BoxState::AtLower
            } else if problem.upper[i] - z < y {
                BoxState::AtUpper
            } else {
                BoxState::Free
            }
        })
        .collect();
    let mut pairs: Vec<bool> = problem
        .pairs
        .iter()
        .enumerate()
        .map(|(k, pc)| point.z[n + k] - pc.gap < -point.y[n + k])
        .collect();

    let mut seen = HashSet::new();
    for _ in 0..MAX_ROUNDS {
        if !seen.insert((boxes.clone(), pairs.clone())) {
            return None;
        }
        let (x, mult) = solve_equality(problem, q_dense, &boxes, &pairs)?;

        let mut changed = false;
        // Release constraints whose multiplier has the wrong sign.
        for i in 0..n {
            if problem.lower[i] == problem.upper[i] {
                continue;
            }
            let wrong = match boxes[i] {
                BoxState::AtLower => mult.lower[i] < -optimality_tolerance,
                BoxState::AtUpper => mult.upper[i] < -optimality_tolerance,
                BoxState::Free => false,
            };
            if wrong {
                boxes[i] = BoxState::Free;
                changed = true;
            }
        }
        for (k, active) in pairs.iter_mut().enumerate() {
            if *active && mult.pairs[k] < -optimality_tolerance {
                *active = false;
                changed = true;
            }
        }
        // Add violated constraints.
        for i in 0..n {
            if boxes[i] == BoxState::Free {
                if x[i] < problem.lower[i] - ACTIVE_SLACK {
                    boxes[i] = BoxState::AtLower;
                    changed = true;
                } else if x[i] > problem.upper[i] + ACTIVE_SLACK {
                    boxes[i] = BoxState::AtUpper;
                    changed = true;
                }
            }
        }
        for (k, pc) in problem.pairs.iter().enumerate() {
            if !pairs[k] && x[pc.upper] - x[pc.lower] < pc.gap - ACTIVE_SLACK {
                pairs[k] = true;
                changed = true;
            }
        }
        if changed {
            continue;
        }

        let stationarity = stationarity_residual(problem, &x, &mult);
        if stationarity > optimality_tolerance {
            return None;
        }
        let primal = problem.max_violation(&x);
        return Some(Polished {
            values: x,
            multipliers: clip_negative(mult),
            stationarity,
            primal,
        });
    }
    None
}

/// Multipliers within tolerance of zero but negative are reported as zero.
fn clip_negative(mut m: Multipliers) -> Multipliers {
    for v in m.lower.iter_mut().chain(m.upper.iter_mut()).chain(m.pairs.iter_mut()) {
        *v = v.max(0.0);
    }
    m
}

/// Minimizes the objective with the given box and pair constraints held as
/// equalities. Returns the point and the multipliers of the held
/// constraints (zero elsewhere).
fn solve_equality(
    problem: &QPProblem,
    q_dense: &DMatrix<f64>,
    boxes: &[BoxState],
    pairs: &[bool],
) -> Option<(Vec<f64>, Multipliers)> {
    let n = problem.n();
    let mut x = vec![0.0; n];
    let mut free = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        match boxes[i] {
            BoxState::AtLower => x[i] = problem.lower[i],
            BoxState::AtUpper => x[i] = problem.upper[i],
            BoxState::Free => {
                slot[i] = free.len();
                free.push(i);
            }
        }
    }
    let nf = free.len();

    // Equality rows on the free variables: coefficients and right-hand side.
    let mut rows: Vec<EqualityRow> = Vec::new();
    for (k, pc) in problem.pairs.iter().enumerate() {
        if !pairs[k] {
            continue;
        }
        let mut coeffs = Vec::with_capacity(2);
        let mut rhs = pc.gap;
        if slot[pc.upper] != usize::MAX {
            coeffs.push((slot[pc.upper], 1.0));
        } else {
            rhs -= x[pc.upper];
        }
        if slot[pc.lower] != usize::MAX {
            coeffs.push((slot[pc.lower], -1.0));
        } else {
            rhs += x[pc.lower];
        }
        if !coeffs.is_empty() {
            rows.push((k, coeffs, rhs));
        }
    }

    let mut pair_w = vec![0.0; problem.pairs.len()];
    if nf > 0 {
        let mut h = DMatrix::zeros(nf, nf);
        let mut c = DVector::zeros(nf);
        for (a, &i) in free.iter().enumerate() {
            c[a] = problem.linear[i];
            for (b, &j) in free.iter().enumerate() {
                h[(a, b)] = q_dense[(i, j)];
            }
        }
        for (a, &i) in free.iter().enumerate() {
            for &(j, v) in problem.quadratic.row(i) {
                if slot[j] == usize::MAX {
                    c[a] += v * x[j];
                }
            }
        }
        let chol = Cholesky::new(h)?;
        let mut xf = -chol.solve(&c);

        if !rows.is_empty() {
            let k = rows.len();
            let mut at = DMatrix::zeros(nf, k);
            let mut b = DVector::zeros(k);
            for (r, (_, coeffs, rhs)) in rows.iter().enumerate() {
                for &(col, v) in coeffs {
                    at[(col, r)] = v;
                }
                b[r] = *rhs;
            }
            let hinv_at = chol.solve(&at);
            let mut s = at.transpose() * &hinv_at;
            let reg = 1e-13 * (0..k).map(|r| s[(r, r)]).fold(1.0, f64::max);
            for r in 0..k {
                s[(r, r)] += reg;
            }
            let s_chol: Cholesky<f64, Dyn> = Cholesky::new(s)?;
            // A x = b with x = −H⁻¹(c + Aᵀw)  ⇒  S w = −A H⁻¹ c − b
            let mut w = s_chol.solve(&(at.transpose() * &xf - &b));
            xf = -chol.solve(&(&c + &at * &w));
            let err = at.transpose() * &xf - &b;
            let dw = s_chol.solve(&err);
            w += &dw;
            xf -= &hinv_at * &dw;
            for (r, (kk, _, _)) in rows.iter().enumerate() {
                pair_w[*kk] = w[r];
            }
        }
        for (a, &i) in free.iter().enumerate() {
            x[i] = xf[a];
        }
    }

    // ν_pair = −w; box multipliers absorb the remaining gradient.
    let mut mult = Multipliers {
        lower: vec![0.0; n],
        upper: vec![0.0; n],
        pairs: pair_w.iter().map(|w| -w).collect(),
    };
    let mut g = problem.gradient(&x);
    for (pc, &nu) in problem.pairs.iter().zip(&mult.pairs) {
        g[pc.upper] -= nu;
        g[pc.lower] += nu;
    }
    for i in 0..n {
        match boxes[i] {
            BoxState::Free => {}
            _ if problem.lower[i] == problem.upper[i] => {
                if g[i] >= 0.0 {
                    mult.lower[i] = g[i];
                } else {
                    mult.upper[i] = -g[i];
                }
            }
            BoxState::AtLower => mult.lower[i] = g[i],
            BoxState::AtUpper => mult.upper[i] = -g[i],
        }
    }
    Some((x, mult))
}
