//! Over-relaxed ADMM on `l ≤ A y ≤ u`, where the rows of `A` are the
//! identity (boxes) followed by one `e_upper − e_lower` row per pair.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::polish::{polish, AdmmPoint};
use super::{stationarity_residual, Multipliers, QPProblem, Residuals, Solution, SolverSettings};
use crate::error::{Error, Result};

const SIGMA: f64 = 1e-6;
const ALPHA: f64 = 1.6;
const RHO_INIT: f64 = 0.1;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const CHECK_EVERY: usize = 10;
const ADAPT_EVERY: usize = 50;
const FIRST_POLISH: usize = 20;

struct Rows<'a> {
    problem: &'a QPProblem,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl<'a> Rows<'a> {
    fn new(problem: &'a QPProblem) -> Self {
        let mut lower = problem.lower.clone();
        let mut upper = problem.upper.clone();
        for pc in &problem.pairs {
            lower.push(pc.gap);
            upper.push(f64::INFINITY);
        }
        Self {
            problem,
            lower,
            upper,
        }
    }

    fn len(&self) -> usize {
        self.lower.len()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        out[..n].copy_from_slice(x);
        for (k, pc) in self.problem.pairs.iter().enumerate() {
            out[n + k] = x[pc.upper] - x[pc.lower];
        }
    }

    fn apply_transpose(&self, v: &[f64], out: &mut [f64]) {
        let n = out.len();
        out.copy_from_slice(&v[..n]);
        for (k, pc) in self.problem.pairs.iter().enumerate() {
            out[pc.upper] += v[n + k];
            out[pc.lower] -= v[n + k];
        }
    }
}

fn factorize(q: &DMatrix<f64>, problem: &QPProblem, rho: f64) -> Result<Cholesky<f64, Dyn>> {
    let mut k = q.clone();
    for i in 0..problem.n() {
        k[(i, i)] += SIGMA + rho;
    }
    for pc in &problem.pairs {
        k[(pc.upper, pc.upper)] += rho;
        k[(pc.lower, pc.lower)] += rho;
        k[(pc.upper, pc.lower)] -= rho;
        k[(pc.lower, pc.upper)] -= rho;
    }
    Cholesky::new(k).ok_or_else(|| Error::InvalidInput("Q is not positive semidefinite".into()))
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(super) fn run(
    problem: &QPProblem,
    settings: &SolverSettings,
    start: Option<&[f64]>,
) -> Result<Solution> {
    let n = problem.n();
    let rows = Rows::new(problem);
    let m = rows.len();
    let q = problem.quadratic.to_dense();
    if Cholesky::new(q.clone()).is_none() {
        return Err(Error::InvalidInput("Q is not positive definite".into()));
    }

    let mut x: Vec<f64> = match start {
        Some(s) => s.to_vec(),
        None => (0..n)
            .map(|i| {
                let d = q[(i, i)];
                let guess = if d > 0.0 { -problem.linear[i] / d } else { 0.0 };
                guess.clamp(problem.lower[i], problem.upper[i])
            })
            .collect(),
    };
    let mut z = vec![0.0; m];
    rows.apply(&x, &mut z);
    for r in 0..m {
        z[r] = z[r].clamp(rows.lower[r], rows.upper[r]);
    }
    let mut y = vec![0.0; m];

    let mut rho = RHO_INIT;
    let mut factor = factorize(&q, problem, rho)?;
    let mut rhs = DVector::zeros(n);
    let mut tmp_m = vec![0.0; m];
    let mut tmp_n = vec![0.0; n];
    let mut ax = vec![0.0; m];
    let mut next_polish = FIRST_POLISH;
    let mut last = (f64::INFINITY, f64::INFINITY);

    for iter in 1..=settings.max_iterations {
        for r in 0..m {
            tmp_m[r] = rho * z[r] - y[r];
        }
        rows.apply_transpose(&tmp_m, &mut tmp_n);
        for i in 0..n {
            rhs[i] = SIGMA * x[i] - problem.linear[i] + tmp_n[i];
        }
        factor.solve_mut(&mut rhs);
        let x_tilde = rhs.as_slice();
        rows.apply(x_tilde, &mut tmp_m);
        for i in 0..n {
            x[i] = ALPHA * x_tilde[i] + (1.0 - ALPHA) * x[i];
        }
        for r in 0..m {
            let z_hat = ALPHA * tmp_m[r] + (1.0 - ALPHA) * z[r];
            let z_new = (z_hat + y[r] / rho).clamp(rows.lower[r], rows.upper[r]);
            y[r] += rho * (z_hat - z_new);
            z[r] = z_new;
        }

        if iter % CHECK_EVERY != 0 && iter != settings.max_iterations {
            continue;
        }
        rows.apply(&x, &mut ax);
        let primal = ax.iter().zip(&z).fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
        let qx = problem.quadratic.mul_vec(&x);
        let mut aty = vec![0.0; n];
        rows.apply_transpose(&y, &mut aty);
        let dual = (0..n).fold(0.0_f64, |acc, i| {
            acc.max((qx[i] + problem.linear[i] + aty[i]).abs())
        });
        last = (primal, dual);

        let converged = primal <= 1e-7 * (1.0 + inf_norm(&ax)) && dual <= 1e-7 * (1.0 + inf_norm(&qx));
        if iter >= next_polish || converged || iter == settings.max_iterations {
            next_polish = iter * 2;
            if let Some(p) = polish(problem, &q, AdmmPoint { z: &z, y: &y }, settings.optimality_tolerance) {
                if p.primal <= settings.feasibility_tolerance {
                    return Ok(Solution {
                        objective_value: problem.objective(&p.values),
                        values: p.values,
                        iterations: iter,
                        residuals: Residuals {
                            primal_infeasibility: p.primal,
                            stationarity: p.stationarity,
                        },
                        multipliers: p.multipliers,
                    });
                }
            }
            if let Some(sol) = accept_admm_iterate(problem, settings, &x, &y, iter) {
                return Ok(sol);
            }
        }

        if iter % ADAPT_EVERY == 0 {
            let prim_scale = inf_norm(&ax).max(inf_norm(&z)).max(1e-12);
            let dual_scale = inf_norm(&qx)
                .max(inf_norm(&aty))
                .max(inf_norm(&problem.linear))
                .max(1e-12);
            let ratio = ((primal / prim_scale) / (dual / dual_scale).max(1e-30)).sqrt();
            let proposed = (rho * ratio).clamp(RHO_MIN, RHO_MAX);
            if proposed.is_finite() && (proposed > 5.0 * rho || proposed < rho / 5.0) {
                rho = proposed;
                factor = factorize(&q, problem, rho)?;
            }
        }
    }

    Err(Error::MaxIterations {
        iterations: settings.max_iterations,
        primal: last.0,
        stationarity: last.1,
    })
}

/// Plain ADMM iterate, accepted only if it already meets both tolerances.
fn accept_admm_iterate(
    problem: &QPProblem,
    settings: &SolverSettings,
    x: &[f64],
    y: &[f64],
    iterations: usize,
) -> Option<Solution> {
    let n = problem.n();
    let primal = problem.max_violation(x);
    if primal > settings.feasibility_tolerance {
        return None;
    }
    let multipliers = Multipliers {
        lower: (0..n).map(|i| (-y[i]).max(0.0)).collect(),
        upper: (0..n).map(|i| y[i].max(0.0)).collect(),
        pairs: (0..problem.pairs.len()).map(|k| (-y[n + k]).max(0.0)).collect(),
    };
    let stationarity = stationarity_residual(problem, x, &multipliers);
    if stationarity > settings.optimality_tolerance {
        return None;
    }
    Some(Solution {
        values: x.to_vec(),
        objective_value: problem.objective(x),
        iterations,
        residuals: Residuals {
            primal_infeasibility: primal,
            stationarity,
        },
        multipliers,
    })
}
