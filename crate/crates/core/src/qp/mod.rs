//! Strictly convex quadratic programs with box and pairwise-difference
//! constraints:
//!
//! ```text
//! minimize    ½ yᵀ Q y + cᵀ y + offset
//! subject to  lo_i ≤ y_i ≤ hi_i
//!             y_i − y_j ≥ gap      for every pair constraint (i, j, gap)
//! ```
//!
//! [`solve`] runs an over-relaxed ADMM iteration on the constraint
//! projections and finishes with an active-set polish that solves the
//! equality-constrained KKT system exactly and verifies every KKT condition.

mod admm;
mod brute;
mod feasibility;
mod polish;
mod sparse;

pub use brute::{brute_force_minimize, BRUTE_FORCE_MAX_DIM};
pub use feasibility::{check_feasibility, Feasibility};
pub use sparse::{SparseBuilder, SymmetricSparse};

use crate::error::{Error, Result};

/// `y[upper] − y[lower] ≥ gap`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairConstraint {
    pub upper: usize,
    pub lower: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QPProblem {
    pub quadratic: SymmetricSparse,
    pub linear: Vec<f64>,
    /// Constant added to the objective value; does not affect the minimizer.
    pub offset: f64,
    pub pairs: Vec<PairConstraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl QPProblem {
    pub fn n(&self) -> usize {
        self.linear.len()
    }

    pub fn objective(&self, y: &[f64]) -> f64 {
        let qy = self.quadratic.mul_vec(y);
        let mut total = self.offset;
        for i in 0..y.len() {
            total += 0.5 * y[i] * qy[i] + self.linear[i] * y[i];
        }
        total
    }

    /// `Q y + c`.
    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        let mut g = self.quadratic.mul_vec(y);
        for (gi, ci) in g.iter_mut().zip(&self.linear) {
            *gi += ci;
        }
        g
    }

    /// Largest violation of any box or pair constraint at `y` (0 if feasible).
    pub fn max_violation(&self, y: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..y.len() {
            worst = worst.max(self.lower[i] - y[i]).max(y[i] - self.upper[i]);
        }
        for pc in &self.pairs {
            worst = worst.max(pc.gap - (y[pc.upper] - y[pc.lower]));
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.quadratic.n() != n || self.lower.len() != n || self.upper.len() != n {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch: Q is {}x{}, c has {}, boxes have {}/{}",
                self.quadratic.n(),
                self.quadratic.n(),
                n,
                self.lower.len(),
                self.upper.len()
            )));
        }
        if !self.quadratic.is_symmetric(1e-12) {
            return Err(Error::InvalidInput("Q is not symmetric".into()));
        }
        for i in 0..n {
            if self.lower[i].is_nan() || self.upper[i].is_nan() || self.lower[i] > self.upper[i] {
                return Err(Error::InvalidInput(format!(
                    "box {i} is empty: [{}, {}]",
                    self.lower[i], self.upper[i]
                )));
            }
        }
        for pc in &self.pairs {
            if pc.upper >= n || pc.lower >= n || pc.upper == pc.lower || !pc.gap.is_finite() {
                return Err(Error::InvalidInput(format!("bad pair constraint {pc:?}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Maximum box or pair violation accepted at the solution.
    pub feasibility_tolerance: f64,
    /// Maximum KKT stationarity residual `‖Qy + c − Aᵀν‖∞`.
    pub optimality_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            feasibility_tolerance: 1e-6,
            optimality_tolerance: 1e-8,
            max_iterations: 50_000,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.feasibility_tolerance > 0.0
            && self.optimality_tolerance > 0.0
            && self.max_iterations > 0)
        {
            return Err(Error::InvalidInput(format!(
                "solver settings must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub primal_infeasibility: f64,
    pub stationarity: f64,
}

/// Nonnegative KKT multipliers. At an optimum
/// `Qy + c = lower − upper + Σ_k pairs[k]·(e_upper − e_lower)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Multipliers {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub pairs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub values: Vec<f64>,
    pub objective_value: f64,
    pub iterations: usize,
    pub residuals: Residuals,
    pub multipliers: Multipliers,
}

/// Stationarity residual `‖Qy + c − Aᵀν‖∞` for the given multipliers.
pub fn stationarity_residual(problem: &QPProblem, y: &[f64], mult: &Multipliers) -> f64 {
    let mut g = problem.gradient(y);
    for i in 0..g.len() {
        g[i] -= mult.lower[i] - mult.upper[i];
    }
    for (pc, &nu) in problem.pairs.iter().zip(&mult.pairs) {
        g[pc.upper] -= nu;
        g[pc.lower] += nu;
    }
    g.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Returns the unique minimizer of `problem`.
pub fn solve(problem: &QPProblem, settings: &SolverSettings) -> Result<Solution> {
    solve_from(problem, settings, None)
}

/// Like [`solve`], starting the iteration from `start` instead of the
/// clamped origin. The result does not depend on the start beyond the
/// solver tolerances.
pub fn solve_from(
    problem: &QPProblem,
    settings: &SolverSettings,
    start: Option<&[f64]>,
) -> Result<Solution> {
    problem.validate()?;
    settings.validate()?;
    if let Some(s) = start {
        if s.len() != problem.n() {
            return Err(Error::InvalidInput(format!(
                "start has {} entries, problem has {}",
                s.len(),
                problem.n()
            )));
        }
    }
    match check_feasibility(problem)? {
        Feasibility::Feasible => {}
        Feasibility::Infeasible(chain) => return Err(Error::Infeasible(chain)),
    }
    if problem.n() == 0 {
        return Ok(Solution {
            values: Vec::new(),
            objective_value: problem.offset,
            iterations: 0,
            residuals: Residuals {
                primal_infeasibility: 0.0,
                stationarity: 0.0,
            },
            multipliers: Multipliers::default(),
        });
    }
    admm::run(problem, settings, start)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn diagonal_problem(diag: &[f64], linear: &[f64], lo: &[f64], hi: &[f64]) -> QPProblem {
        let mut b = SparseBuilder::new(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            b.add(i, i, d);
        }
        QPProblem {
            quadratic: b.build(),
            linear: linear.to_vec(),
            offset: 0.0,
            pairs: Vec::new(),
            lower: lo.to_vec(),
            upper: hi.to_vec(),
        }
    }

    #[test]
    fn single_variable_interior_minimum() {
        let p = diagonal_problem(&[2.0], &[-14.0], &[6.5], &[7.5]);
        let s = solve(&p, &SolverSettings::default()).unwrap();
        assert!((s.values[0] - 7.0).abs() < 1e-9, "{:?}", s.values);
    }

    #[test]
    fn tied_pair_splits_symmetrically() {
        // (y1−5)² + (y2−5)² with y1 − y2 ≥ 0.05
        let mut p = diagonal_problem(&[2.0, 2.0], &[-10.0, -10.0], &[4.5, 4.5], &[5.5, 5.5]);
        p.pairs.push(PairConstraint {
            upper: 0,
            lower: 1,
            gap: 0.05,
        });
        let s = solve(&p, &SolverSettings::default()).unwrap();
        assert!((s.values[0] - 5.025).abs() < 1e-9);
        assert!((s.values[1] - 4.975).abs() < 1e-9);
        assert!(s.residuals.stationarity <= 1e-8);
        assert!((s.multipliers.pairs[0] - 0.05).abs() < 1e-9);
    }

    #[test]
    fn scores_only_two_reviews_clip_to_boxes() {
        // consensus (y1−y2)²/2 plus (y−z)² with z = (7, 4)
        let mut b = SparseBuilder::new(2);
        b.add(0, 0, 3.0);
        b.add(1, 1, 3.0);
        b.add(0, 1, -1.0);
        b.add(1, 0, -1.0);
        let p = QPProblem {
            quadratic: b.build(),
            linear: vec![-14.0, -8.0],
            offset: 65.0,
            pairs: Vec::new(),
            lower: vec![6.5, 3.5],
            upper: vec![7.5, 4.5],
        };
        let s = solve(&p, &SolverSettings::default()).unwrap();
        assert!((s.values[0] - 6.5).abs() < 1e-9);
        assert!((s.values[1] - 4.5).abs() < 1e-9);
        // literal objective: (2)²/2 + 0.25 + 0.25
        assert!((s.objective_value - 2.5).abs() < 1e-9);
    }

    #[test]
    fn infeasible_problem_is_reported() {
        let mut p = diagonal_problem(&[2.0, 2.0], &[0.0, 0.0], &[0.0, 0.0], &[1.0, 1.0]);
        p.pairs.push(PairConstraint {
            upper: 0,
            lower: 1,
            gap: 1.5,
        });
        assert!(matches!(
            solve(&p, &SolverSettings::default()),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn rejects_bad_settings_and_shapes() {
        let p = diagonal_problem(&[2.0], &[0.0], &[1.0], &[0.0]);
        assert!(matches!(
            solve(&p, &SolverSettings::default()),
            Err(Error::InvalidInput(_))
        ));
        let p = diagonal_problem(&[2.0], &[0.0], &[0.0], &[1.0]);
        let bad = SolverSettings {
            feasibility_tolerance: 0.0,
            ..Default::default()
        };
        assert!(matches!(solve(&p, &bad), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn empty_problem_returns_offset() {
        let p = QPProblem {
            quadratic: SparseBuilder::new(0).build(),
            linear: vec![],
            offset: 3.0,
            pairs: vec![],
            lower: vec![],
            upper: vec![],
        };
        let s = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(s.objective_value, 3.0);
    }
}
