//! Feasibility pre-check by longest-path propagation of pair gaps.

use crate::error::{Error, InfeasibleChain, Result};

use super::QPProblem;

const SPAN_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible,
    Infeasible(InfeasibleChain),
}

/// Bounds after pushing every pair gap through the constraint graph, with
/// the constraint index that last tightened each bound.
pub(crate) struct Tightened {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    lower_from: Vec<Option<usize>>,
    upper_from: Vec<Option<usize>>,
}

/// Decides whether the box and pair constraints admit a point.
///
/// Errors with [`Error::Cycle`] when pair constraints close a cycle whose
/// gaps sum to a positive value.
pub fn check_feasibility(problem: &QPProblem) -> Result<Feasibility> {
    problem.validate()?;
    let t = tighten(problem)?;
    for i in 0..problem.n() {
        if t.lower[i] > t.upper[i] + SPAN_SLACK {
            return Ok(Feasibility::Infeasible(witness(problem, &t, i)));
        }
    }
    Ok(Feasibility::Feasible)
}

pub(crate) fn tighten(problem: &QPProblem) -> Result<Tightened> {
    let n = problem.n();
    detect_positive_cycle(problem)?;

    let mut lower = problem.lower.clone();
    let mut upper = problem.upper.clone();
    let mut lower_from = vec![None; n];
    let mut upper_from = vec![None; n];
    // No positive cycle, so n rounds reach the fixed point.
    for _ in 0..=n {
        let mut changed = false;
        for (k, pc) in problem.pairs.iter().enumerate() {
            let lo = lower[pc.lower] + pc.gap;
            if lo > lower[pc.upper] {
                lower[pc.upper] = lo;
                lower_from[pc.upper] = Some(k);
                changed = true;
            }
            let hi = upper[pc.upper] - pc.gap;
            if hi < upper[pc.lower] {
                upper[pc.lower] = hi;
                upper_from[pc.lower] = Some(k);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(Tightened {
        lower,
        upper,
        lower_from,
        upper_from,
    })
}

/// Bellman-Ford longest paths from a virtual source; still relaxing after
/// `n` rounds means a cycle with positive total gap.
fn detect_positive_cycle(problem: &QPProblem) -> Result<()> {
    let n = problem.n();
    let mut dist = vec![0.0_f64; n];
    let mut from: Vec<Option<usize>> = vec![None; n];
    let mut last = None;
    for _ in 0..=n {
        last = None;
        for (k, pc) in problem.pairs.iter().enumerate() {
            let d = dist[pc.lower] + pc.gap;
            if d > dist[pc.upper] + 1e-12 {
                dist[pc.upper] = d;
                from[pc.upper] = Some(k);
                last = Some(pc.upper);
            }
        }
        if last.is_none() {
            return Ok(());
        }
    }
    // Walk back n steps to land on the cycle, then collect it.
    let mut v = last.expect("relaxed in final round");
    for _ in 0..n {
        v = problem.pairs[from[v].expect("relaxed vertex has a predecessor")].lower;
    }
    let start = v;
    let mut cycle = vec![start];
    let mut u = problem.pairs[from[start].expect("on cycle")].lower;
    while u != start {
        cycle.push(u);
        u = problem.pairs[from[u].expect("on cycle")].lower;
    }
    cycle.reverse();
    Err(Error::Cycle(cycle))
}

fn witness(problem: &QPProblem, t: &Tightened, at: usize) -> InfeasibleChain {
    // Upward from `at` along the constraints that lowered upper bounds.
    let mut above = Vec::new();
    let mut v = at;
    let mut span = 0.0;
    while let Some(k) = t.upper_from[v] {
        let pc = problem.pairs[k];
        span += pc.gap;
        v = pc.upper;
        above.push(v);
    }
    let top = v;
    above.reverse();

    let mut chain = above;
    chain.push(at);
    let mut v = at;
    while let Some(k) = t.lower_from[v] {
        let pc = problem.pairs[k];
        span += pc.gap;
        v = pc.lower;
        chain.push(v);
    }
    let bottom = v;
    InfeasibleChain {
        chain,
        required_span: span,
        available_span: problem.upper[top] - problem.lower[bottom],
    }
}
