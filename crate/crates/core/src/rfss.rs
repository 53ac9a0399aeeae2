//! Regularized feature-sign search (RFSS).
//!
//! Maintains a consistent triple `(A, x, θ)` and grows `A` greedily by the
//! worst violator of `|Kᵀ(Kx − y)|_i ≤ α`. Each restricted solve minimizes the
//! sign-linearized functional on `A`; when the solution flips a sign, the step
//! is cut back to the first zero crossing, which keeps the triple consistent
//! and the elastic-net objective strictly decreasing. No `(A, θ)` is visited
//! twice, so the method stops after finitely many steps.

use std::collections::HashSet;

use nalgebra::DVector;

use crate::error::{check_len, Error, Result};
use crate::functional::{check_from_gradient, objective};
use crate::linalg::{GramSystem, UpdatableFactor};
use crate::rssn::{default_kkt_tolerance, finish, validate_signs};
use crate::types::{
    is_consistent, sign, ActiveSet, ConsistentTriple, Problem, RegParams, SignPattern,
    SolveResult, Status,
};

#[derive(Clone, Debug, PartialEq)]
pub struct RfssOptions {
    /// `None` means `10 · s`.
    pub max_iterations: Option<usize>,
    /// `None` means `1e-10 · ‖Kᵀy‖_∞`.
    pub kkt_tolerance: Option<f64>,
    /// Fresh Cholesky factorization for every subproblem. When false the
    /// factor is updated by row/column insertion and deletion.
    pub refactorize: bool,
}

impl Default for RfssOptions {
    fn default() -> Self {
        Self {
            max_iterations: None,
            kkt_tolerance: None,
            refactorize: true,
        }
    }
}

/// Worst violator of the off-support optimality condition and the sign it
/// enters the active set with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Violation {
    pub index: usize,
    pub sign: i8,
}

/// Greedy index choice: `argmax_{i ∉ A} |Kᵀ(Kx − y)|_i − α`, lowest index on ties.
pub fn select_violating_index(
    x: &DVector<f64>,
    p: &Problem,
    r: &RegParams,
    active: &ActiveSet,
) -> Result<Violation> {
    let g = crate::functional::data_gradient(x, p)?;
    violation_from_gradient(&g, active, |_| r.alpha)
}

/// As [`select_violating_index`] with a per-component ℓ¹ weight.
pub fn select_violating_index_weighted(
    x: &DVector<f64>,
    p: &Problem,
    weights: &DVector<f64>,
    active: &ActiveSet,
) -> Result<Violation> {
    validate_weights(weights, p.cols())?;
    let g = crate::functional::data_gradient(x, p)?;
    violation_from_gradient(&g, active, |i| weights[i])
}

fn violation_from_gradient(
    g: &DVector<f64>,
    active: &ActiveSet,
    alpha: impl Fn(usize) -> f64,
) -> Result<Violation> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..g.len() {
        if active.contains(i) {
            continue;
        }
        let excess = g[i].abs() - alpha(i);
        if excess > 0.0 && best.map_or(true, |(_, b)| excess > b) {
            best = Some((i, excess));
        }
    }
    match best {
        Some((index, _)) => Ok(Violation {
            index,
            sign: -sign(g[index]),
        }),
        None => Err(Error::ContractViolation(
            "no index outside the active set violates |Kᵀ(Kx−y)|_i ≤ α".into(),
        )),
    }
}

fn validate_weights(weights: &DVector<f64>, dim: usize) -> Result<()> {
    check_len("weights", dim, weights.len())?;
    if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidParameter(
            "weighted ℓ¹ requires every weight to be positive and finite".into(),
        ));
    }
    Ok(())
}

/// Minimizer of the auxiliary functional among vectors supported on `active`.
pub fn subproblem_solve(
    active: &ActiveSet,
    theta: &SignPattern,
    p: &Problem,
    r: &RegParams,
) -> Result<DVector<f64>> {
    r.require_positive_beta()?;
    check_len("theta", p.cols(), theta.len())?;
    validate_signs(active, theta)?;
    let sys = GramSystem::new(p);
    sys.solve_on(active, r.beta, |i| sys.kty[i] - r.alpha * f64::from(theta.get(i)))
}

/// As [`subproblem_solve`] with `α_i` taken from `weights`.
pub fn subproblem_solve_weighted(
    active: &ActiveSet,
    theta: &SignPattern,
    p: &Problem,
    beta: f64,
    weights: &DVector<f64>,
) -> Result<DVector<f64>> {
    RegParams::new(0.0, beta)?.require_positive_beta()?;
    check_len("theta", p.cols(), theta.len())?;
    validate_signs(active, theta)?;
    validate_weights(weights, p.cols())?;
    let sys = GramSystem::new(p);
    sys.solve_on(active, beta, |i| sys.kty[i] - weights[i] * f64::from(theta.get(i)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineSearch {
    pub lambda0: f64,
    pub crossing_index: Option<usize>,
    pub point: DVector<f64>,
}

/// First zero crossing on the segment from `x_old` to `x_new`.
///
/// Components that start at zero are skipped. Every component reaching zero
/// at the smallest `λ` is set to exactly `0.0`.
pub fn zero_crossing_line_search(
    x_old: &DVector<f64>,
    x_new: &DVector<f64>,
    active: &ActiveSet,
) -> LineSearch {
    let mut lambda0 = f64::INFINITY;
    let mut hits: Vec<usize> = Vec::new();
    for i in active.iter() {
        let (a, b) = (x_old[i], x_new[i]);
        if a == 0.0 || (b != 0.0 && sign(a) == sign(b)) {
            continue;
        }
        let lambda = a / (a - b);
        if lambda < lambda0 {
            lambda0 = lambda;
            hits.clear();
            hits.push(i);
        } else if lambda == lambda0 {
            hits.push(i);
        }
    }
    if hits.is_empty() {
        return LineSearch {
            lambda0: 1.0,
            crossing_index: None,
            point: x_new.clone(),
        };
    }
    let mut point = x_new * lambda0 + x_old * (1.0 - lambda0);
    for &i in &hits {
        point[i] = 0.0;
    }
    LineSearch {
        lambda0,
        crossing_index: Some(hits[0]),
        point,
    }
}

/// Per-run diagnostics of the descent argument.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RfssTrace {
    /// `Φ_{α,β}` at the start and at every consistency-restoring iterate.
    pub objectives: Vec<f64>,
    /// `(A, θ)` pairs reaching the optimality check more than once.
    pub repeated_pairs: usize,
    /// Restricted solves where the newly added index came out with the wrong sign.
    pub entering_sign_mismatches: usize,
    /// Zero-crossing truncations performed.
    pub truncations: usize,
}

impl RfssTrace {
    /// Whether every recorded objective is below its predecessor, with
    /// `1e-14 · |Φ|` slack for rounding.
    pub fn strictly_decreasing(&self) -> bool {
        self.objectives
            .windows(2)
            .all(|w| w[1] < w[0] || (w[1] - w[0]).abs() <= 1e-14 * w[0].abs().max(w[1].abs()) && w[1] <= w[0])
    }
}

/// Cold start from `(∅, 0, 0)`.
pub fn rfss_solve(p: &Problem, r: &RegParams, opts: &RfssOptions) -> Result<SolveResult> {
    rfss_solve_traced(p, r, opts, &ConsistentTriple::zero(p.cols())).map(|(res, _)| res)
}

/// Warm start from any consistent triple.
pub fn rfss_solve_from(
    p: &Problem,
    r: &RegParams,
    opts: &RfssOptions,
    start: &ConsistentTriple,
) -> Result<SolveResult> {
    rfss_solve_traced(p, r, opts, start).map(|(res, _)| res)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Next {
    Grow,
    Solve,
}

pub fn rfss_solve_traced(
    p: &Problem,
    r: &RegParams,
    opts: &RfssOptions,
    start: &ConsistentTriple,
) -> Result<(SolveResult, RfssTrace)> {
    r.require_positive_beta()?;
    let s = p.cols();
    check_len("start", s, start.point().len())?;
    let max_iterations = opts.max_iterations.unwrap_or(10 * s);
    if max_iterations == 0 {
        return Err(Error::InvalidParameter("max_iterations must be >= 1".into()));
    }
    let tol = opts.kkt_tolerance.unwrap_or_else(|| default_kkt_tolerance(p));
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("kkt_tolerance must be > 0".into()));
    }

    let sys = GramSystem::new(p);
    let mut factor = UpdatableFactor::new();
    let mut solve = |active: &ActiveSet, theta: &SignPattern| {
        let rhs = |i: usize| sys.kty[i] - r.alpha * f64::from(theta.get(i));
        if opts.refactorize {
            sys.solve_on(active, r.beta, rhs)
        } else {
            factor.solve_on(&sys, active, r.beta, rhs)
        }
    };

    let mut trace = RfssTrace::default();
    let (mut active, mut x, mut theta) = start.clone().into_parts();
    let mut visited: HashSet<SignPattern> = HashSet::new();
    visited.insert(theta.clone());
    trace.objectives.push(objective(&x, p, r)?);

    let mut g = sys.gradient(&x);
    let check = check_from_gradient(&x, &g, r, &theta, tol);
    if check.is_optimal() {
        return finish(p, r, x, 0, Status::Converged).map(|res| (res, trace));
    }
    let mut next = if check.condb_ok { Next::Solve } else { Next::Grow };
    let mut iterations = 0usize;

    loop {
        let mut entering = None;
        if next == Next::Grow {
            let v = violation_from_gradient(&g, &active, |_| r.alpha)?;
            theta.set(v.index, v.sign);
            active = active.with(v.index);
            entering = Some(v.index);
        }

        // Restricted solves, cut back at sign changes until consistent.
        let mut passes = 0usize;
        let from_solve;
        loop {
            if iterations == max_iterations {
                return finish(p, r, x, iterations, Status::MaxIterations).map(|res| (res, trace));
            }
            iterations += 1;
            let x_new = match solve(&active, &theta) {
                Ok(v) => v,
                Err(_) => {
                    return finish(p, r, x, iterations, Status::NumericalFailure)
                        .map(|res| (res, trace))
                }
            };
            if let Some(i0) = entering.take() {
                if sign(x_new[i0]) != theta.get(i0) {
                    trace.entering_sign_mismatches += 1;
                }
            }
            if is_consistent(&active, &x_new, &theta) {
                x = x_new;
                g = sys.gradient(&x);
                from_solve = true;
                break;
            }
            passes += 1;
            if passes > s {
                return finish(p, r, x, iterations, Status::NumericalFailure).map(|res| (res, trace));
            }
            let cut = zero_crossing_line_search(&x, &x_new, &active);
            trace.truncations += 1;
            x = cut.point;
            active = ActiveSet::support_of(&x);
            theta = SignPattern::of(&x);
            trace.objectives.push(objective(&x, p, r)?);
            g = sys.gradient(&x);
            if check_from_gradient(&x, &g, r, &theta, tol).conda_ok {
                from_solve = false;
                break;
            }
        }

        if from_solve {
            trace.objectives.push(objective(&x, p, r)?);
        }
        if !visited.insert(theta.clone()) {
            trace.repeated_pairs += 1;
        }

        let check = check_from_gradient(&x, &g, r, &theta, tol);
        if check.condb_ok {
            let res = finish(p, r, x, iterations, Status::Converged)?;
            let status = if res.kkt_residual_norm <= tol {
                Status::Converged
            } else {
                Status::NumericalFailure
            };
            return Ok((SolveResult { status, ..res }, trace));
        }
        next = Next::Grow;
    }
}
