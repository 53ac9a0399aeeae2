//! Parameter choice: discrepancy principle in `β` with `α = ηβ`, the value
//! function, and warm-started continuation in `β`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::objective;
use crate::reference::ista_solve;
use crate::rfss::{rfss_solve_from, RfssOptions};
use crate::rssn::{rssn_solve_from, RssnOptions};
use crate::types::{ConsistentTriple, Problem, RegParams, SolveResult, Status};

/// Which solver a parameter rule calls.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverChoice {
    Rssn,
    Rfss,
    Ista,
    /// RSSN, falling back to RFSS when RSSN does not converge.
    #[default]
    Auto,
}

/// ISTA settings used whenever a rule picks [`SolverChoice::Ista`].
pub const ISTA_TOLERANCE: f64 = 1e-12;
pub const ISTA_MAX_ITERATIONS: usize = 200_000;

/// One solve with the chosen method and default options.
pub fn solve_with(p: &Problem, r: &RegParams, choice: SolverChoice) -> Result<SolveResult> {
    solve_warm(p, r, choice, None)
}

fn solve_warm(
    p: &Problem,
    r: &RegParams,
    choice: SolverChoice,
    start: Option<&DVector<f64>>,
) -> Result<SolveResult> {
    let zero;
    let x0 = match start {
        Some(x) => x,
        None => {
            zero = DVector::zeros(p.cols());
            &zero
        }
    };
    let triple = || ConsistentTriple::from_point(x0.clone());
    match choice {
        SolverChoice::Rssn => rssn_solve_from(p, r, &RssnOptions::default(), x0),
        SolverChoice::Rfss => rfss_solve_from(p, r, &RfssOptions::default(), &triple()),
        SolverChoice::Ista => ista_solve(p, r, ISTA_TOLERANCE, ISTA_MAX_ITERATIONS),
        SolverChoice::Auto => {
            let first = rssn_solve_from(p, r, &RssnOptions::default(), x0)?;
            if first.status.is_converged() {
                Ok(first)
            } else {
                rfss_solve_from(p, r, &RfssOptions::default(), &triple())
            }
        }
    }
}

fn converged(res: SolveResult, what: &str) -> Result<SolveResult> {
    if res.status.is_converged() {
        Ok(res)
    } else {
        Err(Error::SolverFailure(format!("{what}: status {:?}", res.status)))
    }
}

/// `‖K x* − y^δ‖₂` for the minimizer at `(α, β) = (ηβ, β)`.
pub fn residual_at(beta: f64, eta: f64, p: &Problem, solver: SolverChoice) -> Result<f64> {
    Ok(solve_coupled(beta, eta, p, solver)?.1)
}

fn solve_coupled(
    beta: f64,
    eta: f64,
    p: &Problem,
    solver: SolverChoice,
) -> Result<(SolveResult, f64)> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("beta must be > 0, got {beta}")));
    }
    let r = RegParams::coupled(eta, beta)?;
    let res = converged(solve_with(p, &r, solver)?, &format!("solve at beta = {beta:e}"))?;
    let residual = (p.operator() * &res.solution - p.data()).norm();
    Ok((res, residual))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscrepancyOptions {
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub rel_tol: f64,
    pub max_bisections: usize,
    pub tau: f64,
    pub solver: SolverChoice,
}

impl Default for DiscrepancyOptions {
    fn default() -> Self {
        Self {
            bracket_lo: 1e-6,
            bracket_hi: 1.0,
            rel_tol: 1e-6,
            max_bisections: 80,
            tau: 1.0,
            solver: SolverChoice::Auto,
        }
    }
}

/// Times each bracket end may be moved by a factor of ten.
pub const BRACKET_EXPANSIONS: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct DiscrepancyResult {
    pub beta_star: f64,
    pub x_star: DVector<f64>,
    pub residual: f64,
    pub bisections: usize,
    /// False when `β*η ≥ ‖Kᵀy^δ‖_∞`, where the root need not be unique.
    pub unique: bool,
}

/// Bisection in `log β` for `‖K x* − y^δ‖ = τδ`.
pub fn discrepancy_solve(
    p: &Problem,
    eta: f64,
    opts: &DiscrepancyOptions,
) -> Result<DiscrepancyResult> {
    let delta = match p.noise_level() {
        Some(d) if d > 0.0 => d,
        _ => {
            return Err(Error::InvalidParameter(
                "discrepancy principle needs a positive noise level".into(),
            ))
        }
    };
    if !(opts.bracket_lo > 0.0 && opts.bracket_lo < opts.bracket_hi) {
        return Err(Error::InvalidParameter("need 0 < bracket_lo < bracket_hi".into()));
    }
    if !(opts.rel_tol > 0.0) {
        return Err(Error::InvalidParameter("rel_tol must be > 0".into()));
    }
    if !(opts.tau >= 1.0) {
        return Err(Error::InvalidParameter("tau must be >= 1".into()));
    }
    let target = opts.tau * delta;
    if p.data().norm() <= target {
        return Err(Error::BracketFailure(format!(
            "‖y‖ = {:.3e} does not exceed tau*delta = {target:.3e}",
            p.data().norm()
        )));
    }
    let eval = |beta: f64| solve_coupled(beta, eta, p, opts.solver);

    let mut lo = opts.bracket_lo;
    let mut r_lo = eval(lo)?.1;
    let mut moves = 0;
    while r_lo >= target {
        if moves == BRACKET_EXPANSIONS {
            return Err(Error::BracketFailure(format!(
                "residual {r_lo:.3e} >= tau*delta at beta = {lo:e}"
            )));
        }
        lo /= 10.0;
        r_lo = eval(lo)?.1;
        moves += 1;
    }
    let mut hi = opts.bracket_hi.max(lo * 10.0);
    let (mut best, mut r_hi) = eval(hi)?;
    moves = 0;
    while r_hi < target {
        if moves == BRACKET_EXPANSIONS {
            return Err(Error::BracketFailure(format!(
                "residual {r_hi:.3e} < tau*delta at beta = {hi:e}"
            )));
        }
        lo = hi;
        hi *= 10.0;
        (best, r_hi) = eval(hi)?;
        moves += 1;
    }

    let mut beta = hi;
    let mut residual = r_hi;
    let mut bisections = 0;
    while (residual - target).abs() > opts.rel_tol * target {
        if bisections == opts.max_bisections {
            return Err(Error::SolverFailure(format!(
                "bisection stopped at beta = {beta:e} with residual {residual:.6e} (target {target:.6e})"
            )));
        }
        beta = (lo * hi).sqrt();
        (best, residual) = eval(beta)?;
        if residual < target {
            lo = beta;
        } else {
            hi = beta;
        }
        bisections += 1;
    }
    let threshold = crate::functional::zero_minimizer_threshold(p);
    Ok(DiscrepancyResult {
        beta_star: beta,
        x_star: best.solution,
        residual,
        bisections,
        unique: beta * eta < threshold,
    })
}

/// `F(α, β) = Φ_{α,β}(x*)` with its partial derivatives `‖x*‖₁` and `½‖x*‖²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValueFunction {
    pub value: f64,
    pub l1: f64,
    pub half_l2sq: f64,
}

pub fn value_function(alpha: f64, beta: f64, p: &Problem) -> Result<ValueFunction> {
    let r = RegParams::new(alpha, beta)?;
    r.require_positive_beta()?;
    let res = converged(solve_with(p, &r, SolverChoice::Auto)?, "value function")?;
    let x = &res.solution;
    Ok(ValueFunction {
        value: objective(x, p, &r)?,
        l1: x.lp_norm(1),
        half_l2sq: 0.5 * x.norm_squared(),
    })
}

/// Solves along a strictly decreasing list of `β` at fixed `α`, warm-starting
/// each step from the previous minimizer. A failed step keeps its status and
/// the next step starts cold.
pub fn beta_path(
    p: &Problem,
    alpha: f64,
    betas: &[f64],
    solver: SolverChoice,
) -> Result<Vec<SolveResult>> {
    if betas.is_empty() {
        return Err(Error::InvalidParameter("beta path is empty".into()));
    }
    if betas.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
        return Err(Error::InvalidParameter("path betas must be positive".into()));
    }
    if betas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("path betas must strictly decrease".into()));
    }
    let mut out = Vec::with_capacity(betas.len());
    let mut start: Option<DVector<f64>> = None;
    for &beta in betas {
        let r = RegParams::new(alpha, beta)?;
        let res = solve_warm(p, &r, solver, start.as_ref())?;
        start = (res.status == Status::Converged).then(|| res.solution.clone());
        out.push(res);
    }
    Ok(out)
}
