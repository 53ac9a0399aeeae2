//! Regularized semismooth Newton (RSSN).
//!
//! Each iteration picks the active set `A = {i : |Kᵀ(Kx − y)|_i > α}` and the
//! sign vector `s`, then solves the regularized block system
//!
//! ```text
//! x|_A   = (β I + M_A)⁻¹ (Kᵀy − α s)|_A
//! x|_A^c = 0
//! ```
//!
//! where `M_A` is the principal `A×A` block of `KᵀK`. The iteration stops once
//! `(A, s)` repeats on consecutive steps and the optimality residual is within
//! tolerance. Convergence is only local, so revisiting an earlier `(A, s)` is
//! reported as a cycle instead of looping forever.

use std::collections::HashSet;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::functional::{data_gradient, kkt_norm_from_gradient, objective, zero_minimizer_threshold};
use crate::linalg::GramSystem;
use crate::types::{sign, ActiveSet, Problem, RegParams, SignPattern, SolveResult, Status};

/// Which index set drives the Newton step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActiveSetRule {
    /// `|Kᵀ(Kx − y)|_i > α`
    #[default]
    Standard,
    /// `|x − γKᵀ(Kx − y) − γβx|_i > γα`
    Variant1,
    /// `|x − γKᵀ(Kx − y)|_i > γα`
    Variant2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RssnOptions {
    pub max_iterations: usize,
    /// Sup-norm bound on the optimality residual. `None` means
    /// `1e-10 · ‖Kᵀy‖_∞`.
    pub kkt_tolerance: Option<f64>,
    pub active_set_variant: ActiveSetRule,
    pub gamma: f64,
    pub cycle_detection: bool,
}

impl Default for RssnOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            kkt_tolerance: None,
            active_set_variant: ActiveSetRule::Standard,
            gamma: 1.0,
            cycle_detection: true,
        }
    }
}

/// Default termination tolerance, scaled with `‖Kᵀy‖_∞`.
pub fn default_kkt_tolerance(p: &Problem) -> f64 {
    (1e-10 * zero_minimizer_threshold(p)).max(f64::MIN_POSITIVE)
}

pub fn active_set_standard(x: &DVector<f64>, p: &Problem, r: &RegParams) -> Result<ActiveSet> {
    let g = data_gradient(x, p)?;
    Ok(select(x, &g, r, ActiveSetRule::Standard, 1.0).0)
}

pub fn active_set_variant1(
    x: &DVector<f64>,
    p: &Problem,
    r: &RegParams,
    gamma: f64,
) -> Result<ActiveSet> {
    let g = data_gradient(x, p)?;
    Ok(select(x, &g, r, ActiveSetRule::Variant1, checked_gamma(gamma)?).0)
}

pub fn active_set_variant2(
    x: &DVector<f64>,
    p: &Problem,
    r: &RegParams,
    gamma: f64,
) -> Result<ActiveSet> {
    let g = data_gradient(x, p)?;
    Ok(select(x, &g, r, ActiveSetRule::Variant2, checked_gamma(gamma)?).0)
}

fn checked_gamma(gamma: f64) -> Result<f64> {
    RegParams::new(0.0, 0.0)?.with_gamma(gamma).map(|r| r.gamma)
}

/// Active set and sign vector for the chosen rule, given `g = Kᵀ(Kx − y)`.
pub(crate) fn select(
    x: &DVector<f64>,
    g: &DVector<f64>,
    r: &RegParams,
    rule: ActiveSetRule,
    gamma: f64,
) -> (ActiveSet, SignPattern) {
    let n = x.len();
    let mut idx = Vec::new();
    let mut signs = SignPattern::zeros(n);
    for i in 0..n {
        let (z, thr) = match rule {
            ActiveSetRule::Standard => (-g[i], r.alpha),
            ActiveSetRule::Variant1 => (x[i] - gamma * g[i] - gamma * r.beta * x[i], gamma * r.alpha),
            ActiveSetRule::Variant2 => (x[i] - gamma * g[i], gamma * r.alpha),
        };
        if z.abs() > thr {
            idx.push(i);
            signs.set(i, sign(z));
        }
    }
    (ActiveSet::from_sorted_unchecked(idx), signs)
}

/// One Newton update: solve on `active` with right-hand side `Kᵀy − α s`.
pub fn newton_step(
    active: &ActiveSet,
    signs: &SignPattern,
    p: &Problem,
    r: &RegParams,
) -> Result<DVector<f64>> {
    r.require_positive_beta()?;
    check_len("signs", p.cols(), signs.len())?;
    validate_signs(active, signs)?;
    let sys = GramSystem::new(p);
    step_with(&sys, active, signs, r)
}

pub(crate) fn validate_signs(active: &ActiveSet, signs: &SignPattern) -> Result<()> {
    if signs.support() != *active {
        return Err(crate::Error::InvalidParameter(
            "sign vector must be nonzero exactly on the active set".into(),
        ));
    }
    Ok(())
}

fn step_with(
    sys: &GramSystem,
    active: &ActiveSet,
    signs: &SignPattern,
    r: &RegParams,
) -> Result<DVector<f64>> {
    sys.solve_on(active, r.beta, |i| sys.kty[i] - r.alpha * f64::from(signs.get(i)))
}

/// Cold start from `x = 0`.
pub fn rssn_solve(p: &Problem, r: &RegParams, opts: &RssnOptions) -> Result<SolveResult> {
    rssn_solve_from(p, r, opts, &DVector::zeros(p.cols()))
}

/// Starts from `start`; only its active set and signs matter.
pub fn rssn_solve_from(
    p: &Problem,
    r: &RegParams,
    opts: &RssnOptions,
    start: &DVector<f64>,
) -> Result<SolveResult> {
    r.require_positive_beta()?;
    check_len("start", p.cols(), start.len())?;
    if opts.max_iterations == 0 {
        return Err(crate::Error::InvalidParameter("max_iterations must be >= 1".into()));
    }
    let gamma = checked_gamma(opts.gamma)?;
    let tol = opts.kkt_tolerance.unwrap_or_else(|| default_kkt_tolerance(p));
    if !(tol > 0.0) {
        return Err(crate::Error::InvalidParameter("kkt_tolerance must be > 0".into()));
    }

    let sys = GramSystem::new(p);
    let mut x = start.clone();
    let g = sys.gradient(&x);
    let (mut active, mut signs) = select(&x, &g, r, opts.active_set_variant, gamma);
    let mut visited = HashSet::new();
    visited.insert(signs.clone());

    for iteration in 1..=opts.max_iterations {
        x = match step_with(&sys, &active, &signs, r) {
            Ok(next) => next,
            Err(_) => return finish(p, r, x, iteration, Status::NumericalFailure),
        };
        let g = sys.gradient(&x);
        let (next_active, next_signs) = select(&x, &g, r, opts.active_set_variant, gamma);
        if next_signs == signs {
            let done = finish(p, r, x, iteration, Status::Converged)?;
            if done.kkt_residual_norm <= tol {
                return Ok(done);
            }
            return Ok(SolveResult {
                status: Status::NumericalFailure,
                ..done
            });
        }
        if opts.cycle_detection && !visited.insert(next_signs.clone()) {
            return finish(p, r, x, iteration, Status::CycleDetected);
        }
        active = next_active;
        signs = next_signs;
    }
    finish(p, r, x, opts.max_iterations, Status::MaxIterations)
}

pub(crate) fn finish(
    p: &Problem,
    r: &RegParams,
    x: DVector<f64>,
    iterations: usize,
    status: Status,
) -> Result<SolveResult> {
    let g = data_gradient(&x, p)?;
    Ok(SolveResult {
        kkt_residual_norm: kkt_norm_from_gradient(&x, &g, r),
        objective: objective(&x, p, r)?,
        active_set: ActiveSet::support_of(&x),
        solution: x,
        iterations,
        status,
    })
}
