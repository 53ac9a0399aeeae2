//! The elastic-net functional, its sign-linearized auxiliary form, soft
//! shrinkage and the optimality residual.

use nalgebra::DVector;

use crate::error::{check_len, Error, Result};
use crate::types::{Problem, RegParams, SignPattern};

/// `Kᵀ(Kx − y)`, the gradient of the data-fit term.
pub fn data_gradient(x: &DVector<f64>, p: &Problem) -> Result<DVector<f64>> {
    check_len("x", p.cols(), x.len())?;
    let residual = p.operator() * x - p.data();
    Ok(p.operator().tr_mul(&residual))
}

/// `½‖Kx − y‖² + α‖x‖₁ + (β/2)‖x‖₂²`.
pub fn objective(x: &DVector<f64>, p: &Problem, r: &RegParams) -> Result<f64> {
    check_len("x", p.cols(), x.len())?;
    let fit = 0.5 * (p.operator() * x - p.data()).norm_squared();
    Ok(fit + r.alpha * x.lp_norm(1) + 0.5 * r.beta * x.norm_squared())
}

/// `½‖Kx − y‖² + α⟨x, θ⟩ + (β/2)‖x‖₂²`; never exceeds [`objective`].
pub fn aux_objective(
    x: &DVector<f64>,
    p: &Problem,
    r: &RegParams,
    theta: &SignPattern,
) -> Result<f64> {
    check_len("x", p.cols(), x.len())?;
    check_len("theta", p.cols(), theta.len())?;
    let fit = 0.5 * (p.operator() * x - p.data()).norm_squared();
    Ok(fit + r.alpha * x.dot(&theta.to_vector()) + 0.5 * r.beta * x.norm_squared())
}

/// Componentwise `max(0, |v| − t) · sign(v)`.
pub fn soft_shrink(v: &DVector<f64>, threshold: f64) -> DVector<f64> {
    assert!(threshold >= 0.0, "shrinkage threshold must be nonnegative");
    v.map(|vi| shrink_scalar(vi, threshold))
}

#[inline]
pub(crate) fn shrink_scalar(v: f64, threshold: f64) -> f64 {
    if v > threshold {
        v - threshold
    } else if v < -threshold {
        v + threshold
    } else {
        0.0
    }
}

/// `F(x) = βx − S_α(−Kᵀ(Kx − y))`, which vanishes exactly at the minimizer.
pub fn kkt_residual(x: &DVector<f64>, p: &Problem, r: &RegParams) -> Result<DVector<f64>> {
    if !(r.beta > 0.0) {
        return Err(Error::InvalidParameter(
            "kkt_residual requires beta > 0; use check_optimality".into(),
        ));
    }
    let g = data_gradient(x, p)?;
    Ok(kkt_from_gradient(x, &g, r))
}

pub(crate) fn kkt_from_gradient(x: &DVector<f64>, g: &DVector<f64>, r: &RegParams) -> DVector<f64> {
    DVector::from_iterator(
        x.len(),
        x.iter()
            .zip(g.iter())
            .map(|(&xi, &gi)| r.beta * xi - shrink_scalar(-gi, r.alpha)),
    )
}

/// Sup-norm of the optimality residual.
///
/// For `β > 0` this is `‖F(x)‖_∞`. For `β = 0` the proximal fixed-point
/// form `x − S_α(x − Kᵀ(Kx − y))` is used instead.
pub fn kkt_residual_norm(x: &DVector<f64>, p: &Problem, r: &RegParams) -> Result<f64> {
    let g = data_gradient(x, p)?;
    Ok(kkt_norm_from_gradient(x, &g, r))
}

pub(crate) fn kkt_norm_from_gradient(x: &DVector<f64>, g: &DVector<f64>, r: &RegParams) -> f64 {
    if r.beta > 0.0 {
        kkt_from_gradient(x, g, r).amax()
    } else {
        x.iter()
            .zip(g.iter())
            .map(|(&xi, &gi)| (xi - shrink_scalar(xi - gi, r.alpha)).abs())
            .fold(0.0, f64::max)
    }
}

/// Outcome of the split optimality test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OptimalityCheck {
    /// `(−Kᵀ(Kx−y) − βx)_i = αθ_i` on `θ_i ≠ 0`, within `tol`.
    pub conda_ok: bool,
    /// `|Kᵀ(Kx−y)|_i ≤ α` on `θ_i = 0`, within `tol`.
    pub condb_ok: bool,
    /// Largest violator of the second condition, lowest index on ties.
    pub worst_violation_index: Option<usize>,
}

impl OptimalityCheck {
    pub fn is_optimal(&self) -> bool {
        self.conda_ok && self.condb_ok
    }
}

pub fn check_optimality(
    x: &DVector<f64>,
    p: &Problem,
    r: &RegParams,
    theta: &SignPattern,
    tol: f64,
) -> Result<OptimalityCheck> {
    check_len("theta", p.cols(), theta.len())?;
    let g = data_gradient(x, p)?;
    Ok(check_from_gradient(x, &g, r, theta, tol))
}

pub(crate) fn check_from_gradient(
    x: &DVector<f64>,
    g: &DVector<f64>,
    r: &RegParams,
    theta: &SignPattern,
    tol: f64,
) -> OptimalityCheck {
    let mut conda_ok = true;
    let mut condb_ok = true;
    let mut worst: Option<(usize, f64)> = None;
    for i in 0..x.len() {
        let t = theta.get(i);
        if t != 0 {
            let lhs = -g[i] - r.beta * x[i];
            if (lhs - r.alpha * f64::from(t)).abs() > tol {
                conda_ok = false;
            }
        } else {
            let excess = g[i].abs() - r.alpha;
            if excess > tol {
                condb_ok = false;
            }
            if worst.map_or(true, |(_, w)| excess > w) {
                worst = Some((i, excess));
            }
        }
    }
    OptimalityCheck {
        conda_ok,
        condb_ok,
        worst_violation_index: if condb_ok { None } else { worst.map(|(i, _)| i) },
    }
}

/// `‖Kᵀy‖_∞`: the minimizer is zero iff `α` is at least this value.
pub fn zero_minimizer_threshold(p: &Problem) -> f64 {
    p.adjoint_data().amax()
}
