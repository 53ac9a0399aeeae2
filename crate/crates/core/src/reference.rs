//! Slow but simple oracles used to cross-check the active-set solvers.

use nalgebra::DVector;

use crate::error::{check_len, Error, Result};
use crate::functional::{objective, shrink_scalar};
use crate::linalg::operator_norm_estimate;
use crate::rssn::finish;
use crate::types::{Problem, RegParams, SolveResult, Status};

/// Power iterations used for the ISTA step size.
pub const NORM_ESTIMATE_STEPS: usize = 50;

/// Proximal map of `step · (α‖·‖₁ + β/2 ‖·‖²)`: `S_{step·α}(v) / (1 + step·β)`.
pub fn prox_elastic_net(v: &DVector<f64>, step: f64, r: &RegParams) -> DVector<f64> {
    assert!(step > 0.0, "prox step must be positive");
    let t = step * r.alpha;
    let scale = 1.0 + step * r.beta;
    v.map(|vi| shrink_scalar(vi, t) / scale)
}

/// Proximal gradient with the fixed step `0.9 / ‖KᵀK‖₂`.
///
/// Stops once `‖x_{k+1} − x_k‖_∞ ≤ tol · max(1, ‖x_k‖_∞)`. Works for `β = 0`.
pub fn ista_solve(p: &Problem, r: &RegParams, tol: f64, max_iter: usize) -> Result<SolveResult> {
    run_ista(p, r, tol, max_iter, None)
}

/// As [`ista_solve`], also returning the objective after every iteration
/// (starting with the value at `x = 0`).
pub fn ista_solve_with_history(
    p: &Problem,
    r: &RegParams,
    tol: f64,
    max_iter: usize,
) -> Result<(SolveResult, Vec<f64>)> {
    let mut history = Vec::new();
    let res = run_ista(p, r, tol, max_iter, Some(&mut history))?;
    Ok((res, history))
}

fn run_ista(
    p: &Problem,
    r: &RegParams,
    tol: f64,
    max_iter: usize,
    mut history: Option<&mut Vec<f64>>,
) -> Result<SolveResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("ISTA tolerance must be > 0".into()));
    }
    let k = p.operator();
    let norm = operator_norm_estimate(k, NORM_ESTIMATE_STEPS);
    let mut x = DVector::zeros(p.cols());
    if let Some(h) = history.as_deref_mut() {
        h.push(objective(&x, p, r)?);
    }
    if norm == 0.0 {
        return finish(p, r, x, 0, Status::Converged);
    }
    let step = 0.9 / (norm * norm);
    let gram = k.tr_mul(k);
    let kty = p.adjoint_data();
    for it in 1..=max_iter {
        let g = &gram * &x - &kty;
        let next = prox_elastic_net(&(&x - g * step), step, r);
        let change = (&next - &x).amax();
        let scale = x.amax().max(1.0);
        x = next;
        if let Some(h) = history.as_deref_mut() {
            h.push(objective(&x, p, r)?);
        }
        if !x.iter().all(|v| v.is_finite()) {
            return finish(p, r, x, it, Status::NumericalFailure);
        }
        if change <= tol * scale {
            return finish(p, r, x, it, Status::Converged);
        }
    }
    finish(p, r, x, max_iter, Status::MaxIterations)
}

/// Minimizer for `K = I`: `S_α(y) / (1 + β)`.
pub fn diagonal_closed_form(y: &DVector<f64>, r: &RegParams) -> DVector<f64> {
    y.map(|yi| shrink_scalar(yi, r.alpha) / (1.0 + r.beta))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineMinimizer {
    pub t_star: f64,
    pub x_star: DVector<f64>,
}

/// Minimizes `η‖b + t d‖₁ + ½‖b + t d‖₂²` over `t ∈ [lo, hi]`.
///
/// Golden-section search locates the minimizer; the quadratic piece it lies
/// on (or the kink it sits at) is then identified from the signs and solved
/// exactly.
pub fn r_eta_minimizer_on_line(
    base: &DVector<f64>,
    direction: &DVector<f64>,
    eta: f64,
    search_interval: (f64, f64),
) -> Result<LineMinimizer> {
    check_len("direction", base.len(), direction.len())?;
    let (lo, hi) = search_interval;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidParameter(format!("bad search interval [{lo}, {hi}]")));
    }
    if !(eta >= 0.0) {
        return Err(Error::InvalidParameter("eta must be >= 0".into()));
    }
    let dd = direction.norm_squared();
    if dd == 0.0 {
        return Err(Error::InvalidParameter("direction must be nonzero".into()));
    }
    let f = |t: f64| {
        let x = base + direction * t;
        eta * x.lp_norm(1) + 0.5 * x.norm_squared()
    };

    let t_golden = golden_section(&f, lo, hi);
    let edge = 1e-9 * (hi - lo);
    if t_golden - lo <= edge && slope(base, direction, eta, lo, -1.0) > 0.0 {
        return Err(Error::BracketFailure(format!("minimizer lies below {lo}")));
    }
    if hi - t_golden <= edge && slope(base, direction, eta, hi, 1.0) < 0.0 {
        return Err(Error::BracketFailure(format!("minimizer lies above {hi}")));
    }

    let t_star = refine(base, direction, eta, lo, hi, t_golden).unwrap_or(t_golden);
    Ok(LineMinimizer {
        t_star,
        x_star: base + direction * t_star,
    })
}

fn golden_section(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-13 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// One-sided derivative at `t`; `side` is `+1` for the right, `−1` for the left.
fn slope(base: &DVector<f64>, dir: &DVector<f64>, eta: f64, t: f64, side: f64) -> f64 {
    let mut s = 0.0;
    for (&b, &d) in base.iter().zip(dir.iter()) {
        let v = b + t * d;
        // a kink computed as -b/d may miss zero by rounding
        let zero = v.abs() <= 4.0 * f64::EPSILON * (b.abs() + (t * d).abs());
        let sg = if !zero { v.signum() } else { (side * d).signum() };
        s += d * (v + eta * sg);
    }
    s
}

/// Exact minimizer over the pieces between kinks `t = −b_i/d_i`.
fn refine(base: &DVector<f64>, dir: &DVector<f64>, eta: f64, lo: f64, hi: f64, hint: f64) -> Option<f64> {
    let mut kinks: Vec<f64> = base
        .iter()
        .zip(dir.iter())
        .filter(|(_, &d)| d != 0.0)
        .map(|(&b, &d)| -b / d)
        .filter(|&t| t > lo && t < hi)
        .collect();
    kinks.sort_by(f64::total_cmp);
    kinks.dedup();
    let dd = dir.norm_squared();
    let bd = base.dot(dir);

    let mut bounds = Vec::with_capacity(kinks.len() + 2);
    bounds.push(lo);
    bounds.extend_from_slice(&kinks);
    bounds.push(hi);
    let mut best: Option<f64> = None;
    let mut consider = |t: f64| {
        if best.map_or(true, |b: f64| (t - hint).abs() < (b - hint).abs()) {
            best = Some(t);
        }
    };
    for w in bounds.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let sd: f64 = base
            .iter()
            .zip(dir.iter())
            .map(|(&bi, &di)| {
                let v = bi + mid * di;
                if v > 0.0 {
                    di
                } else if v < 0.0 {
                    -di
                } else {
                    0.0
                }
            })
            .sum();
        let t = -(bd + eta * sd) / dd;
        if t >= a && t <= b {
            consider(t);
        }
    }
    for &k in &kinks {
        if slope(base, dir, eta, k, -1.0) <= 0.0 && slope(base, dir, eta, k, 1.0) >= 0.0 {
            consider(k);
        }
    }
    best
}
