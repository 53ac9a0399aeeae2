//! Seeded test-problem generators.
//!
//! Random draws use ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`) with
//! standard-normal samples from `rand_distr::StandardNormal`, so a seed gives
//! the same problem on every platform.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Error, Result};
use crate::linalg::operator_norm_estimate;
use crate::types::{Problem, SourceCertificate};

fn normal_vector(len: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_iterator(len, (0..len).map(|_| StandardNormal.sample(&mut *rng)))
}

/// Gaussian `m × s` operator with unit columns and unit spikes at every
/// index divisible by `spike_period`. Entries are drawn column by column.
pub fn gen_gaussian(m: usize, s: usize, spike_period: usize, seed: u64) -> Result<Problem> {
    if m == 0 || s == 0 {
        return Err(Error::InvalidParameter("m and s must be >= 1".into()));
    }
    if spike_period == 0 || spike_period > s {
        return Err(Error::InvalidParameter(format!(
            "spike_period must lie in [1, {s}], got {spike_period}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut k = DMatrix::from_iterator(m, s, (0..m * s).map(|_| StandardNormal.sample(&mut rng)));
    for mut col in k.column_iter_mut() {
        let n = col.norm();
        col /= n;
    }
    let x = DVector::from_fn(s, |i, _| if i % spike_period == 0 { 1.0 } else { 0.0 });
    exact_problem(k, x)
}

fn exact_problem(k: DMatrix<f64>, x: DVector<f64>) -> Result<Problem> {
    let y = &k * &x;
    Problem::builder(k, y.clone())
        .exact_data(y)
        .exact_solution(x)
        .noise_level(0.0)
        .build()
}

/// Copies columns `0..s/2` over columns `s/2..s` and recomputes the exact data.
pub fn make_rank_deficient(p: &Problem) -> Result<Problem> {
    let s = p.cols();
    if s % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "rank-deficient construction needs an even column count, got {s}"
        )));
    }
    let x = p.exact_solution().ok_or_else(|| {
        Error::InvalidParameter("rank-deficient construction needs an exact solution".into())
    })?;
    let mut k = p.operator().clone();
    let h = s / 2;
    for j in 0..h {
        let src = k.column(j).clone_owned();
        k.set_column(j + h, &src);
    }
    exact_problem(k, x.clone())
}

/// Adds a Gaussian perturbation of norm exactly `rel_level · ‖y†‖`.
///
/// The current data is taken as exact when no exact data is stored.
pub fn add_noise(p: &Problem, rel_level: f64, seed: u64) -> Result<Problem> {
    if !(rel_level >= 0.0 && rel_level.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise level must be finite and >= 0, got {rel_level}"
        )));
    }
    let exact = p.exact_data().unwrap_or(p.data()).clone();
    let delta = rel_level * exact.norm();
    let data = if delta == 0.0 {
        exact.clone()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = normal_vector(exact.len(), &mut rng);
        let scale = delta / g.norm();
        &exact + g * scale
    };
    let mut b = p.clone().into_builder().data(data).exact_data(exact).noise_level(delta);
    if let Some(x) = p.exact_solution() {
        b = b.exact_solution(x.clone());
    }
    b.build()
}

/// The `n × n` banded Gaussian Toeplitz factor before scaling.
pub fn blur_factor(n: usize, band: usize, sigma: f64) -> DMatrix<f64> {
    let c = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    DMatrix::from_fn(n, n, |i, j| {
        let d = i.abs_diff(j);
        if d < band {
            c * (-((d * d) as f64) / (2.0 * sigma * sigma)).exp()
        } else {
            0.0
        }
    })
}

/// Separable Gaussian blur `K = T ⊗ T` on an `n × n` image, scaled so the
/// power-iteration estimate of `‖K‖₂` is one.
///
/// The exact image has unit pixels at `(i, j)` with `i` and `j` multiples of
/// `⌈n/5⌉`, stored row-major (`i·n + j`).
pub fn gen_blur(n: usize, band: usize, sigma: f64) -> Result<Problem> {
    if n == 0 || band == 0 || band > n {
        return Err(Error::InvalidParameter(format!(
            "blur needs n >= 1 and 1 <= band <= n, got n = {n}, band = {band}"
        )));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
    }
    let t = blur_factor(n, band, sigma);
    let k = t.kronecker(&t);
    let norm = operator_norm_estimate(&k, 100);
    let k = k / norm;
    let step = n.div_ceil(5);
    let x = DVector::from_fn(n * n, |idx, _| {
        let (i, j) = (idx / n, idx % n);
        if i % step == 0 && j % step == 0 {
            1.0
        } else {
            0.0
        }
    });
    exact_problem(k, x)
}

#[derive(Clone, Debug)]
pub struct SourceInstance {
    pub problem: Problem,
    pub cert: SourceCertificate,
}

/// Builds `x†` on `support` and a certificate `w` with `Kᵀw = x† + η ξ`,
/// `ξ = sign(x†)`.
///
/// `magnitudes` defaults to all ones. The construction is deterministic, so
/// `seed` is accepted for interface symmetry with the other generators and
/// has no effect.
pub fn make_source_instance(
    k: &DMatrix<f64>,
    support: &[usize],
    eta: f64,
    magnitudes: Option<&[f64]>,
    _seed: u64,
) -> Result<SourceInstance> {
    let s = k.ncols();
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!("eta must be > 0, got {eta}")));
    }
    let ones = vec![1.0; support.len()];
    let mags = magnitudes.unwrap_or(&ones);
    check_len("magnitudes", support.len(), mags.len())?;
    if mags.iter().any(|&m| m == 0.0 || !m.is_finite()) {
        return Err(Error::InvalidParameter("magnitudes must be finite and nonzero".into()));
    }
    let mut x = DVector::zeros(s);
    for (&i, &m) in support.iter().zip(mags) {
        if i >= s {
            return Err(Error::InvalidParameter(format!("support index {i} out of range")));
        }
        if x[i] != 0.0 {
            return Err(Error::InvalidParameter(format!("support index {i} repeated")));
        }
        x[i] = m;
    }
    let xi = x.map(f64::signum).zip_map(&x, |sg, v| if v == 0.0 { 0.0 } else { sg });
    let target = &x + &xi * eta;
    let kt = k.transpose();
    let w = kt
        .svd(true, true)
        .solve(&target, 1e-12 * k.amax().max(f64::MIN_POSITIVE))
        .map_err(|e| Error::NumericalFailure(format!("SVD least squares failed: {e}")))?;
    let cert = SourceCertificate::new(k, &x, eta, w, xi)?;
    let problem = exact_problem(k.clone(), x)?;
    Ok(SourceInstance { problem, cert })
}
