//! Domain types shared by the solvers, the parameter rules and the generators.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// A finite-dimensional linear inverse problem `K x = y`.
///
/// Holds the operator `K` (m×s), the observed data `y^δ`, and optionally the
/// exact data `y†`, the exact solution `x†` and the noise level `δ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    operator: DMatrix<f64>,
    data: DVector<f64>,
    exact_data: Option<DVector<f64>>,
    exact_solution: Option<DVector<f64>>,
    noise_level: Option<f64>,
}

impl Problem {
    /// Problem with only an operator and observed data.
    pub fn new(operator: DMatrix<f64>, data: DVector<f64>) -> Result<Self> {
        ProblemBuilder::new(operator, data).build()
    }

    pub fn builder(operator: DMatrix<f64>, data: DVector<f64>) -> ProblemBuilder {
        ProblemBuilder::new(operator, data)
    }

    pub fn operator(&self) -> &DMatrix<f64> {
        &self.operator
    }

    pub fn data(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn exact_data(&self) -> Option<&DVector<f64>> {
        self.exact_data.as_ref()
    }

    pub fn exact_solution(&self) -> Option<&DVector<f64>> {
        self.exact_solution.as_ref()
    }

    pub fn noise_level(&self) -> Option<f64> {
        self.noise_level
    }

    /// Number of measurements `m`.
    pub fn rows(&self) -> usize {
        self.operator.nrows()
    }

    /// Number of unknowns `s`.
    pub fn cols(&self) -> usize {
        self.operator.ncols()
    }

    /// `Kᵀ y^δ`.
    pub fn adjoint_data(&self) -> DVector<f64> {
        self.operator.tr_mul(&self.data)
    }

    /// Copy of this problem with different observed data and noise level.
    pub fn with_data(&self, data: DVector<f64>, noise_level: Option<f64>) -> Result<Self> {
        let mut b = ProblemBuilder::new(self.operator.clone(), data);
        b.exact_data = self.exact_data.clone();
        b.exact_solution = self.exact_solution.clone();
        b.noise_level = noise_level;
        b.build()
    }

    pub(crate) fn into_builder(self) -> ProblemBuilder {
        ProblemBuilder {
            operator: self.operator,
            data: self.data,
            exact_data: self.exact_data,
            exact_solution: self.exact_solution,
            noise_level: self.noise_level,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProblemBuilder {
    operator: DMatrix<f64>,
    data: DVector<f64>,
    exact_data: Option<DVector<f64>>,
    exact_solution: Option<DVector<f64>>,
    noise_level: Option<f64>,
}

impl ProblemBuilder {
    pub fn new(operator: DMatrix<f64>, data: DVector<f64>) -> Self {
        Self {
            operator,
            data,
            exact_data: None,
            exact_solution: None,
            noise_level: None,
        }
    }

    pub fn exact_data(mut self, y: DVector<f64>) -> Self {
        self.exact_data = Some(y);
        self
    }

    pub fn exact_solution(mut self, x: DVector<f64>) -> Self {
        self.exact_solution = Some(x);
        self
    }

    pub fn noise_level(mut self, delta: f64) -> Self {
        self.noise_level = Some(delta);
        self
    }

    pub(crate) fn data(mut self, y: DVector<f64>) -> Self {
        self.data = y;
        self
    }

    pub fn build(self) -> Result<Problem> {
        let (m, s) = self.operator.shape();
        if m == 0 || s == 0 {
            return Err(Error::InvalidParameter(format!(
                "operator must be non-empty, got {m}x{s}"
            )));
        }
        check_len("data", m, self.data.len())?;
        if let Some(y) = &self.exact_data {
            check_len("exact_data", m, y.len())?;
        }
        if let Some(x) = &self.exact_solution {
            check_len("exact_solution", s, x.len())?;
        }
        if let Some(delta) = self.noise_level {
            if !(delta >= 0.0) || !delta.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "noise level must be finite and nonnegative, got {delta}"
                )));
            }
            if let Some(y) = &self.exact_data {
                let dist = (&self.data - y).norm();
                // forming y + e rounds at the scale of ‖y‖, not of δ
                let slack = 4.0 * f64::EPSILON * y.norm() * (y.len() as f64).sqrt();
                if dist > delta * (1.0 + 1e-12) + slack {
                    return Err(Error::InvalidParameter(format!(
                        "‖data - exact_data‖ = {dist:e} exceeds noise level {delta:e}"
                    )));
                }
            }
        }
        Ok(Problem {
            operator: self.operator,
            data: self.data,
            exact_data: self.exact_data,
            exact_solution: self.exact_solution,
            noise_level: self.noise_level,
        })
    }
}

/// Regularization configuration.
///
/// `alpha` weighs the ℓ¹ term, `beta` the squared ℓ² term; `eta` is the
/// coupling `alpha = eta * beta` (infinite when `beta = 0`). `tau` is the
/// discrepancy factor and `gamma` the step used by the alternative active sets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegParams {
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub tau: f64,
    pub gamma: f64,
}

impl RegParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be >= 0, got {alpha}")));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be >= 0, got {beta}")));
        }
        let eta = if beta > 0.0 { alpha / beta } else { f64::INFINITY };
        Ok(Self {
            alpha,
            beta,
            eta,
            tau: 1.0,
            gamma: 1.0,
        })
    }

    /// Coupled parameters with `alpha = eta * beta`.
    pub fn coupled(eta: f64, beta: f64) -> Result<Self> {
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta must be >= 0, got {eta}")));
        }
        let mut r = Self::new(eta * beta, beta)?;
        r.eta = eta;
        Ok(r)
    }

    pub fn with_tau(mut self, tau: f64) -> Result<Self> {
        if !(tau >= 1.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau must be >= 1, got {tau}")));
        }
        self.tau = tau;
        Ok(self)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be > 0, got {gamma}")));
        }
        self.gamma = gamma;
        Ok(self)
    }

    pub(crate) fn require_positive_beta(&self) -> Result<()> {
        if self.beta > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(
                "beta must be > 0 for the active-set solvers".into(),
            ))
        }
    }
}

/// Sign vector with entries in {-1, 0, +1}.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SignPattern(Vec<i8>);

impl SignPattern {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn new(entries: Vec<i8>) -> Result<Self> {
        if let Some(bad) = entries.iter().find(|&&e| !(-1..=1).contains(&e)) {
            return Err(Error::InvalidParameter(format!(
                "sign entries must be -1, 0 or 1, got {bad}"
            )));
        }
        Ok(Self(entries))
    }

    /// Elementwise sign of `x` (zero stays zero).
    pub fn of(x: &DVector<f64>) -> Self {
        Self(x.iter().map(|&v| sign(v)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> i8 {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, value: i8) {
        assert!((-1..=1).contains(&value));
        self.0[i] = value;
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    /// Indices with a nonzero sign.
    pub fn support(&self) -> ActiveSet {
        ActiveSet(
            self.0
                .iter()
                .enumerate()
                .filter(|(_, &t)| t != 0)
                .map(|(i, _)| i)
                .collect(),
        )
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(self.0.len(), self.0.iter().map(|&t| t as f64))
    }
}

pub(crate) fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Sorted, duplicate-free index set.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActiveSet(Vec<usize>);

impl ActiveSet {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Validates that `indices` is strictly increasing and below `dim`.
    pub fn new(indices: Vec<usize>, dim: usize) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "active set indices must be strictly increasing".into(),
            ));
        }
        if let Some(&last) = indices.last() {
            if last >= dim {
                return Err(Error::InvalidParameter(format!(
                    "active set index {last} out of bounds for dimension {dim}"
                )));
            }
        }
        Ok(Self(indices))
    }

    /// Sorts and deduplicates.
    pub fn from_unsorted(mut indices: Vec<usize>, dim: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        Self::new(indices, dim)
    }

    pub fn all(dim: usize) -> Self {
        Self((0..dim).collect())
    }

    /// Indices of the nonzero entries of `x`.
    pub fn support_of(x: &DVector<f64>) -> Self {
        Self(
            x.iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(i, _)| i)
                .collect(),
        )
    }

    pub(crate) fn from_sorted_unchecked(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Self(indices)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    /// Copy with `i` inserted at its sorted position.
    pub fn with(&self, i: usize) -> Self {
        let mut v = self.0.clone();
        if let Err(pos) = v.binary_search(&i) {
            v.insert(pos, i);
        }
        Self(v)
    }

    /// Indices in `[0, dim)` not in this set.
    pub fn complement(&self, dim: usize) -> Self {
        Self((0..dim).filter(|&i| !self.contains(i)).collect())
    }
}

/// A consistent triple `(A, x, θ)`: signs of `x` match `θ` on `A`, and both
/// vanish off `A`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsistentTriple {
    active: ActiveSet,
    point: DVector<f64>,
    signs: SignPattern,
}

impl ConsistentTriple {
    pub fn new(active: ActiveSet, point: DVector<f64>, signs: SignPattern) -> Result<Self> {
        check_len("signs", point.len(), signs.len())?;
        if !is_consistent(&active, &point, &signs) {
            return Err(Error::InvalidParameter("triple is not consistent".into()));
        }
        Ok(Self {
            active,
            point,
            signs,
        })
    }

    /// `(supp x, x, sign x)`, which is consistent by construction.
    pub fn from_point(point: DVector<f64>) -> Self {
        let active = ActiveSet::support_of(&point);
        let signs = SignPattern::of(&point);
        Self {
            active,
            point,
            signs,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_point(DVector::zeros(dim))
    }

    pub fn active(&self) -> &ActiveSet {
        &self.active
    }

    pub fn point(&self) -> &DVector<f64> {
        &self.point
    }

    pub fn signs(&self) -> &SignPattern {
        &self.signs
    }

    pub fn into_parts(self) -> (ActiveSet, DVector<f64>, SignPattern) {
        (self.active, self.point, self.signs)
    }
}

/// Exact consistency test.
pub fn is_consistent(active: &ActiveSet, x: &DVector<f64>, theta: &SignPattern) -> bool {
    if x.len() != theta.len() || active.indices().last().is_some_and(|&i| i >= x.len()) {
        return false;
    }
    (0..x.len()).all(|i| {
        if active.contains(i) {
            theta.get(i) != 0 && sign(x[i]) == theta.get(i)
        } else {
            x[i] == 0.0 && theta.get(i) == 0
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Converged,
    MaxIterations,
    CycleDetected,
    NumericalFailure,
}

impl Status {
    pub fn is_converged(self) -> bool {
        self == Status::Converged
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveResult {
    #[serde(serialize_with = "serialize_vector")]
    pub solution: DVector<f64>,
    pub iterations: usize,
    pub active_set: ActiveSet,
    pub objective: f64,
    pub kkt_residual_norm: f64,
    pub status: Status,
}

fn serialize_vector<S: serde::Serializer>(v: &DVector<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

/// Certificate `(w, ξ)` for the source condition `Kᵀw = x† + η ξ`, `ξ ∈ Sign(x†)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceCertificate {
    w: DVector<f64>,
    xi: DVector<f64>,
    w_norm: f64,
}

impl SourceCertificate {
    /// Relative residual allowed in `Kᵀw = x† + η ξ`.
    pub const RESIDUAL_LIMIT: f64 = 1e-10;

    pub fn new(
        operator: &DMatrix<f64>,
        exact_solution: &DVector<f64>,
        eta: f64,
        w: DVector<f64>,
        xi: DVector<f64>,
    ) -> Result<Self> {
        check_len("w", operator.nrows(), w.len())?;
        check_len("xi", operator.ncols(), xi.len())?;
        check_len("exact_solution", operator.ncols(), exact_solution.len())?;
        for (i, (&v, &x)) in xi.iter().zip(exact_solution.iter()).enumerate() {
            let ok = if x != 0.0 {
                v == x.signum()
            } else {
                (-1.0..=1.0).contains(&v)
            };
            if !ok {
                return Err(Error::InvalidParameter(format!(
                    "xi[{i}] = {v} is not in Sign(x†[{i}] = {x})"
                )));
            }
        }
        let target = exact_solution + &xi * eta;
        let residual = relative_residual(&operator.tr_mul(&w), &target);
        if residual > Self::RESIDUAL_LIMIT {
            return Err(Error::SourceCondition {
                residual,
                limit: Self::RESIDUAL_LIMIT,
            });
        }
        let w_norm = w.norm();
        Ok(Self { w, xi, w_norm })
    }

    pub fn w(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn xi(&self) -> &DVector<f64> {
        &self.xi
    }

    pub fn w_norm(&self) -> f64 {
        self.w_norm
    }
}

pub(crate) fn relative_residual(got: &DVector<f64>, target: &DVector<f64>) -> f64 {
    let denom = target.norm();
    let diff = (got - target).norm();
    if denom > 0.0 {
        diff / denom
    } else {
        diff
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn problem_rejects_bad_shapes() {
        let k = DMatrix::<f64>::identity(2, 2);
        assert!(Problem::new(k.clone(), DVector::zeros(3)).is_err());
        assert!(Problem::builder(k.clone(), DVector::zeros(2))
            .exact_solution(DVector::zeros(3))
            .build()
            .is_err());
        assert!(Problem::new(DMatrix::zeros(0, 2), DVector::zeros(0)).is_err());
    }

    #[test]
    fn problem_checks_noise_level() {
        let k = DMatrix::<f64>::identity(2, 2);
        let exact = DVector::from_vec(vec![1.0, 0.0]);
        let noisy = DVector::from_vec(vec![1.0, 0.5]);
        assert!(Problem::builder(k.clone(), noisy.clone())
            .exact_data(exact.clone())
            .noise_level(0.5)
            .build()
            .is_ok());
        assert!(Problem::builder(k, noisy)
            .exact_data(exact)
            .noise_level(0.4)
            .build()
            .is_err());
    }

    #[test]
    fn coupled_params_are_exact() {
        let r = RegParams::coupled(0.3, 1e-3).unwrap();
        assert_eq!(r.alpha, 0.3 * 1e-3);
        assert_eq!(r.eta, 0.3);
        assert!(RegParams::new(-1.0, 1.0).is_err());
        assert!(RegParams::new(1.0, 0.0).unwrap().eta.is_infinite());
        assert!(r.with_tau(0.5).is_err());
        assert!(r.with_gamma(0.0).is_err());
    }

    #[test]
    fn sign_pattern_rejects_out_of_range() {
        assert!(SignPattern::new(vec![1, 0, -1]).is_ok());
        assert!(SignPattern::new(vec![2]).is_err());
    }

    #[test]
    fn active_set_validation() {
        assert!(ActiveSet::new(vec![0, 2, 5], 6).is_ok());
        assert!(ActiveSet::new(vec![0, 2, 2], 6).is_err());
        assert!(ActiveSet::new(vec![3, 1], 6).is_err());
        assert!(ActiveSet::new(vec![6], 6).is_err());
        let a = ActiveSet::from_unsorted(vec![4, 1, 4], 5).unwrap();
        assert_eq!(a.indices(), &[1, 4]);
        assert_eq!(a.with(2).indices(), &[1, 2, 4]);
        assert_eq!(a.complement(5).indices(), &[0, 2, 3]);
    }

    #[test]
    fn consistency_is_exact() {
        let x = DVector::from_vec(vec![1.0, 0.0, -2.0]);
        let a = ActiveSet::new(vec![0, 2], 3).unwrap();
        let t = SignPattern::new(vec![1, 0, -1]).unwrap();
        assert!(ConsistentTriple::new(a.clone(), x.clone(), t).is_ok());
        // sign mismatch
        let t = SignPattern::new(vec![1, 0, 1]).unwrap();
        assert!(ConsistentTriple::new(a.clone(), x.clone(), t).is_err());
        // nonzero sign outside A
        let t = SignPattern::new(vec![1, 1, -1]).unwrap();
        assert!(ConsistentTriple::new(a, x.clone(), t).is_err());
        // zero entry inside A
        let a = ActiveSet::new(vec![0, 1, 2], 3).unwrap();
        let t = SignPattern::new(vec![1, 1, -1]).unwrap();
        assert!(ConsistentTriple::new(a, x, t).is_err());
    }

    #[test]
    fn certificate_checks_subgradient_and_residual() {
        let k = DMatrix::<f64>::identity(2, 2);
        let x = DVector::from_vec(vec![2.0, 0.0]);
        let xi = DVector::from_vec(vec![1.0, 0.0]);
        let w = &x + &xi * 0.5;
        let c = SourceCertificate::new(&k, &x, 0.5, w.clone(), xi.clone()).unwrap();
        assert_eq!(c.w_norm(), 2.5);
        let bad_xi = DVector::from_vec(vec![-1.0, 0.0]);
        assert!(SourceCertificate::new(&k, &x, 0.5, w.clone(), bad_xi).is_err());
        let bad_w = DVector::from_vec(vec![2.5, 1e-3]);
        assert!(matches!(
            SourceCertificate::new(&k, &x, 0.5, bad_w, xi),
            Err(Error::SourceCondition { .. })
        ));
    }
}
