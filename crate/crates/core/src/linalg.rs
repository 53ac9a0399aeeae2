//! Dense linear algebra shared by the active-set solvers.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::types::{ActiveSet, Problem};

/// Precomputed `KᵀK` and `Kᵀy` for one problem.
#[derive(Clone, Debug)]
pub(crate) struct GramSystem {
    pub gram: DMatrix<f64>,
    pub kty: DVector<f64>,
}

impl GramSystem {
    pub fn new(p: &Problem) -> Self {
        Self {
            gram: p.operator().tr_mul(p.operator()),
            kty: p.adjoint_data(),
        }
    }

    pub fn dim(&self) -> usize {
        self.kty.len()
    }

    /// `Kᵀ(Kx − y) = KᵀK x − Kᵀy`, touching only the nonzero columns of `x`.
    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = -&self.kty;
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                g.axpy(xj, &self.gram.column(j), 1.0);
            }
        }
        g
    }

    /// `β I + M_A` for the principal submatrix of `KᵀK` indexed by `order`.
    pub fn shifted_submatrix(&self, order: &[usize], beta: f64) -> DMatrix<f64> {
        let n = order.len();
        DMatrix::from_fn(n, n, |r, c| {
            let v = self.gram[(order[r], order[c])];
            if r == c {
                v + beta
            } else {
                v
            }
        })
    }

    /// Solves `(β I + M_A) z = rhs_A` and scatters `z` into a length-s vector.
    pub fn solve_on(
        &self,
        active: &ActiveSet,
        beta: f64,
        rhs: impl Fn(usize) -> f64,
    ) -> Result<DVector<f64>> {
        let mut x = DVector::zeros(self.dim());
        if active.is_empty() {
            return Ok(x);
        }
        let idx = active.indices();
        let chol = Cholesky::new(self.shifted_submatrix(idx, beta)).ok_or_else(|| {
            Error::NumericalFailure(format!(
                "Cholesky of beta*I + M_A failed (|A| = {}, beta = {beta:e})",
                idx.len()
            ))
        })?;
        let b = DVector::from_iterator(idx.len(), idx.iter().map(|&i| rhs(i)));
        let z = chol.solve(&b);
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("non-finite restricted solve".into()));
        }
        for (k, &i) in idx.iter().enumerate() {
            x[i] = z[k];
        }
        Ok(x)
    }
}

/// Cholesky factor of `β I + M_A` kept up to date by row/column insertion
/// and deletion as `A` changes one index at a time.
#[derive(Clone, Debug)]
pub(crate) struct UpdatableFactor {
    order: Vec<usize>,
    chol: Option<Cholesky<f64, Dyn>>,
}

impl UpdatableFactor {
    pub fn new() -> Self {
        Self {
            order: Vec::new(),
            chol: None,
        }
    }

    /// Brings the factor to `active` and solves the restricted system.
    pub fn solve_on(
        &mut self,
        sys: &GramSystem,
        active: &ActiveSet,
        beta: f64,
        rhs: impl Fn(usize) -> f64,
    ) -> Result<DVector<f64>> {
        if self.sync(sys, active, beta).is_err() {
            self.refactor(sys, active, beta)?;
        }
        let mut x = DVector::zeros(sys.dim());
        let Some(chol) = &self.chol else {
            return Ok(x);
        };
        let b = DVector::from_iterator(self.order.len(), self.order.iter().map(|&i| rhs(i)));
        let z = chol.solve(&b);
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("non-finite restricted solve".into()));
        }
        for (k, &i) in self.order.iter().enumerate() {
            x[i] = z[k];
        }
        Ok(x)
    }

    fn refactor(&mut self, sys: &GramSystem, active: &ActiveSet, beta: f64) -> Result<()> {
        self.order = active.indices().to_vec();
        self.chol = if self.order.is_empty() {
            None
        } else {
            Some(
                Cholesky::new(sys.shifted_submatrix(&self.order, beta)).ok_or_else(|| {
                    Error::NumericalFailure("Cholesky of beta*I + M_A failed".into())
                })?,
            )
        };
        Ok(())
    }

    fn sync(&mut self, sys: &GramSystem, active: &ActiveSet, beta: f64) -> std::result::Result<(), ()> {
        // removals first, from the back so positions stay valid
        let mut pos = self.order.len();
        while pos > 0 {
            pos -= 1;
            if !active.contains(self.order[pos]) {
                self.order.remove(pos);
                self.chol = match self.chol.take() {
                    Some(c) if c.l_dirty().nrows() > 1 => Some(c.remove_column(pos)),
                    _ => None,
                };
            }
        }
        for i in active.iter() {
            if self.order.contains(&i) {
                continue;
            }
            let mut col = DVector::zeros(self.order.len() + 1);
            for (k, &j) in self.order.iter().enumerate() {
                col[k] = sys.gram[(j, i)];
            }
            col[self.order.len()] = sys.gram[(i, i)] + beta;
            let next = match self.chol.take() {
                Some(c) => c.insert_column(self.order.len(), col),
                None => Cholesky::new(DMatrix::from_element(1, 1, col[0])).ok_or(())?,
            };
            let n = next.l_dirty().nrows();
            if !(next.l_dirty()[(n - 1, n - 1)] > 0.0) {
                return Err(());
            }
            self.chol = Some(next);
            self.order.push(i);
        }
        Ok(())
    }
}

/// Estimate of `‖K‖₂` by power iteration on `KᵀK` from the normalized
/// all-ones vector.
pub fn operator_norm_estimate(k: &DMatrix<f64>, steps: usize) -> f64 {
    let s = k.ncols();
    let mut v = DVector::from_element(s, 1.0 / (s as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..steps {
        let w = k.tr_mul(&(k * &v));
        lambda = w.norm();
        if lambda == 0.0 {
            return 0.0;
        }
        v = w / lambda;
    }
    lambda.sqrt()
}
