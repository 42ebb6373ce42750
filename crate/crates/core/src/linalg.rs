//! Dense helpers: LU factorization with error reporting, norms and
//! condition numbers.

use nalgebra::{DMatrix, DVector, LU};

use crate::sparse::AssembledMatrix;
use crate::{Error, Real, Result};

/// Dense LU factorization tagged with the operator's name.
#[derive(Debug, Clone)]
pub struct DenseLu<T: Real> {
    lu: LU<T, nalgebra::Dyn, nalgebra::Dyn>,
    name: String,
}

impl<T: Real> DenseLu<T> {
    pub fn new(m: DMatrix<T>, name: &str) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Factorization {
                operator: format!("{name} (not square)"),
            });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Factorization {
                operator: format!("{name} (non-finite entries)"),
            });
        }
        let scale = m.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        let lu = m.lu();
        let tiny = scale * T::default_epsilon() * crate::lit(1e-3);
        let u = lu.u();
        if scale == T::zero() || (0..u.nrows()).any(|i| u[(i, i)].abs() <= tiny) {
            return Err(Error::Factorization {
                operator: name.to_string(),
            });
        }
        Ok(Self {
            lu,
            name: name.to_string(),
        })
    }

    pub fn from_sparse(m: &AssembledMatrix<T>, name: &str) -> Result<Self> {
        Self::new(m.to_dense(), name)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.lu.l().nrows()
    }

    pub fn solve(&self, b: &DVector<T>) -> DVector<T> {
        self.lu
            .solve(b)
            .expect("factorization was checked to be invertible")
    }

    pub fn solve_mat(&self, b: &DMatrix<T>) -> DMatrix<T> {
        self.lu
            .solve(b)
            .expect("factorization was checked to be invertible")
    }

    pub fn inverse(&self) -> DMatrix<T> {
        self.solve_mat(&DMatrix::identity(self.dim(), self.dim()))
    }
}

pub fn singular_values<T: Real>(m: &DMatrix<T>) -> DVector<T> {
    m.clone().svd(false, false).singular_values
}

/// Spectral norm.
pub fn norm2<T: Real>(m: &DMatrix<T>) -> T {
    singular_values(m).max()
}

/// Spectral condition number `sigma_max / sigma_min`.
pub fn cond2<T: Real>(m: &DMatrix<T>) -> T {
    let s = singular_values(m);
    s.max() / s.min()
}

pub fn inf_norm<T: Real>(v: &DVector<T>) -> T {
    v.iter().fold(T::zero(), |a, x| a.max(x.abs()))
}

/// `max |a_ij|`.
pub fn max_abs<T: Real>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |a, x| a.max(x.abs()))
}

/// Inverts a block-diagonal matrix with square blocks of size `block`.
pub fn block_diagonal_inverse<T: Real>(
    m: &AssembledMatrix<T>,
    block: usize,
    name: &str,
) -> Result<AssembledMatrix<T>> {
    let n = m.nrows();
    let mut trips = Vec::with_capacity(n * block);
    for b0 in (0..n).step_by(block) {
        let blk = DMatrix::from_fn(block, block, |i, j| m.get(b0 + i, b0 + j));
        let inv = DenseLu::new(blk, name)?.inverse();
        for j in 0..block {
            for i in 0..block {
                trips.push((b0 + i, b0 + j, inv[(i, j)]));
            }
        }
    }
    Ok(AssembledMatrix::from_triplets(n, n, &trips, m.symmetric()))
}
