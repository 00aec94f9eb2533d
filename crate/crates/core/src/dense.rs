//! Small dense helpers backing the oracle operations.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};
use crate::graph::SparseSymMatrix;

/// Largest dimension the dense oracles accept by default.
pub const DEFAULT_ORACLE_LIMIT: usize = 2000;

pub(crate) fn check_size(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        Err(Error::OracleTooLarge { n, limit })
    } else {
        Ok(())
    }
}

pub(crate) fn check_same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        Err(Error::Dimension {
            expected: a,
            found: b,
        })
    } else {
        Ok(())
    }
}

pub(crate) fn cholesky(a: &SparseSymMatrix) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(a.to_dense())
        .ok_or_else(|| Error::Singular("dense Cholesky failed: matrix not positive definite".into()))
}

/// Extremal eigenvalues of the pencil `(A, B)`, i.e. of `B⁻¹A`, via
/// `B = R Rᵀ` and the symmetric matrix `R⁻¹ A R⁻ᵀ`.
pub(crate) fn generalized_extremes(a: &SparseSymMatrix, b: &SparseSymMatrix) -> Result<(f64, f64)> {
    let chol = cholesky(b)?;
    let r = chol.l();
    let ad = a.to_dense();
    let left = r
        .solve_lower_triangular(&ad)
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
    let m: DMatrix<f64> = r
        .solve_lower_triangular(&left.transpose())
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
    let m = (&m + m.transpose()) * 0.5;
    let ev = m.symmetric_eigenvalues();
    let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}
