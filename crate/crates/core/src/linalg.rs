//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{GeomError, Result};
use crate::scalar::{lit, to_f64, Real};

pub(crate) fn coords_f64<T: Real>(v: &DVector<T>) -> Vec<f64> {
    v.iter().map(|&x| to_f64(x)).collect()
}

pub fn symmetrize<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * lit::<T>(0.5)
}

pub(crate) fn all_finite<T: Real>(m: &DMatrix<T>) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Solves `m x = rhs` by LU; fails with [`GeomError::Singular`].
pub fn solve<T: Real>(
    m: &DMatrix<T>,
    rhs: &DMatrix<T>,
    what: &'static str,
    at: &DVector<T>,
) -> Result<DMatrix<T>> {
    m.clone()
        .lu()
        .solve(rhs)
        .filter(all_finite)
        .ok_or_else(|| GeomError::Singular {
            what,
            at: coords_f64(at),
        })
}

pub fn solve_vec<T: Real>(
    m: &DMatrix<T>,
    rhs: &DVector<T>,
    what: &'static str,
    at: &DVector<T>,
) -> Result<DVector<T>> {
    m.clone()
        .lu()
        .solve(rhs)
        .filter(|x| x.iter().all(|c| c.is_finite()))
        .ok_or_else(|| GeomError::Singular {
            what,
            at: coords_f64(at),
        })
}

pub fn is_positive_definite<T: Real>(m: &DMatrix<T>) -> bool {
    m.clone().cholesky().is_some()
}

/// `aᵀ m b`
pub fn bilinear<T: Real>(m: &DMatrix<T>, a: &DVector<T>, b: &DVector<T>) -> T {
    a.dot(&(m * b))
}

/// Sup norm; zero for empty inputs.
pub fn sup_norm<T: Real>(v: &DVector<T>) -> T {
    v.amax()
}
