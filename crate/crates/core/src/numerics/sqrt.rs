use nalgebra::DMatrix;

use super::{ensure_finite, ensure_square, symmetrize};
use crate::error::{Error, Result};
use crate::Real;

/// Checks symmetry within `1e-10 |Q|_F` and returns the symmetric eigen
/// decomposition with eigenvalues in `[-1e-10 |Q|_F, 0]` clamped to zero.
fn psd_eigen<T: Real>(q: &DMatrix<T>) -> Result<(nalgebra::DVector<T>, DMatrix<T>)> {
    ensure_square(q, "PSD input")?;
    ensure_finite(q, "PSD input")?;
    let scale = q.norm();
    let tol = T::tol(1e-10) * scale;
    let asym = (q - q.transpose()).norm();
    if asym > tol {
        return Err(Error::NotSymmetric {
            asymmetry: asym.as_f64(),
            scale: scale.as_f64(),
        });
    }
    let eig = symmetrize(q).symmetric_eigen();
    let min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(T::max_value().unwrap_or(T::zero()), |a, b| a.min(b));
    if min < -tol {
        return Err(Error::NotPsd {
            min_eigenvalue: min.as_f64(),
            scale: scale.as_f64(),
        });
    }
    let vals = eig.eigenvalues.map(|l| l.max(T::zero()));
    Ok((vals, eig.eigenvectors))
}

/// Validates that `q` is symmetric positive semidefinite within tolerance.
pub fn check_psd<T: Real>(q: &DMatrix<T>) -> Result<()> {
    psd_eigen(q).map(|_| ())
}

/// Symmetric PSD square root `B` with `B^2 = Q`.
pub fn psd_sqrt<T: Real>(q: &DMatrix<T>) -> Result<DMatrix<T>> {
    let (vals, vecs) = psd_eigen(q)?;
    let root = vals.map(|l| l.sqrt());
    let b = &vecs * DMatrix::from_diagonal(&root) * vecs.transpose();
    Ok(symmetrize(&b))
}
