//! Dense kernels shared by the model, filter and analysis modules.
//!
//! Everything here is a pure function of its inputs.

pub(crate) mod eig;
mod expm;
mod fixed_point;
mod gramian;
mod sqrt;
mod subspace;

pub use eig::{
    eig_sorted, eigenvalues_sorted, spectral_radius, spectrum_distance, Spectrum, BORDERLINE_TOL,
};
pub use expm::expm;
pub use fixed_point::{iterate_to_fixed_point, FixedPoint};
pub use gramian::noise_gramian;
pub use sqrt::{check_psd, psd_sqrt};
pub use subspace::{
    dominant_invariant_subspace, dominant_invariant_subspace_with_gap, orthonormalize,
    principal_angles, stiefel_deviation,
};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::Real;

/// Relative threshold used by rank decisions (observability, reachability).
pub const RANK_TOL: f64 = 1e-10;

/// `(M + M^T) / 2`.
pub fn symmetrize<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * T::lit(0.5)
}

pub fn spectral_norm<T: Real>(m: &DMatrix<T>) -> T {
    m.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(T::zero(), |a, b| a.max(b))
}

pub fn trace<T: Real>(m: &DMatrix<T>) -> T {
    let mut acc = T::zero();
    for i in 0..m.nrows().min(m.ncols()) {
        acc += m[(i, i)];
    }
    acc
}

pub(crate) fn ensure_square<T: Real>(m: &DMatrix<T>, name: &str) -> Result<()> {
    if m.nrows() == 0 || m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{name} must be square and non-empty, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn ensure_finite<T: Real>(m: &DMatrix<T>, name: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} has non-finite entries")))
    }
}

/// Solves `S X = B` for symmetric positive definite `S`.
pub(crate) fn spd_solve<T: Real>(
    s: &DMatrix<T>,
    b: &DMatrix<T>,
    what: &'static str,
    step: usize,
) -> Result<DMatrix<T>> {
    let chol = s
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { what, step })?;
    Ok(chol.solve(b))
}
