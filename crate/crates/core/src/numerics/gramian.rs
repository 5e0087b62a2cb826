use nalgebra::DMatrix;

use super::{ensure_finite, ensure_square, expm, symmetrize};
use crate::error::{dim_check, Error, Result};
use crate::Real;

/// Process-noise Gramian `Q = int_0^h e^{A t} G G^T e^{A^T t} dt`.
///
/// Van Loan: with `E = expm([[-A, G G^T], [0, A^T]] h)` the lower-right block
/// is `e^{A^T h}` and `Q = E22^T E12`.
pub fn noise_gramian<T: Real>(a: &DMatrix<T>, g: &DMatrix<T>, h: T) -> Result<DMatrix<T>> {
    ensure_square(a, "A")?;
    let n = a.nrows();
    dim_check(g.nrows() == n && g.ncols() > 0, || {
        format!("G must have {n} rows, got {}x{}", g.nrows(), g.ncols())
    })?;
    ensure_finite(g, "G")?;
    if !(h > T::zero()) || !h.is_finite() {
        return Err(Error::Domain(format!("sampling period must be positive, got {h}")));
    }

    let mut block = DMatrix::<T>::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&(-a * h));
    block.view_mut((0, n), (n, n)).copy_from(&(g * g.transpose() * h));
    block.view_mut((n, n), (n, n)).copy_from(&(a.transpose() * h));
    let e = expm(&block)?;
    let e12 = e.view((0, n), (n, n)).into_owned();
    let e22 = e.view((n, n), (n, n)).into_owned();
    Ok(symmetrize(&(e22.transpose() * e12)))
}
