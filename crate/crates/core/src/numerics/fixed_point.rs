use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::Real;

#[derive(Debug, Clone)]
pub struct FixedPoint<T: Real> {
    pub value: DMatrix<T>,
    pub iterations: usize,
    /// Relative Frobenius change of the last iteration.
    pub residual: T,
}

/// Iterates `x <- step(x)` until `|x_{k+1} - x_k|_F <= tol |x_k|_F`.
pub fn iterate_to_fixed_point<T, F>(
    init: DMatrix<T>,
    mut step: F,
    tol: T,
    max_iter: usize,
) -> Result<FixedPoint<T>>
where
    T: Real,
    F: FnMut(&DMatrix<T>, usize) -> Result<DMatrix<T>>,
{
    let mut x = init;
    let mut residual = T::max_value().unwrap_or(T::one());
    for k in 0..max_iter {
        let next = step(&x, k)?;
        let scale = x.norm();
        let diff = (&next - &x).norm();
        residual = if scale > T::zero() { diff / scale } else { diff };
        x = next;
        if !residual.is_finite() {
            break;
        }
        if residual <= tol {
            return Ok(FixedPoint {
                value: x,
                iterations: k + 1,
                residual,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: residual.as_f64(),
    })
}
