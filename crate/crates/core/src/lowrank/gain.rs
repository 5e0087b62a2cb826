use nalgebra::DMatrix;

use crate::error::{dim_check, Error, Result};
use crate::numerics::{spd_solve, symmetrize};
use crate::Real;

fn check_shapes<T: Real>(r: &DMatrix<T>, c_u: &DMatrix<T>, m: &DMatrix<T>) -> Result<()> {
    let k = r.nrows();
    let p = c_u.nrows();
    dim_check(r.shape() == (k, k) && c_u.ncols() == k && m.shape() == (p, p), || {
        format!(
            "gain shapes disagree: R {:?}, C_U {:?}, M {:?}",
            r.shape(),
            c_u.shape(),
            m.shape()
        )
    })
}

/// Low-rank gain `R C_U^T (C_U R C_U^T + M)^{-1}` evaluated with the
/// Sherman-Morrison-Woodbury identity
///
/// `(C_U R C_U^T + M)^{-1} = M^{-1} - M^{-1} C_U (R^{-1} + C_U^T M^{-1} C_U)^{-1} C_U^T M^{-1}`,
///
/// so that with `M^{-1}` precomputed only `r x r` systems are factored.
pub fn lkf_gain<T: Real>(r: &DMatrix<T>, c_u: &DMatrix<T>, m_inv: &DMatrix<T>) -> Result<DMatrix<T>> {
    lkf_gain_at(r, c_u, m_inv, 0)
}

pub(crate) fn lkf_gain_at<T: Real>(
    r: &DMatrix<T>,
    c_u: &DMatrix<T>,
    m_inv: &DMatrix<T>,
    step: usize,
) -> Result<DMatrix<T>> {
    check_shapes(r, c_u, m_inv)?;
    let r_inv = r
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite {
            what: "reduced covariance",
            step,
        })?
        .inverse();
    // W = C_U^T M^{-1} (r x p), K = W C_U (r x r)
    let w = c_u.transpose() * m_inv;
    let k = &w * c_u;
    let j = symmetrize(&(r_inv + &k));
    let jw = spd_solve(&j, &w, "reduced information matrix", step)?;
    Ok(r * (&w - &k * jw))
}

/// Same gain through the `p x p` innovation inverse. Kept as the reference
/// path for checking [`lkf_gain`].
pub fn lkf_gain_direct<T: Real>(r: &DMatrix<T>, c_u: &DMatrix<T>, m: &DMatrix<T>) -> Result<DMatrix<T>> {
    check_shapes(r, c_u, m)?;
    r.clone().cholesky().ok_or(Error::NotPositiveDefinite {
        what: "reduced covariance",
        step: 0,
    })?;
    let rc = r * c_u.transpose();
    let s = symmetrize(&(c_u * &rc + m));
    Ok(spd_solve(&s, &rc.transpose(), "innovation covariance", 0)?.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_output_gives_zero_gain() {
        let r = DMatrix::<f64>::identity(2, 2);
        let f = lkf_gain(&r, &DMatrix::zeros(3, 2), &DMatrix::identity(3, 3)).unwrap();
        assert_eq!(f, DMatrix::zeros(2, 3));
    }

    #[test]
    fn scalar() {
        let one = DMatrix::from_element(1, 1, 1.0_f64);
        let f = lkf_gain(&one, &one, &one).unwrap();
        assert!((f[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((lkf_gain_direct(&one, &one, &one).unwrap()[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_indefinite_r() {
        let r = DMatrix::from_element(1, 1, -1.0);
        let one = DMatrix::from_element(1, 1, 1.0);
        assert!(matches!(
            lkf_gain(&r, &one, &one),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }
}
