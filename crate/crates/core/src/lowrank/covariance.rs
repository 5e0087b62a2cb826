use nalgebra::DMatrix;

use crate::error::{dim_check, Error, Result};
use crate::model::DiscreteModel;
use crate::numerics::{self, symmetrize};
use crate::Real;

/// True one-step-ahead error covariance `V_{k+1|k}` of the low-rank filter.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCovariance<T: Real>(DMatrix<T>);

impl<T: Real> ErrorCovariance<T> {
    pub fn new(v: DMatrix<T>) -> Result<Self> {
        numerics::check_psd(&v)?;
        Ok(Self(symmetrize(&v)))
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<T> {
        self.0
    }

    pub fn trace(&self) -> T {
        numerics::trace(&self.0)
    }
}

fn closed_loop<T: Real>(u: &DMatrix<T>, f: &DMatrix<T>, dm: &DiscreteModel<T>) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let n = dm.state_dim();
    dim_check(
        u.nrows() == n && f.nrows() == u.ncols() && f.ncols() == dm.output_dim(),
        || format!("U {:?} and F {:?} do not fit the model", u.shape(), f.shape()),
    )?;
    let ad = dm.transition();
    let uf = u * f;
    let phi = ad * (DMatrix::identity(n, n) - &uf * dm.output());
    let adk = ad * uf;
    let forcing = dm.process_cov() + &adk * dm.obs_cov() * adk.transpose();
    Ok((phi, symmetrize(&forcing)))
}

/// `A_d (I - U F C) V (I - U F C)^T A_d^T + G_d^2 + A_d U F M F^T U^T A_d^T`.
///
/// The measurement noise enters through the innovation before the
/// prediction, hence the `A_d` factors on the last term. With `r = n` and the
/// optimal gain this reproduces the Kalman covariance recursion exactly.
/// Cost is `O(n^3)`; this is an analysis tool, not part of the filter.
pub fn error_cov_step<T: Real>(
    v: &ErrorCovariance<T>,
    u: &DMatrix<T>,
    f: &DMatrix<T>,
    dm: &DiscreteModel<T>,
) -> Result<ErrorCovariance<T>> {
    dim_check(v.0.nrows() == dm.state_dim(), || "V does not match the model".into())?;
    let (phi, forcing) = closed_loop(u, f, dm)?;
    Ok(ErrorCovariance(symmetrize(&(&phi * &v.0 * phi.transpose() + forcing))))
}

/// Fixed point of [`error_cov_step`] for a constant frame and gain.
///
/// Uses the doubling form of the same recursion, `V <- V + Phi V Phi^T`,
/// `Phi <- Phi^2`, which sums `2^k` steps per pass.
pub fn error_cov_steady<T: Real>(
    u: &DMatrix<T>,
    f: &DMatrix<T>,
    dm: &DiscreteModel<T>,
    tol: T,
    max_iter: usize,
) -> Result<ErrorCovariance<T>> {
    let (mut phi, mut v) = closed_loop(u, f, dm)?;
    let rho = numerics::spectral_radius(&phi)?;
    if !(rho < T::one()) {
        return Err(Error::Unstable {
            spectral_radius: rho.as_f64(),
        });
    }
    for _ in 0..max_iter {
        let inc = &phi * &v * phi.transpose();
        let done = inc.norm() <= tol * v.norm();
        v = symmetrize(&(v + inc));
        if done {
            return Ok(ErrorCovariance(v));
        }
        phi = &phi * &phi;
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gain_is_open_loop_lyapunov_step() {
        let ad = DMatrix::from_row_slice(2, 2, &[0.9, 0.2, 0.0, 1.1]);
        let dm = DiscreteModel::new(
            ad.clone(),
            DMatrix::identity(2, 2) * 0.5,
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            0.1,
        )
        .unwrap();
        let v = ErrorCovariance::new(DMatrix::identity(2, 2)).unwrap();
        let u = DMatrix::identity(2, 1);
        let next = error_cov_step(&v, &u, &DMatrix::zeros(1, 2), &dm).unwrap();
        let want = &ad * ad.transpose() + DMatrix::identity(2, 2) * 0.25;
        assert!((next.matrix() - want).norm() < 1e-15);
    }

    #[test]
    fn rejects_unstable_loop() {
        let dm = DiscreteModel::new(
            DMatrix::from_element(1, 1, 1.2),
            DMatrix::identity(1, 1),
            DMatrix::identity(1, 1),
            DMatrix::identity(1, 1),
            0.1,
        )
        .unwrap();
        let u = DMatrix::identity(1, 1);
        assert!(matches!(
            error_cov_steady(&u, &DMatrix::zeros(1, 1), &dm, 1e-12, 100),
            Err(Error::Unstable { .. })
        ));
    }
}
