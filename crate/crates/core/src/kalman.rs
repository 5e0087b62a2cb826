//! Full-order Kalman filter on the lifted model and its steady state.

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_check, Error, Result};
use crate::model::{check_lifted_reachability, check_observability, DiscreteModel};
use crate::numerics::{self, iterate_to_fixed_point, spd_solve, symmetrize};
use crate::Real;

pub const DEFAULT_STEADY_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct KfState<T: Real> {
    /// `x_{k|k-1}`.
    pub x_pred: DVector<T>,
    /// `P_{k|k-1}`.
    pub p_pred: DMatrix<T>,
    /// `x_{k-1|k-1}`; equals the prior mean before the first update.
    pub x_filt: DVector<T>,
    /// Gain used by the last update (zero before the first).
    pub gain: DMatrix<T>,
    /// Index `k` of the next measurement to process.
    pub step_index: usize,
}

/// `x_{0|-1} = x0`, `P_{0|-1} = sigma0`.
pub fn kf_init<T: Real>(x0: DVector<T>, sigma0: DMatrix<T>) -> Result<KfState<T>> {
    dim_check(sigma0.shape() == (x0.len(), x0.len()), || {
        format!("Sigma0 is {:?}, state has {} entries", sigma0.shape(), x0.len())
    })?;
    numerics::check_psd(&sigma0)?;
    Ok(KfState {
        x_filt: x0.clone(),
        x_pred: x0,
        p_pred: symmetrize(&sigma0),
        gain: DMatrix::zeros(sigma0.nrows(), 0),
        step_index: 0,
    })
}

/// Gain `P C^T (C P C^T + M)^{-1}` through a Cholesky solve.
pub fn kf_gain<T: Real>(p: &DMatrix<T>, dm: &DiscreteModel<T>, step: usize) -> Result<DMatrix<T>> {
    let c = dm.output();
    let cp = c * p;
    let s = symmetrize(&(&cp * c.transpose() + dm.obs_cov()));
    Ok(spd_solve(&s, &cp, "innovation covariance", step)?.transpose())
}

/// `A_d (I - K C) P A_d^T + G_d^2`, symmetrized.
pub fn riccati_update<T: Real>(p: &DMatrix<T>, k: &DMatrix<T>, dm: &DiscreteModel<T>) -> DMatrix<T> {
    let ad = dm.transition();
    let post = p - k * (dm.output() * p);
    symmetrize(&(ad * post * ad.transpose() + dm.process_cov()))
}

/// Measurement update with `y[k]` followed by the one-step prediction.
pub fn kf_step<T: Real>(state: &KfState<T>, y: &DVector<T>, dm: &DiscreteModel<T>) -> Result<KfState<T>> {
    let n = dm.state_dim();
    dim_check(state.x_pred.len() == n && state.p_pred.shape() == (n, n), || {
        format!("state has dimension {}, model {n}", state.x_pred.len())
    })?;
    dim_check(y.len() == dm.output_dim(), || {
        format!("observation has {} entries, expected {}", y.len(), dm.output_dim())
    })?;
    let k = kf_gain(&state.p_pred, dm, state.step_index)?;
    let innovation = y - dm.output() * &state.x_pred;
    let x_filt = &state.x_pred + &k * innovation;
    let x_pred = dm.transition() * &x_filt;
    let p_pred = riccati_update(&state.p_pred, &k, dm);
    Ok(KfState {
        x_pred,
        p_pred,
        x_filt,
        gain: k,
        step_index: state.step_index + 1,
    })
}

#[derive(Debug, Clone)]
pub struct KfSteady<T: Real> {
    /// Steady one-step-ahead covariance `P`.
    pub covariance: DMatrix<T>,
    pub gain: DMatrix<T>,
    /// `A_d (I - K C)`.
    pub closed_loop: DMatrix<T>,
    pub spectral_radius: T,
    pub iterations: usize,
}

/// Steady-state Riccati solution by iterating the covariance recursion from
/// `P_0 = I` until the relative change drops below `tol`.
pub fn kf_steady<T: Real>(dm: &DiscreteModel<T>, tol: T, max_iter: usize) -> Result<KfSteady<T>> {
    if !check_observability(dm.output(), dm.transition())?.full_rank {
        return Err(Error::Detectability("observable"));
    }
    if !check_lifted_reachability(dm)?.full_rank {
        return Err(Error::Detectability("reachable"));
    }
    let n = dm.state_dim();
    let fp = iterate_to_fixed_point(
        DMatrix::identity(n, n),
        |p, k| {
            let gain = kf_gain(p, dm, k)?;
            Ok(riccati_update(p, &gain, dm))
        },
        tol,
        max_iter,
    )?;
    let covariance = fp.value;
    let gain = kf_gain(&covariance, dm, fp.iterations)?;
    let closed_loop = dm.transition() * (DMatrix::identity(n, n) - &gain * dm.output());
    let spectral_radius = numerics::spectral_radius(&closed_loop)?;
    if !(spectral_radius < T::one()) {
        return Err(Error::Unstable {
            spectral_radius: spectral_radius.as_f64(),
        });
    }
    Ok(KfSteady {
        covariance,
        gain,
        closed_loop,
        spectral_radius,
        iterations: fp.iterations,
    })
}
