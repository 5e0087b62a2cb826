//! The low-rank Kalman filter.
//!
//! The one-step-ahead covariance is approximated as `U_k R_k U_k^T` with
//! `U_k` an Oja-flow frame and `R_k` an `r x r` Riccati iterate. Per step
//! the filter
//!
//! 1. advances the frame over one sampling interval (skipped in frozen mode
//!    and at `k = 0`),
//! 2. reduces `A_d`, `C`, `G_d` onto the frame,
//! 3. forms the `r x p` gain through the SMW identity,
//! 4. updates the full-dimensional mean with `U_k F_k`,
//! 5. runs the reduced Riccati recursion.

mod covariance;
mod gain;
mod stability;

pub use covariance::{error_cov_step, error_cov_steady, ErrorCovariance};
pub use gain::{lkf_gain, lkf_gain_direct};
pub use stability::{
    closed_loop_spectrum, lkf_steady, stability_verdict, ClosedLoopSpectrum, LkfSteady,
    StabilityReport, Verdict, STRUCTURE_TOL,
};

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_check, Error, Result};
use crate::model::DiscreteModel;
use crate::numerics::{self, symmetrize};
use crate::oja::{reduce, OjaFlow, StiefelPoint};
use crate::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct LkfState<T: Real> {
    /// `x_{k|k-1}`.
    pub x_pred: DVector<T>,
    /// `R_{k|k-1}`, `r x r`.
    pub r_pred: DMatrix<T>,
    /// Frame used by the last update (`U_0` before the first).
    pub frame: StiefelPoint<T>,
    /// `F` of the last update, `r x p` (empty before the first).
    pub gain: DMatrix<T>,
    /// `x_{k-1|k-1}`.
    pub x_filt: DVector<T>,
    /// Index of the next measurement.
    pub step_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameMode {
    /// Integrate the Oja flow across every sampling interval.
    Tracking,
    /// Keep the initial frame (a precomputed equilibrium).
    Frozen,
}

/// Filter bound to one lifted model, with `M^{-1}` and the Oja flow cached.
#[derive(Debug, Clone)]
pub struct LowRankFilter<T: Real> {
    dm: DiscreteModel<T>,
    flow: OjaFlow<T>,
    m_inv: DMatrix<T>,
    mode: FrameMode,
}

impl<T: Real> LowRankFilter<T> {
    /// `a` is the continuous drift matrix driving the Oja flow.
    pub fn new(dm: DiscreteModel<T>, a: DMatrix<T>, mode: FrameMode) -> Result<Self> {
        dim_check(a.shape() == (dm.state_dim(), dm.state_dim()), || {
            format!("A is {:?}, model state dimension {}", a.shape(), dm.state_dim())
        })?;
        let m_inv = dm
            .obs_cov()
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite {
                what: "observation covariance",
                step: 0,
            })?
            .inverse();
        Ok(Self {
            flow: OjaFlow::new(a)?,
            dm,
            m_inv: symmetrize(&m_inv),
            mode,
        })
    }

    pub fn model(&self) -> &DiscreteModel<T> {
        &self.dm
    }
    pub fn flow(&self) -> &OjaFlow<T> {
        &self.flow
    }
    pub fn mode(&self) -> FrameMode {
        self.mode
    }

    /// `x_{0|-1} = x0`, `R_{0|-1} = sigma0` (must be positive definite).
    pub fn init(&self, x0: DVector<T>, sigma0: DMatrix<T>, frame: StiefelPoint<T>) -> Result<LkfState<T>> {
        let n = self.dm.state_dim();
        let r = frame.rank();
        dim_check(x0.len() == n && frame.frame().nrows() == n && sigma0.shape() == (r, r), || {
            format!(
                "x0 has {} entries, frame {:?}, Sigma0 {:?}; state dimension {n}",
                x0.len(),
                frame.frame().shape(),
                sigma0.shape()
            )
        })?;
        numerics::check_psd(&sigma0)?;
        if sigma0.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite {
                what: "initial reduced covariance",
                step: 0,
            });
        }
        Ok(LkfState {
            x_filt: x0.clone(),
            x_pred: x0,
            r_pred: symmetrize(&sigma0),
            gain: DMatrix::zeros(r, 0),
            frame,
            step_index: 0,
        })
    }

    /// The frame that will be used for the next update.
    pub fn next_frame(&self, state: &LkfState<T>) -> Result<StiefelPoint<T>> {
        if state.step_index > 0 && self.mode == FrameMode::Tracking {
            self.flow.integrate(&state.frame, self.dm.period())
        } else {
            Ok(state.frame.clone())
        }
    }

    pub fn step(&self, state: &LkfState<T>, y: &DVector<T>) -> Result<LkfState<T>> {
        let dm = &self.dm;
        dim_check(state.x_pred.len() == dm.state_dim(), || "state does not match model".into())?;
        dim_check(y.len() == dm.output_dim(), || {
            format!("observation has {} entries, expected {}", y.len(), dm.output_dim())
        })?;
        let k = state.step_index;
        let frame = self.next_frame(state)?;
        let u = frame.frame();
        let rm = reduce(u, dm)?;
        let f = gain::lkf_gain_at(&state.r_pred, &rm.c_u, &self.m_inv, k)?;

        let innovation = y - dm.output() * &state.x_pred;
        let x_filt = &state.x_pred + u * (&f * innovation);
        let x_pred = dm.transition() * &x_filt;

        let post = &state.r_pred - &f * (&rm.c_u * &state.r_pred);
        let r_next = symmetrize(&(&rm.a_u * post * rm.a_u.transpose() + rm.process_cov()));
        if r_next.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite {
                what: "reduced covariance",
                step: k,
            });
        }
        Ok(LkfState {
            x_pred,
            r_pred: r_next,
            frame,
            gain: f,
            x_filt,
            step_index: k + 1,
        })
    }
}

/// One low-rank filter step with the frame tracked by the Oja flow of `a`.
/// Builds the filter on every call; use [`LowRankFilter`] in loops.
pub fn lkf_step<T: Real>(
    state: &LkfState<T>,
    y: &DVector<T>,
    dm: &DiscreteModel<T>,
    a: &DMatrix<T>,
) -> Result<LkfState<T>> {
    LowRankFilter::new(dm.clone(), a.clone(), FrameMode::Tracking)?.step(state, y)
}
