//! Low-rank Kalman filtering for continuous-time linear systems observed at
//! discrete sampling instants.
//!
//! The filter tracks the dominant invariant subspace of the drift matrix
//! with an Oja flow on the Stiefel manifold and runs a rank-`r` Riccati
//! recursion inside it. Bounded estimation error holds exactly when `r` is
//! at least the number of Hurwitz-unstable modes.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases below fix the scalar to `f64`, which is what the
//! experiment harness and CLI use.

// `!(x < y)` comparisons are intentional: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod complexity;
pub mod error;
pub mod harness;
pub mod kalman;
pub mod lowrank;
pub mod model;
pub mod numerics;
pub mod oja;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub use kalman::{KfState, KfSteady};
pub use lowrank::{ErrorCovariance, LkfState, LkfSteady, LowRankFilter, StabilityReport, Verdict};
pub use model::{ContinuousModel, DiscreteModel, RankTest, SystemDiagnostics};
pub use numerics::Spectrum;
pub use oja::{OjaFlow, ReducedMatrices, StiefelPoint};

pub type Matrix64 = nalgebra::DMatrix<f64>;
pub type Vector64 = nalgebra::DVector<f64>;
pub type ContinuousModel64 = ContinuousModel<f64>;
pub type DiscreteModel64 = DiscreteModel<f64>;
pub type Spectrum64 = Spectrum<f64>;
pub type StiefelPoint64 = StiefelPoint<f64>;
pub type KfState64 = KfState<f64>;
pub type LkfState64 = LkfState<f64>;
pub type LowRankFilter64 = LowRankFilter<f64>;

pub type ContinuousModel32 = ContinuousModel<f32>;
pub type DiscreteModel32 = DiscreteModel<f32>;
pub type LowRankFilter32 = LowRankFilter<f32>;
