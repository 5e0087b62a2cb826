//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable by the filters: `f32` or `f64`.
///
/// Tolerances quoted by the routines are written for `f64`; when the
/// scalar is coarser they are raised to a small multiple of machine
/// epsilon via [`Real::tol`].
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Send + Sync
{
    /// Literal conversion. Panics only if `v` cannot be represented, which
    /// never happens for the finite constants used in this crate.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    /// `requested` clamped from below by `64 * epsilon`.
    #[inline]
    fn tol(requested: f64) -> Self {
        let floor = Self::default_epsilon() * Self::lit(64.0);
        let t = Self::lit(requested);
        if t < floor {
            floor
        } else {
            t
        }
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Send + Sync
{
}
