//! Oja flow `eps dU/dt = (I - U U^T) A U` on the Stiefel manifold.
//!
//! Integration is explicit Euler followed by a thin-QR retraction, so every
//! exposed frame is orthonormal to rounding error. The stable equilibria
//! span the dominant invariant subspace of `A`.

use nalgebra::DMatrix;

use crate::error::{dim_check, Error, Result};
use crate::model::DiscreteModel;
use crate::numerics::{self, expm, orthonormalize, principal_angles, stiefel_deviation};
use crate::Real;

pub const DEFAULT_EPSILON: f64 = 1.0;
/// Upper bound on `(dt / eps) |A|_2` for one Euler step.
pub const MAX_STEP_GAIN: f64 = 0.5;
pub const DEFAULT_CONVERGENCE_TOL: f64 = 1e-8;

/// An orthonormal `n x r` frame with its integration settings.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint<T: Real> {
    frame: DMatrix<T>,
    epsilon: T,
    substeps: usize,
}

impl<T: Real> StiefelPoint<T> {
    pub fn new(frame: DMatrix<T>, epsilon: T, substeps: usize) -> Result<Self> {
        let (n, r) = frame.shape();
        if r == 0 || r > n {
            return Err(Error::Dimension(format!("frame must be n x r with 1 <= r <= n, got {n}x{r}")));
        }
        let dev = stiefel_deviation(&frame);
        if dev > T::tol(1e-8) {
            return Err(Error::NotOrthonormal { deviation: dev.as_f64() });
        }
        if !(epsilon > T::zero() && epsilon <= T::one()) {
            return Err(Error::Config(format!("epsilon must lie in (0, 1], got {epsilon}")));
        }
        if substeps == 0 {
            return Err(Error::Config("substeps must be at least 1".into()));
        }
        Ok(Self {
            frame,
            epsilon,
            substeps,
        })
    }

    /// `[I_r; 0]`.
    pub fn leading(n: usize, r: usize, epsilon: T, substeps: usize) -> Result<Self> {
        if r == 0 || r > n {
            return Err(Error::Config(format!("rank {r} outside 1..={n}")));
        }
        Self::new(DMatrix::identity(n, r), epsilon, substeps)
    }

    pub fn frame(&self) -> &DMatrix<T> {
        &self.frame
    }
    pub fn epsilon(&self) -> T {
        self.epsilon
    }
    pub fn substeps(&self) -> usize {
        self.substeps
    }
    pub fn rank(&self) -> usize {
        self.frame.ncols()
    }

    /// Same settings, new frame (orthonormality is re-checked).
    pub fn with_frame(&self, frame: DMatrix<T>) -> Result<Self> {
        Self::new(frame, self.epsilon, self.substeps)
    }
}

/// One row of a convergence trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OjaTraceRow<T: Real> {
    pub interval: usize,
    pub residual: T,
    /// Largest principal angle to a reference frame, when one was given.
    pub max_angle: Option<T>,
}

#[derive(Debug, Clone)]
pub struct OjaConvergence<T: Real> {
    pub point: StiefelPoint<T>,
    pub intervals: usize,
    pub residual: T,
    pub trace: Vec<OjaTraceRow<T>>,
}

/// The Oja vector field for a fixed `A` with its spectral norm cached for
/// the step-size check.
#[derive(Debug, Clone)]
pub struct OjaFlow<T: Real> {
    a: DMatrix<T>,
    a_norm: T,
}

impl<T: Real> OjaFlow<T> {
    pub fn new(a: DMatrix<T>) -> Result<Self> {
        numerics::ensure_square(&a, "A")?;
        numerics::ensure_finite(&a, "A")?;
        let a_norm = numerics::spectral_norm(&a);
        Ok(Self { a, a_norm })
    }

    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }

    /// Smallest substep count keeping `(interval / (s eps)) |A|_2` within
    /// [`MAX_STEP_GAIN`].
    pub fn min_substeps(&self, interval: T, epsilon: T) -> usize {
        let need = (interval / epsilon * self.a_norm / T::lit(MAX_STEP_GAIN)).as_f64();
        (need.ceil() as usize).max(1)
    }

    pub fn step(&self, pt: &StiefelPoint<T>, dt: T) -> Result<StiefelPoint<T>> {
        dim_check(pt.frame.nrows() == self.a.nrows(), || {
            format!("frame has {} rows, A is {}x{}", pt.frame.nrows(), self.a.nrows(), self.a.ncols())
        })?;
        if !(dt > T::zero()) {
            return Err(Error::Config(format!("step must be positive, got {dt}")));
        }
        let gain = dt / pt.epsilon;
        if gain * self.a_norm > T::lit(MAX_STEP_GAIN) * (T::one() + T::default_epsilon() * T::lit(8.0)) {
            return Err(Error::Config(format!(
                "(dt/eps)|A|_2 = {} exceeds {MAX_STEP_GAIN}; increase substeps or epsilon",
                gain * self.a_norm
            )));
        }
        let u = &pt.frame;
        let au = &self.a * u;
        let drift = &au - u * (u.transpose() * &au);
        let moved = u + drift * gain;
        Ok(StiefelPoint {
            frame: orthonormalize(&moved)?,
            epsilon: pt.epsilon,
            substeps: pt.substeps,
        })
    }

    /// `substeps` Euler steps across one interval.
    pub fn integrate(&self, pt: &StiefelPoint<T>, interval: T) -> Result<StiefelPoint<T>> {
        if !(interval > T::zero()) {
            return Err(Error::Config(format!("interval must be positive, got {interval}")));
        }
        let dt = interval / T::from_usize(pt.substeps).unwrap();
        let mut cur = self.step(pt, dt)?;
        for _ in 1..pt.substeps {
            cur = self.step(&cur, dt)?;
        }
        Ok(cur)
    }

    pub fn residual(&self, u: &DMatrix<T>) -> T {
        equilibrium_residual_unchecked(u, &self.a)
    }

    /// Integrates interval by interval until the equilibrium residual is
    /// below `tol` on two consecutive intervals.
    pub fn converge(
        &self,
        pt: &StiefelPoint<T>,
        interval: T,
        tol: T,
        max_intervals: usize,
        reference: Option<&DMatrix<T>>,
    ) -> Result<OjaConvergence<T>> {
        let mut cur = pt.clone();
        let mut trace = Vec::new();
        let mut below = 0;
        let mut residual = self.residual(&cur.frame);
        for k in 1..=max_intervals {
            cur = self.integrate(&cur, interval)?;
            residual = self.residual(&cur.frame);
            let max_angle = match reference {
                Some(v) => Some(
                    principal_angles(&cur.frame, v)?
                        .first()
                        .copied()
                        .unwrap_or(T::zero()),
                ),
                None => None,
            };
            trace.push(OjaTraceRow {
                interval: k,
                residual,
                max_angle,
            });
            below = if residual < tol { below + 1 } else { 0 };
            if below >= 2 {
                return Ok(OjaConvergence {
                    point: cur,
                    intervals: k,
                    residual,
                    trace,
                });
            }
        }
        Err(Error::NotConverged {
            iterations: max_intervals,
            residual: residual.as_f64(),
        })
    }
}

/// One explicit Euler step of size `dt` followed by QR retraction.
pub fn oja_step<T: Real>(pt: &StiefelPoint<T>, a: &DMatrix<T>, dt: T) -> Result<StiefelPoint<T>> {
    OjaFlow::new(a.clone())?.step(pt, dt)
}

/// Integrates over `interval` with `pt.substeps()` equal Euler steps.
pub fn oja_integrate<T: Real>(
    pt: &StiefelPoint<T>,
    a: &DMatrix<T>,
    interval: T,
) -> Result<StiefelPoint<T>> {
    OjaFlow::new(a.clone())?.integrate(pt, interval)
}

/// `|(I - U U^T) A U|_F`; zero exactly at equilibria of the flow.
pub fn equilibrium_residual<T: Real>(u: &DMatrix<T>, a: &DMatrix<T>) -> Result<T> {
    numerics::ensure_square(a, "A")?;
    dim_check(u.nrows() == a.nrows(), || {
        format!("frame has {} rows, A is {}x{}", u.nrows(), a.nrows(), a.ncols())
    })?;
    Ok(equilibrium_residual_unchecked(u, a))
}

fn equilibrium_residual_unchecked<T: Real>(u: &DMatrix<T>, a: &DMatrix<T>) -> T {
    let au = a * u;
    (&au - u * (u.transpose() * &au)).norm()
}

/// Projections of the lifted system onto a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedMatrices<T: Real> {
    /// `U^T A_d U`, `r x r`.
    pub a_u: DMatrix<T>,
    /// `C U`, `p x r`.
    pub c_u: DMatrix<T>,
    /// `U^T G_d`, `r x n`.
    pub g_u: DMatrix<T>,
}

impl<T: Real> ReducedMatrices<T> {
    pub fn rank(&self) -> usize {
        self.a_u.nrows()
    }

    /// `G_U G_U^T`.
    pub fn process_cov(&self) -> DMatrix<T> {
        numerics::symmetrize(&(&self.g_u * self.g_u.transpose()))
    }
}

pub fn reduce<T: Real>(u: &DMatrix<T>, dm: &DiscreteModel<T>) -> Result<ReducedMatrices<T>> {
    dim_check(u.nrows() == dm.state_dim() && u.ncols() >= 1, || {
        format!("frame is {:?}, state dimension is {}", u.shape(), dm.state_dim())
    })?;
    let ut = u.transpose();
    Ok(ReducedMatrices {
        a_u: &ut * dm.transition() * u,
        c_u: dm.output() * u,
        g_u: &ut * dm.noise_loading(),
    })
}

/// `|U^T A_d U - e^{U^T A U h}|_F`, which vanishes at an equilibrium frame.
pub fn lemma1_residual<T: Real>(u: &DMatrix<T>, a: &DMatrix<T>, dm: &DiscreteModel<T>) -> Result<T> {
    dim_check(a.nrows() == dm.state_dim() && u.nrows() == a.nrows(), || {
        "frame, A and model disagree in dimension".to_string()
    })?;
    let ut = u.transpose();
    let projected = &ut * dm.transition() * u;
    let small = expm(&(&ut * a * u * dm.period()))?;
    Ok((projected - small).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(v))
    }

    #[test]
    fn equilibrium_is_fixed() {
        let a = diag(&[2.0, 1.0]);
        let pt = StiefelPoint::leading(2, 1, 1.0, 4).unwrap();
        let next = oja_step(&pt, &a, 0.1).unwrap();
        assert_eq!(next.frame(), pt.frame());
        let next = oja_integrate(&pt, &a, 0.5).unwrap();
        assert_eq!(next.frame(), pt.frame());
    }

    #[test]
    fn angle_decreases_toward_dominant_axis() {
        let a = diag(&[1.0, -1.0]);
        let theta = std::f64::consts::FRAC_PI_4;
        let u = DMatrix::from_column_slice(2, 1, &[theta.cos(), theta.sin()]);
        let pt = StiefelPoint::new(u, 1.0, 1).unwrap();
        let next = oja_step(&pt, &a, 0.01).unwrap();
        let ang = next.frame()[(1, 0)].atan2(next.frame()[(0, 0)]);
        assert!(ang < theta);
        // d theta/dt = -sin(2 theta) = -1 at pi/4
        assert!((ang - (theta - 0.01)).abs() < 1e-4);
    }

    #[test]
    fn residual_examples() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0_f64, 1.0, 0.0, 0.0]);
        let e2 = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert!((equilibrium_residual(&e2, &a).unwrap() - 1.0).abs() < 1e-15);
        let e1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        assert_eq!(equilibrium_residual(&e1, &a).unwrap(), 0.0);
    }

    #[test]
    fn step_size_guard() {
        let a = diag(&[10.0, 1.0]);
        let pt = StiefelPoint::leading(2, 1, 0.01, 1).unwrap();
        assert!(matches!(oja_step(&pt, &a, 0.01), Err(Error::Config(_))));
        let flow = OjaFlow::new(a).unwrap();
        assert_eq!(flow.min_substeps(0.01, 0.01), 20);
    }

    #[test]
    fn invalid_points() {
        assert!(matches!(
            StiefelPoint::new(DMatrix::from_element(2, 1, 1.0), 1.0, 1),
            Err(Error::NotOrthonormal { .. })
        ));
        assert!(StiefelPoint::<f64>::leading(3, 1, 0.0, 1).is_err());
        assert!(StiefelPoint::<f64>::leading(3, 1, 1.5, 1).is_err());
        assert!(StiefelPoint::<f64>::leading(3, 1, 1.0, 0).is_err());
        assert!(StiefelPoint::<f64>::leading(3, 4, 1.0, 1).is_err());
    }

    #[test]
    fn reduce_leading_block() {
        let dm = DiscreteModel::new(
            diag(&[0.9, 0.8, 0.7]),
            DMatrix::identity(3, 3),
            DMatrix::identity(3, 3),
            DMatrix::identity(3, 3),
            0.1,
        )
        .unwrap();
        let u = DMatrix::<f64>::identity(3, 2);
        let rm = reduce(&u, &dm).unwrap();
        assert_eq!(rm.a_u, diag(&[0.9, 0.8]));
        assert_eq!(rm.c_u, DMatrix::<f64>::identity(3, 2));
        assert_eq!(rm.g_u, DMatrix::<f64>::identity(2, 3));
    }
}
