use nalgebra::{Complex, ComplexField, DMatrix};

use super::gain::lkf_gain_at;
use crate::error::{dim_check, Error, Result};
use crate::model::{
    check_observability, check_reachability, diagnose_lifted, lift, ContinuousModel, DiscreteModel,
};
use crate::numerics::{
    self, dominant_invariant_subspace, eig_sorted, eigenvalues_sorted, iterate_to_fixed_point,
    spectrum_distance, symmetrize, Spectrum,
};
use crate::oja::{equilibrium_residual, reduce, ReducedMatrices};
use crate::Real;

/// Per-eigenvalue tolerance of the closed-loop structure check.
pub const STRUCTURE_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct LkfSteady<T: Real> {
    pub covariance: DMatrix<T>,
    pub gain: DMatrix<T>,
    /// `A_U (I - F C_U)`.
    pub reduced_closed_loop: DMatrix<T>,
    pub spectral_radius: T,
    pub iterations: usize,
}

/// Steady state of the reduced Riccati recursion, iterated from `R_0 = I`.
pub fn lkf_steady<T: Real>(
    rm: &ReducedMatrices<T>,
    m: &DMatrix<T>,
    tol: T,
    max_iter: usize,
) -> Result<LkfSteady<T>> {
    let r = rm.rank();
    dim_check(m.shape() == (rm.c_u.nrows(), rm.c_u.nrows()), || {
        format!("M is {:?}, C_U is {:?}", m.shape(), rm.c_u.shape())
    })?;
    if !check_observability(&rm.c_u, &rm.a_u)?.full_rank {
        return Err(Error::Detectability("observable"));
    }
    if !check_reachability(&rm.a_u, &rm.g_u)?.full_rank {
        return Err(Error::Detectability("reachable"));
    }
    let m_inv = m
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite {
            what: "observation covariance",
            step: 0,
        })?
        .inverse();
    let q = rm.process_cov();
    let update = |rr: &DMatrix<T>, f: &DMatrix<T>| {
        let post = rr - f * (&rm.c_u * rr);
        symmetrize(&(&rm.a_u * post * rm.a_u.transpose() + &q))
    };
    let fp = iterate_to_fixed_point(
        DMatrix::identity(r, r),
        |rr, k| {
            let f = lkf_gain_at(rr, &rm.c_u, &m_inv, k)?;
            Ok(update(rr, &f))
        },
        tol,
        max_iter,
    )?;
    let covariance = fp.value;
    let gain = lkf_gain_at(&covariance, &rm.c_u, &m_inv, fp.iterations)?;
    let reduced_closed_loop = &rm.a_u * (DMatrix::identity(r, r) - &gain * &rm.c_u);
    let spectral_radius = numerics::spectral_radius(&reduced_closed_loop)?;
    if !(spectral_radius < T::one()) {
        return Err(Error::Unstable {
            spectral_radius: spectral_radius.as_f64(),
        });
    }
    Ok(LkfSteady {
        covariance,
        gain,
        reduced_closed_loop,
        spectral_radius,
        iterations: fp.iterations,
    })
}

#[derive(Debug, Clone)]
pub struct ClosedLoopSpectrum<T: Real> {
    /// Spectrum of `A_d (I - U F C)`.
    pub spectrum: Spectrum<T>,
    /// Eigenvalues of `A_U (I - F C_U)`.
    pub reduced: Vec<Complex<T>>,
    /// `e^{l_j(A) h}` for `j > r`.
    pub uncovered: Vec<Complex<T>>,
    /// Matching distance between the full spectrum and `reduced + uncovered`.
    pub deviation: T,
}

/// Spectrum of the full closed loop at an equilibrium frame, verified against
/// the split into the reduced closed-loop eigenvalues and the exponentials of
/// the uncovered eigenvalues of `A`.
pub fn closed_loop_spectrum<T: Real>(
    dm: &DiscreteModel<T>,
    u: &DMatrix<T>,
    f: &DMatrix<T>,
    a: &DMatrix<T>,
) -> Result<ClosedLoopSpectrum<T>> {
    let n = dm.state_dim();
    let r = u.ncols();
    dim_check(
        a.shape() == (n, n) && u.nrows() == n && f.shape() == (r, dm.output_dim()),
        || "A, U and F do not fit the model".into(),
    )?;
    let res = equilibrium_residual(u, a)?;
    if res > T::tol(STRUCTURE_TOL) {
        return Err(Error::Config(format!(
            "frame is not an Oja equilibrium (residual {res:e})"
        )));
    }
    let full = dm.transition() * (DMatrix::identity(n, n) - u * f * dm.output());
    let spectrum = eig_sorted(&full)?;
    let rm = reduce(u, dm)?;
    let reduced_loop = &rm.a_u * (DMatrix::identity(r, r) - f * &rm.c_u);
    let reduced = eigenvalues_sorted(&reduced_loop)?;
    let h = dm.period();
    let uncovered: Vec<Complex<T>> = eigenvalues_sorted(a)?
        .into_iter()
        .skip(r)
        .map(|l| (l * Complex::new(h, T::zero())).exp())
        .collect();
    let predicted: Vec<Complex<T>> = reduced.iter().chain(&uncovered).copied().collect();
    let deviation = spectrum_distance(&spectrum.eigenvalues, &predicted);
    if !(deviation <= T::tol(STRUCTURE_TOL)) {
        return Err(Error::StructureMismatch {
            deviation: deviation.as_f64(),
        });
    }
    Ok(ClosedLoopSpectrum {
        spectrum,
        reduced,
        uncovered,
        deviation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stable,
    Unstable,
    NotApplicable,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::NotApplicable => "not_applicable",
        })
    }
}

#[derive(Debug, Clone)]
pub struct StabilityReport<T: Real> {
    pub verdict: Verdict,
    /// Number of Hurwitz-unstable eigenvalues of `A`.
    pub r_prime: usize,
    pub rank: usize,
    /// `Re l_r - Re l_{r+1}`; `None` for `r = n`.
    pub gap: Option<T>,
    /// Spectral radius of `A_d (I - U F C)` at the Schur-subspace frame, when
    /// corroboration was requested.
    pub spectral_radius: Option<T>,
    pub reason: Option<String>,
}

/// Decides boundedness of the low-rank filter error for rank `r` from the
/// unstable-mode count alone; `corroborate` additionally builds the steady
/// filter and reports the closed-loop spectral radius.
pub fn stability_verdict<T: Real>(
    model: &ContinuousModel<T>,
    r: usize,
    corroborate: bool,
) -> Result<StabilityReport<T>> {
    let n = model.state_dim();
    let dm = lift(model)?;
    let diag = diagnose_lifted(model, &dm)?;
    let mut report = StabilityReport {
        verdict: Verdict::NotApplicable,
        r_prime: diag.hurwitz_unstable_count,
        rank: r,
        gap: None,
        spectral_radius: None,
        reason: None,
    };
    if r == 0 || r > n {
        report.reason = Some(format!("rank {r} outside 1..={n}"));
        return Ok(report);
    }
    if !diag.observable_lifted.full_rank {
        report.reason = Some("(C, A_d) is not observable".into());
        return Ok(report);
    }
    if !diag.reachable_lifted.full_rank {
        report.reason = Some("(A_d, G_d) is not reachable".into());
        return Ok(report);
    }
    if r < n {
        let vals = eigenvalues_sorted(model.a())?;
        let g = vals[r - 1].re - vals[r].re;
        report.gap = Some(g);
        let min_gap = T::tol(1e-10) * model.a().norm().max(T::one());
        if numerics::eig::splits_pair(&vals, r, model.a().norm()) {
            report.reason = Some(format!("rank {r} splits a conjugate eigenvalue pair"));
            return Ok(report);
        }
        if !(g > min_gap) {
            report.reason = Some(format!("no spectral gap at rank {r}"));
            return Ok(report);
        }
    }
    report.verdict = if r >= report.r_prime {
        Verdict::Stable
    } else {
        Verdict::Unstable
    };
    if corroborate {
        let u = dominant_invariant_subspace(model.a(), r)?;
        let rm = reduce(&u, &dm)?;
        let steady = lkf_steady(&rm, dm.obs_cov(), T::tol(1e-12), 1_000_000)?;
        let full = dm.transition() * (DMatrix::identity(n, n) - &u * &steady.gain * dm.output());
        report.spectral_radius = Some(numerics::spectral_radius(&full)?);
    }
    Ok(report)
}
