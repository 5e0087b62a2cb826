//! System containers, lifting, and structural checks.

use nalgebra::{ComplexField, DMatrix};

use crate::error::{dim_check, Error, Result};
use crate::numerics::{
    self, ensure_finite, ensure_square, eigenvalues_sorted, expm, noise_gramian, psd_sqrt,
    symmetrize, RANK_TOL,
};
use crate::Real;

/// Continuous-time plant `dx/dt = A x + G w`, sampled outputs
/// `y[k] = C x(kh) + H v[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousModel<T: Real> {
    a: DMatrix<T>,
    g: DMatrix<T>,
    c: DMatrix<T>,
    h: DMatrix<T>,
    period: T,
}

impl<T: Real> ContinuousModel<T> {
    /// `h` is the observation-noise matrix (`p x p`, nonsingular), `period`
    /// the sampling interval.
    pub fn new(
        a: DMatrix<T>,
        g: DMatrix<T>,
        c: DMatrix<T>,
        h: DMatrix<T>,
        period: T,
    ) -> Result<Self> {
        ensure_square(&a, "A")?;
        ensure_square(&h, "H")?;
        let n = a.nrows();
        let p = c.nrows();
        dim_check(g.nrows() == n && g.ncols() > 0, || {
            format!("G is {}x{}, expected {n} rows", g.nrows(), g.ncols())
        })?;
        dim_check(c.ncols() == n && p > 0, || {
            format!("C is {}x{}, expected {n} columns", c.nrows(), c.ncols())
        })?;
        dim_check(h.nrows() == p, || format!("H is {}x{}, expected {p}x{p}", h.nrows(), h.ncols()))?;
        for (m, name) in [(&a, "A"), (&g, "G"), (&c, "C"), (&h, "H")] {
            ensure_finite(m, name)?;
        }
        if !(period > T::zero()) || !period.is_finite() {
            return Err(Error::Domain(format!("sampling period must be positive, got {period}")));
        }
        let sv = h.clone().singular_values();
        let smax = sv.iter().copied().fold(T::zero(), |a, b| a.max(b));
        let smin = sv.iter().copied().fold(smax, |a, b| a.min(b));
        if !(smin > T::tol(1e-12) * smax) {
            return Err(Error::Domain("observation-noise matrix H is singular".into()));
        }
        Ok(Self { a, g, c, h, period })
    }

    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }
    pub fn g(&self) -> &DMatrix<T> {
        &self.g
    }
    pub fn c(&self) -> &DMatrix<T> {
        &self.c
    }
    pub fn h(&self) -> &DMatrix<T> {
        &self.h
    }
    pub fn period(&self) -> T {
        self.period
    }
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }
    pub fn noise_dim(&self) -> usize {
        self.g.ncols()
    }
}

/// Lifted discrete-time system `x[k+1] = A_d x[k] + G_d w_d[k]`,
/// `y[k] = C x[k] + H v_d[k]` with `M = H H^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel<T: Real> {
    transition: DMatrix<T>,
    noise_loading: DMatrix<T>,
    process_cov: DMatrix<T>,
    output: DMatrix<T>,
    obs_cov: DMatrix<T>,
    period: T,
}

impl<T: Real> DiscreteModel<T> {
    /// Builds a discrete model directly. `noise_loading` must be symmetric
    /// PSD and `obs_cov` symmetric positive definite.
    pub fn new(
        transition: DMatrix<T>,
        noise_loading: DMatrix<T>,
        output: DMatrix<T>,
        obs_cov: DMatrix<T>,
        period: T,
    ) -> Result<Self> {
        let process_cov = symmetrize(&(&noise_loading * &noise_loading));
        Self::assemble(transition, noise_loading, process_cov, output, obs_cov, period)
    }

    fn assemble(
        transition: DMatrix<T>,
        noise_loading: DMatrix<T>,
        process_cov: DMatrix<T>,
        output: DMatrix<T>,
        obs_cov: DMatrix<T>,
        period: T,
    ) -> Result<Self> {
        ensure_square(&transition, "A_d")?;
        let n = transition.nrows();
        dim_check(noise_loading.shape() == (n, n), || {
            format!("G_d must be {n}x{n}, got {:?}", noise_loading.shape())
        })?;
        dim_check(output.ncols() == n && output.nrows() > 0, || {
            format!("C must have {n} columns, got {:?}", output.shape())
        })?;
        let p = output.nrows();
        dim_check(obs_cov.shape() == (p, p), || {
            format!("M must be {p}x{p}, got {:?}", obs_cov.shape())
        })?;
        numerics::check_psd(&noise_loading)?;
        numerics::check_psd(&obs_cov)?;
        if obs_cov.clone().cholesky().is_none() {
            return Err(Error::Domain("observation covariance M is not positive definite".into()));
        }
        Ok(Self {
            transition,
            noise_loading: symmetrize(&noise_loading),
            process_cov,
            output,
            obs_cov: symmetrize(&obs_cov),
            period,
        })
    }

    /// `A_d`.
    pub fn transition(&self) -> &DMatrix<T> {
        &self.transition
    }
    /// `G_d`, the symmetric square root of the noise Gramian.
    pub fn noise_loading(&self) -> &DMatrix<T> {
        &self.noise_loading
    }
    /// `G_d^2`.
    pub fn process_cov(&self) -> &DMatrix<T> {
        &self.process_cov
    }
    pub fn output(&self) -> &DMatrix<T> {
        &self.output
    }
    /// `M = H H^T`.
    pub fn obs_cov(&self) -> &DMatrix<T> {
        &self.obs_cov
    }
    pub fn period(&self) -> T {
        self.period
    }
    pub fn state_dim(&self) -> usize {
        self.transition.nrows()
    }
    pub fn output_dim(&self) -> usize {
        self.output.nrows()
    }
}

/// Exact discretization: `A_d = e^{A h}`, `G_d = sqrt(Q)` with `Q` the noise
/// Gramian over one period, `M = H H^T`.
pub fn lift<T: Real>(model: &ContinuousModel<T>) -> Result<DiscreteModel<T>> {
    let h = model.period;
    let ad = expm(&(&model.a * h))?;
    let q = noise_gramian(&model.a, &model.g, h)?;
    let gd = psd_sqrt(&q)?;
    let m = symmetrize(&(&model.h * model.h.transpose()));
    DiscreteModel::assemble(ad, gd, q, model.c.clone(), m, h)
}

/// Outcome of a rank test: `margin` is `sigma_min / sigma_max` of the test
/// matrix and `full_rank` is `margin > tol`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankTest<T: Real> {
    pub full_rank: bool,
    pub margin: T,
}

/// Observability of `(C, A)` from the stacked matrix `[C; C B; ...; C B^{n-1}]`
/// where `B = (A - alpha I) / |A - alpha I|_F` and `alpha = tr(A)/n`.
///
/// The shift and scale leave the rank unchanged but keep the powers well
/// conditioned, which matters for lifted transitions `e^{Ah}` close to `I`.
pub fn check_observability<T: Real>(c: &DMatrix<T>, a: &DMatrix<T>) -> Result<RankTest<T>> {
    check_observability_with_tol(c, a, T::tol(RANK_TOL))
}

pub fn check_observability_with_tol<T: Real>(
    c: &DMatrix<T>,
    a: &DMatrix<T>,
    tol: T,
) -> Result<RankTest<T>> {
    ensure_square(a, "A")?;
    let n = a.nrows();
    dim_check(c.ncols() == n && c.nrows() > 0, || {
        format!("C must have {n} columns, got {:?}", c.shape())
    })?;
    let p = c.nrows();
    let alpha = numerics::trace(a) / T::from_usize(n).unwrap();
    let mut b = a - DMatrix::<T>::identity(n, n) * alpha;
    let bn = b.norm();
    if bn > T::zero() {
        b /= bn;
    }
    let cn = c.norm();
    let mut block = if cn > T::zero() { c / cn } else { c.clone() };
    let mut stacked = DMatrix::<T>::zeros(n * p, n);
    for k in 0..n {
        stacked.view_mut((k * p, 0), (p, n)).copy_from(&block);
        block = &block * &b;
    }
    let sv = stacked.singular_values();
    let smax = sv.iter().copied().fold(T::zero(), |x, y| x.max(y));
    let smin = if sv.len() < n {
        T::zero()
    } else {
        sv.iter().copied().fold(smax, |x, y| x.min(y))
    };
    let margin = if smax > T::zero() { smin / smax } else { T::zero() };
    Ok(RankTest {
        full_rank: margin > tol,
        margin,
    })
}

/// Reachability of `(A, G)`, the dual test on `(A^T, G^T)`.
pub fn check_reachability<T: Real>(a: &DMatrix<T>, g: &DMatrix<T>) -> Result<RankTest<T>> {
    ensure_square(a, "A")?;
    dim_check(g.nrows() == a.nrows(), || {
        format!("G must have {} rows, got {:?}", a.nrows(), g.shape())
    })?;
    check_observability(&g.transpose(), &a.transpose())
}

/// Reachability of a lifted pair decided by the noise Gramian `G_d^2 > 0`.
pub fn check_lifted_reachability<T: Real>(dm: &DiscreteModel<T>) -> Result<RankTest<T>> {
    let eig = dm.process_cov.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().copied().fold(T::zero(), |x, y| x.max(y));
    let min = eig.eigenvalues.iter().copied().fold(max, |x, y| x.min(y));
    let margin = if max > T::zero() { min.max(T::zero()) / max } else { T::zero() };
    Ok(RankTest {
        full_rank: margin > T::tol(RANK_TOL),
        margin,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemDiagnostics<T: Real> {
    /// `(C, A)`.
    pub observable: RankTest<T>,
    /// `(A, G)`.
    pub reachable: RankTest<T>,
    /// `(C, A_d)`.
    pub observable_lifted: RankTest<T>,
    /// `G_d^2 > 0`.
    pub reachable_lifted: RankTest<T>,
    pub hurwitz_unstable_count: usize,
    pub schur_unstable_count: usize,
    /// Smallest rank with a bounded low-rank filter error: the number of
    /// Hurwitz-unstable eigenvalues of `A`.
    pub min_admissible_rank: usize,
    /// An eigenvalue lies within `1e-9` of a stability boundary; the two
    /// counts may then legitimately disagree.
    pub borderline: bool,
}

impl<T: Real> SystemDiagnostics<T> {
    /// Both lifted structural conditions hold.
    pub fn lifted_ok(&self) -> bool {
        self.observable_lifted.full_rank && self.reachable_lifted.full_rank
    }
}

pub fn diagnose<T: Real>(model: &ContinuousModel<T>) -> Result<SystemDiagnostics<T>> {
    let dm = lift(model)?;
    diagnose_lifted(model, &dm)
}

pub(crate) fn diagnose_lifted<T: Real>(
    model: &ContinuousModel<T>,
    dm: &DiscreteModel<T>,
) -> Result<SystemDiagnostics<T>> {
    let observable = check_observability(&model.c, &model.a)?;
    let reachable = check_reachability(&model.a, &model.g)?;
    let observable_lifted = check_observability(&dm.output, &dm.transition)?;
    let reachable_lifted = check_lifted_reachability(dm)?;

    let edge = T::lit(numerics::BORDERLINE_TOL);
    let cont = eigenvalues_sorted(&model.a)?;
    let disc = eigenvalues_sorted(&dm.transition)?;
    let hurwitz = cont.iter().filter(|l| l.re >= T::zero()).count();
    let schur = disc.iter().filter(|l| l.modulus() >= T::one()).count();
    let borderline = cont.iter().any(|l| l.re.abs() < edge)
        || disc.iter().any(|l| (l.modulus() - T::one()).abs() < edge);
    if hurwitz != schur && !borderline {
        return Err(Error::CountMismatch { hurwitz, schur });
    }
    Ok(SystemDiagnostics {
        observable,
        reachable,
        observable_lifted,
        reachable_lifted,
        hurwitz_unstable_count: hurwitz,
        schur_unstable_count: schur,
        min_admissible_rank: hurwitz,
        borderline,
    })
}
