use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::rng::{fill_normal, prior_rng, replication_rng};
use super::simulate::{NoiseDriver, SimulationConfig};
use crate::error::{Error, Result};
use crate::kalman::{kf_init, kf_steady, kf_step, KfSteady};
use crate::lowrank::{
    closed_loop_spectrum, error_cov_steady, error_cov_step, lkf_steady, stability_verdict, ClosedLoopSpectrum,
    ErrorCovariance, FrameMode, LkfSteady, LowRankFilter, StabilityReport,
};
use crate::model::{lift, ContinuousModel, DiscreteModel};
use crate::numerics::{self, eig::splits_pair, eigenvalues_sorted, psd_sqrt};
use crate::oja::{equilibrium_residual, reduce, OjaConvergence, OjaFlow, StiefelPoint, DEFAULT_CONVERGENCE_TOL};

/// Traces above this abort a run as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;
/// Replications per parallel work unit. Fixed so that the summation order,
/// and hence every bit of the result, does not depend on the thread count.
const MC_CHUNK: usize = 32;
const STEADY_TOL: f64 = 1e-12;
const STEADY_MAX_ITER: usize = 1_000_000;
const OJA_MAX_INTERVALS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Kf,
    Lkf,
}

impl FilterKind {
    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Kf => "kf",
            FilterKind::Lkf => "lkf",
        }
    }
}

/// One sampling step of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    /// `Tr P_{k+1|k}` for the Kalman filter, `Tr V_{k+1|k}` for the low-rank
    /// filter.
    pub trace: f64,
    /// Monte Carlo mean of `|x[k+1] - x_{k+1|k}|^2`.
    pub emp_mse: Option<f64>,
    /// Oja equilibrium residual of the frame used at step `k`.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    /// Trace at the last step.
    pub final_trace: f64,
    /// `final_trace / Tr P` of the steady Kalman filter.
    pub kf_ratio: Option<f64>,
    /// First step after which the trace stays within `1e-6` relative of
    /// `final_trace`.
    pub convergence_step: Option<usize>,
    /// Means of the trace and the empirical error over the second half.
    pub window_trace: f64,
    pub window_emp_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub filter: FilterKind,
    pub records: Vec<StepRecord>,
    pub summary: RunSummary,
}

/// The data-independent part of a filter run: full-space gains `K_k`
/// (`U_k F_k` for the low-rank filter) with their error traces.
#[derive(Debug, Clone)]
pub(crate) struct GainSchedule {
    pub gains: Vec<DMatrix<f64>>,
    pub traces: Vec<f64>,
    pub residuals: Option<Vec<f64>>,
}

pub(crate) fn kf_schedule(dm: &DiscreteModel<f64>, sigma0: &DMatrix<f64>, steps: usize) -> Result<GainSchedule> {
    let n = dm.state_dim();
    let y = DVector::zeros(dm.output_dim());
    let mut st = kf_init(DVector::zeros(n), sigma0.clone())?;
    let mut gains = Vec::with_capacity(steps);
    let mut traces = Vec::with_capacity(steps);
    for _ in 0..steps {
        st = kf_step(&st, &y, dm)?;
        gains.push(st.gain.clone());
        traces.push(numerics::trace(&st.p_pred));
    }
    Ok(GainSchedule {
        gains,
        traces,
        residuals: None,
    })
}

fn substeps_for(flow: &OjaFlow<f64>, interval: f64, epsilon: f64, requested: usize) -> usize {
    requested.max(flow.min_substeps(interval, epsilon))
}

/// Tracking low-rank filter from `U_0 = [I_r; 0]`, `R_0 = I_r`, with the
/// true error covariance propagated from `Sigma_0`.
pub(crate) fn lkf_schedule(cfg: &SimulationConfig, dm: &DiscreteModel<f64>) -> Result<GainSchedule> {
    let n = dm.state_dim();
    let r = cfg.rank;
    let a = cfg.model.a();
    let filter = LowRankFilter::new(dm.clone(), a.clone(), FrameMode::Tracking)?;
    let s = substeps_for(filter.flow(), dm.period(), cfg.epsilon, cfg.substeps);
    let pt = StiefelPoint::leading(n, r, cfg.epsilon, s)?;
    let mut st = filter.init(DVector::zeros(n), DMatrix::identity(r, r), pt)?;
    let mut v = ErrorCovariance::new(cfg.sigma0.clone())?;
    let y = DVector::zeros(dm.output_dim());
    let mut gains = Vec::with_capacity(cfg.steps);
    let mut traces = Vec::with_capacity(cfg.steps);
    let mut residuals = Vec::with_capacity(cfg.steps);
    for k in 0..cfg.steps {
        st = filter.step(&st, &y)?;
        let u = st.frame.frame();
        v = error_cov_step(&v, u, &st.gain, dm)?;
        let trace = v.trace();
        if !(trace <= DIVERGENCE_THRESHOLD) {
            return Err(Error::Divergence { step: k, trace });
        }
        gains.push(u * &st.gain);
        traces.push(trace);
        residuals.push(equilibrium_residual(u, a)?);
    }
    Ok(GainSchedule {
        gains,
        traces,
        residuals: Some(residuals),
    })
}

/// Mean squared one-step prediction error per step over `reps` seeded
/// trajectories, for the filter with the given gain schedule.
pub(crate) fn monte_carlo(
    cfg: &SimulationConfig,
    dm: &DiscreteModel<f64>,
    gains: &[DMatrix<f64>],
) -> Result<Vec<f64>> {
    let steps = gains.len();
    let reps = cfg.replications;
    let prior = psd_sqrt(&cfg.sigma0)?;
    let chunks: Vec<(usize, usize)> = (0..reps)
        .step_by(MC_CHUNK)
        .map(|s| (s, (s + MC_CHUNK).min(reps)))
        .collect();
    let partial: Vec<Vec<f64>> = chunks
        .par_iter()
        .map(|&(lo, hi)| {
            let mut acc = vec![0.0; steps];
            for rep in lo..hi {
                replicate(cfg, dm, &prior, gains, rep as u64, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; steps];
    for p in &partial {
        for (t, x) in total.iter_mut().zip(p) {
            *t += x;
        }
    }
    let scale = 1.0 / reps as f64;
    Ok(total.into_iter().map(|x| x * scale).collect())
}

/// One replication in error coordinates: with `e = x - x_hat`,
/// `e' = A_d (e - K (C e + H v)) + G_d w`. This is the difference of the
/// plant and filter recursions driven by the same draws, but it does not
/// cancel two exponentially growing vectors against each other when `A` has
/// unstable modes.
fn replicate(
    cfg: &SimulationConfig,
    dm: &DiscreteModel<f64>,
    prior: &DMatrix<f64>,
    gains: &[DMatrix<f64>],
    rep: u64,
    acc: &mut [f64],
) {
    let n = dm.state_dim();
    let p = dm.output_dim();
    let mut z = DVector::zeros(n);
    fill_normal(&mut prior_rng(cfg.seed, rep), &mut z);
    let mut e = -(prior * z);
    let mut noise = NoiseDriver::new(dm, cfg.model.h(), replication_rng(cfg.seed, rep));
    let mut innov = DVector::zeros(p);
    let mut filt = DVector::zeros(n);
    for (k, gain) in gains.iter().enumerate() {
        noise.draw();
        let (v, w) = noise.draws();
        innov.gemv(1.0, dm.output(), &e, 0.0);
        innov.gemv(1.0, cfg.model.h(), v, 1.0);
        filt.copy_from(&e);
        filt.gemv(-1.0, gain, &innov, 1.0);
        e.gemv(1.0, dm.transition(), &filt, 0.0);
        e.gemv(1.0, dm.noise_loading(), w, 1.0);
        acc[k] += e.norm_squared();
    }
}

fn summarize(traces: &[f64], emp: Option<&[f64]>, kf_trace: Option<f64>) -> RunSummary {
    let last = *traces.last().unwrap_or(&f64::NAN);
    let convergence_step = (0..traces.len())
        .rev()
        .take_while(|&k| (traces[k] - last).abs() <= 1e-6 * last.abs())
        .last();
    let half = traces.len() / 2;
    let mean = |v: &[f64]| v[half..].iter().sum::<f64>() / (v.len() - half) as f64;
    RunSummary {
        final_trace: last,
        kf_ratio: kf_trace.map(|t| last / t),
        convergence_step,
        window_trace: mean(traces),
        window_emp_mse: emp.map(mean),
    }
}

fn artifacts(filter: FilterKind, sched: &GainSchedule, emp: Option<Vec<f64>>, kf_trace: Option<f64>) -> RunArtifacts {
    let records = (0..sched.traces.len())
        .map(|k| StepRecord {
            k,
            trace: sched.traces[k],
            emp_mse: emp.as_ref().map(|e| e[k]),
            residual: sched.residuals.as_ref().map(|r| r[k]),
        })
        .collect();
    RunArtifacts {
        filter,
        records,
        summary: summarize(&sched.traces, emp.as_deref(), kf_trace),
    }
}

fn steady_kf_trace(dm: &DiscreteModel<f64>) -> Option<f64> {
    match kf_steady(dm, STEADY_TOL, STEADY_MAX_ITER) {
        Ok(s) => Some(numerics::trace(&s.covariance)),
        Err(e) => {
            log::warn!("no steady Kalman reference: {e}");
            None
        }
    }
}

/// Runs the low-rank filter with a tracked frame and propagates its true
/// error covariance. Aborts with [`Error::Divergence`] once the trace
/// exceeds [`DIVERGENCE_THRESHOLD`].
pub fn run_boundedness_experiment(cfg: &SimulationConfig) -> Result<RunArtifacts> {
    if !cfg.mode.includes_lkf() {
        return Err(Error::Config("boundedness experiment needs the low-rank filter".into()));
    }
    cfg.validate()?;
    let dm = lift(&cfg.model)?;
    run_lkf(cfg, &dm, steady_kf_trace(&dm))
}

fn run_lkf(cfg: &SimulationConfig, dm: &DiscreteModel<f64>, kf_trace: Option<f64>) -> Result<RunArtifacts> {
    let sched = lkf_schedule(cfg, dm)?;
    let emp = if cfg.replications > 0 {
        Some(monte_carlo(cfg, dm, &sched.gains)?)
    } else {
        None
    };
    Ok(artifacts(FilterKind::Lkf, &sched, emp, kf_trace))
}

/// Every filter selected by `cfg.mode`, Kalman first.
pub fn run_filter_experiment(cfg: &SimulationConfig) -> Result<Vec<RunArtifacts>> {
    cfg.validate()?;
    let dm = lift(&cfg.model)?;
    let kf_trace = steady_kf_trace(&dm);
    let mut out = Vec::new();
    if cfg.mode.includes_kf() {
        let sched = kf_schedule(&dm, &cfg.sigma0, cfg.steps)?;
        let emp = if cfg.replications > 0 {
            Some(monte_carlo(cfg, &dm, &sched.gains)?)
        } else {
            None
        };
        out.push(artifacts(FilterKind::Kf, &sched, emp, kf_trace));
    }
    if cfg.mode.includes_lkf() {
        out.push(run_lkf(cfg, &dm, kf_trace)?);
    }
    Ok(out)
}

/// Integrates the Oja flow from `[I_r; 0]` in intervals of `epsilon` until
/// the equilibrium residual stays below `tol`.
pub fn converge_frame(a: &DMatrix<f64>, r: usize, epsilon: f64, substeps: usize, tol: f64) -> Result<OjaConvergence<f64>> {
    let flow = OjaFlow::new(a.clone())?;
    let s = substeps_for(&flow, epsilon, epsilon, substeps);
    let pt = StiefelPoint::leading(a.nrows(), r, epsilon, s)?;
    flow.converge(&pt, epsilon, tol, OJA_MAX_INTERVALS, None)
}

/// Why a rank cannot be analysed, if it cannot.
fn rank_obstacle(vals: &[nalgebra::Complex<f64>], a: &DMatrix<f64>, r: usize) -> Option<String> {
    let n = vals.len();
    if r == 0 || r > n {
        return Some(format!("rank {r} outside 1..={n}"));
    }
    if r == n {
        return None;
    }
    let scale = a.norm();
    if splits_pair(vals, r, scale) {
        return Some(format!("rank {r} splits a conjugate pair"));
    }
    let gap = vals[r - 1].re - vals[r].re;
    if !(gap > 1e-10 * scale.max(1.0)) {
        return Some(format!("no spectral gap at rank {r} (gap {gap:e})"));
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub r: usize,
    /// `Tr V_inf / Tr P`; infinite when the closed loop is unstable.
    pub trace_ratio: f64,
    pub stable: bool,
    pub oja_intervals: usize,
    pub oja_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepArtifacts {
    pub records: Vec<SweepRecord>,
    pub skipped: Vec<(usize, String)>,
    pub kf_trace: f64,
    pub r_prime: usize,
}

/// Steady error of the frozen-frame low-rank filter relative to the Kalman
/// filter, for each rank. Ranks without a spectral gap are skipped with a
/// logged reason.
pub fn run_rank_sweep(cfg: &SimulationConfig, ranks: &[usize]) -> Result<SweepArtifacts> {
    let dm = lift(&cfg.model)?;
    let a = cfg.model.a();
    let kf = kf_steady(&dm, STEADY_TOL, STEADY_MAX_ITER)?;
    let kf_trace = numerics::trace(&kf.covariance);
    let vals = eigenvalues_sorted(a)?;
    let r_prime = vals.iter().filter(|l| l.re >= 0.0).count();
    let outcomes: Vec<Result<std::result::Result<SweepRecord, String>>> = ranks
        .par_iter()
        .map(|&r| {
            if let Some(why) = rank_obstacle(&vals, a, r) {
                return Ok(Err(why));
            }
            let conv = converge_frame(a, r, cfg.epsilon, cfg.substeps, DEFAULT_CONVERGENCE_TOL)?;
            let u = conv.point.frame();
            let rm = reduce(u, &dm)?;
            let lkf = lkf_steady(&rm, dm.obs_cov(), STEADY_TOL, STEADY_MAX_ITER)?;
            let (trace_ratio, stable) = match error_cov_steady(u, &lkf.gain, &dm, 1e-15, 200) {
                Ok(v) => (v.trace() / kf_trace, true),
                Err(Error::Unstable { .. }) => (f64::INFINITY, false),
                Err(e) => return Err(e),
            };
            Ok(Ok(SweepRecord {
                r,
                trace_ratio,
                stable,
                oja_intervals: conv.intervals,
                oja_residual: conv.residual,
            }))
        })
        .collect();
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (&r, o) in ranks.iter().zip(outcomes) {
        match o? {
            Ok(rec) => records.push(rec),
            Err(why) => {
                log::warn!("skipping rank {r}: {why}");
                skipped.push((r, why));
            }
        }
    }
    Ok(SweepArtifacts {
        records,
        skipped,
        kf_trace,
        r_prime,
    })
}

/// Steady filters of both kinds for one rank.
#[derive(Debug, Clone)]
pub struct SteadyAnalysis {
    pub kf: KfSteady<f64>,
    pub frame: DMatrix<f64>,
    pub oja_residual: f64,
    pub lkf: LkfSteady<f64>,
    pub stability: StabilityReport<f64>,
    /// Present when the frame admits the spectral split.
    pub closed_loop: Option<ClosedLoopSpectrum<f64>>,
    /// `Tr V_inf`, present when the closed loop is stable.
    pub error_trace: Option<f64>,
}

pub fn steady_analysis(model: &ContinuousModel<f64>, r: usize, epsilon: f64, substeps: usize) -> Result<SteadyAnalysis> {
    let dm = lift(model)?;
    let stability = stability_verdict(model, r, false)?;
    if let Some(why) = &stability.reason {
        return Err(Error::Config(why.clone()));
    }
    let kf = kf_steady(&dm, STEADY_TOL, STEADY_MAX_ITER)?;
    let conv = converge_frame(model.a(), r, epsilon, substeps, DEFAULT_CONVERGENCE_TOL)?;
    let frame = conv.point.frame().clone();
    let rm = reduce(&frame, &dm)?;
    let lkf = lkf_steady(&rm, dm.obs_cov(), STEADY_TOL, STEADY_MAX_ITER)?;
    let closed_loop = closed_loop_spectrum(&dm, &frame, &lkf.gain, model.a()).ok();
    let error_trace = error_cov_steady(&frame, &lkf.gain, &dm, 1e-15, 200).ok().map(|v| v.trace());
    Ok(SteadyAnalysis {
        kf,
        oja_residual: conv.residual,
        frame,
        lkf,
        stability,
        closed_loop,
        error_trace,
    })
}
