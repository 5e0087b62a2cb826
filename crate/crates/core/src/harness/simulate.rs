use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;

use super::rng::{fill_normal, replication_rng, RNG_ALGORITHM};
use crate::error::{Error, Result};
use crate::model::{lift, ContinuousModel, DiscreteModel};
use crate::oja::DEFAULT_EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterMode {
    Kf,
    Lkf,
    Both,
}

impl FilterMode {
    pub fn includes_kf(self) -> bool {
        matches!(self, FilterMode::Kf | FilterMode::Both)
    }
    pub fn includes_lkf(self) -> bool {
        matches!(self, FilterMode::Lkf | FilterMode::Both)
    }
}

impl std::str::FromStr for FilterMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kf" => Ok(FilterMode::Kf),
            "lkf" => Ok(FilterMode::Lkf),
            "both" => Ok(FilterMode::Both),
            _ => Err(Error::Config(format!("unknown mode {s:?}; expected kf, lkf or both"))),
        }
    }
}

/// One seeded experiment. The same value always produces the same numbers.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub model: ContinuousModel<f64>,
    pub steps: usize,
    pub seed: u64,
    pub x0_true: DVector<f64>,
    /// Prior covariance of the initial estimate error.
    pub sigma0: DMatrix<f64>,
    pub rank: usize,
    pub epsilon: f64,
    /// Euler substeps per sampling interval; `0` picks the smallest stable
    /// count.
    pub substeps: usize,
    pub mode: FilterMode,
    /// Monte Carlo trajectories for the empirical error; `0` skips them.
    pub replications: usize,
    pub rng_algorithm: &'static str,
}

impl SimulationConfig {
    /// Defaults: `x0 = 0`, `Sigma_0 = I`, full rank, `epsilon = 1`,
    /// automatic substeps, both filters, no Monte Carlo.
    pub fn new(model: ContinuousModel<f64>, steps: usize, seed: u64) -> Self {
        let n = model.state_dim();
        Self {
            steps,
            seed,
            x0_true: DVector::zeros(n),
            sigma0: DMatrix::identity(n, n),
            rank: n,
            epsilon: DEFAULT_EPSILON,
            substeps: 0,
            mode: FilterMode::Both,
            replications: 0,
            rng_algorithm: RNG_ALGORITHM,
            model,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.model.state_dim();
        if self.x0_true.len() != n || self.sigma0.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "x0 has {} entries and Sigma0 is {:?}; state dimension {n}",
                self.x0_true.len(),
                self.sigma0.shape()
            )));
        }
        if self.rank == 0 || self.rank > n {
            return Err(Error::Config(format!("rank {} outside 1..={n}", self.rank)));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be positive".into()));
        }
        Ok(())
    }
}

/// Draws `x[k+1] = A_d x[k] + G_d w[k]` and `y[k] = C x[k] + H v[k]` with
/// `v[k]` drawn before `w[k]` at every step.
pub(crate) struct NoiseDriver<'a> {
    dm: &'a DiscreteModel<f64>,
    h: &'a DMatrix<f64>,
    rng: ChaCha8Rng,
    v: DVector<f64>,
    w: DVector<f64>,
}

impl<'a> NoiseDriver<'a> {
    pub(crate) fn new(dm: &'a DiscreteModel<f64>, h: &'a DMatrix<f64>, rng: ChaCha8Rng) -> Self {
        Self {
            v: DVector::zeros(dm.output_dim()),
            w: DVector::zeros(dm.state_dim()),
            dm,
            h,
            rng,
        }
    }

    /// Draws `v[k]` then `w[k]`.
    pub(crate) fn draw(&mut self) {
        fill_normal(&mut self.rng, &mut self.v);
        fill_normal(&mut self.rng, &mut self.w);
    }

    pub(crate) fn draws(&self) -> (&DVector<f64>, &DVector<f64>) {
        (&self.v, &self.w)
    }

    /// Writes `y[k]` for the state `x` and advances `x` in place.
    pub(crate) fn advance(&mut self, x: &mut DVector<f64>, y: &mut DVector<f64>, scratch: &mut DVector<f64>) {
        self.draw();
        y.gemv(1.0, self.dm.output(), x, 0.0);
        y.gemv(1.0, self.h, &self.v, 1.0);
        scratch.gemv(1.0, self.dm.transition(), x, 0.0);
        scratch.gemv(1.0, self.dm.noise_loading(), &self.w, 1.0);
        std::mem::swap(x, scratch);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `x[0..steps]`.
    pub states: Vec<DVector<f64>>,
    /// `y[0..steps]`.
    pub observations: Vec<DVector<f64>>,
}

/// Simulates the lifted system from `x0_true` with replication 0 of the
/// configured seed.
pub fn simulate_trajectory(cfg: &SimulationConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let dm = lift(&cfg.model)?;
    Ok(simulate_lifted(&dm, cfg.model.h(), &cfg.x0_true, cfg.steps, replication_rng(cfg.seed, 0)))
}

pub(crate) fn simulate_lifted(
    dm: &DiscreteModel<f64>,
    h: &DMatrix<f64>,
    x0: &DVector<f64>,
    steps: usize,
    rng: ChaCha8Rng,
) -> Trajectory {
    let mut driver = NoiseDriver::new(dm, h, rng);
    let mut x = x0.clone();
    let mut y = DVector::zeros(dm.output_dim());
    let mut scratch = DVector::zeros(dm.state_dim());
    let mut states = Vec::with_capacity(steps);
    let mut observations = Vec::with_capacity(steps);
    for _ in 0..steps {
        states.push(x.clone());
        driver.advance(&mut x, &mut y, &mut scratch);
        observations.push(y.clone());
    }
    Trajectory { states, observations }
}
