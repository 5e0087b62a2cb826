//! `lrkf` command line.
//!
//! Exit status: 0 success, 2 bad input (arguments, files, structural
//! conditions), 3 numerical failure (no convergence, lost definiteness),
//! 4 instability (divergent error covariance or an unstable closed loop).

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};

use super::experiments::{
    run_filter_experiment, run_rank_sweep, steady_analysis, FilterKind, DIVERGENCE_THRESHOLD,
};
use super::io;
use super::simulate::{simulate_trajectory, FilterMode, SimulationConfig};
use super::systems;
use crate::complexity::boundary_curve;
use crate::error::{Error, Result};
use crate::kalman::{kf_init, kf_step};
use crate::lowrank::{FrameMode, LowRankFilter, Verdict};
use crate::model::{diagnose, lift, ContinuousModel};
use crate::numerics::{dominant_invariant_subspace, eigenvalues_sorted};
use crate::oja::{OjaFlow, StiefelPoint, DEFAULT_CONVERGENCE_TOL, DEFAULT_EPSILON};

pub const EXIT_OK: i32 = 0;
pub const EXIT_BAD_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_UNSTABLE: i32 = 4;

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Dimension(_)
        | Error::Domain(_)
        | Error::Config(_)
        | Error::Io(_)
        | Error::Parse(_)
        | Error::NotPsd { .. }
        | Error::NotSymmetric { .. }
        | Error::NotOrthonormal { .. }
        | Error::GapViolation { .. }
        | Error::ConjugatePairSplit { .. }
        | Error::Detectability(_) => EXIT_BAD_INPUT,
        Error::Unstable { .. } | Error::Divergence { .. } => EXIT_UNSTABLE,
        Error::NotPositiveDefinite { .. }
        | Error::Eigen { .. }
        | Error::StepSize { .. }
        | Error::NotConverged { .. }
        | Error::StructureMismatch { .. }
        | Error::CountMismatch { .. } => EXIT_NUMERICAL,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "lrkf", version, about = "Low-rank Kalman filtering for sampled linear systems")]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Convergence tolerance of the Oja equilibrium residual.
    #[arg(long, global = true, default_value_t = DEFAULT_CONVERGENCE_TOL)]
    tol: f64,
    /// Oja time scale, in (0, 1].
    #[arg(long, global = true, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Euler substeps per interval; 0 picks the smallest stable count.
    #[arg(long, global = true, default_value_t = 0)]
    substeps: usize,
    /// Output file or directory (see each command); stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Example {
    /// n = 10, six unstable modes, C = [I_4 0], h = 0.01.
    Boundedness,
    /// Symmetric A, n = 20, ten unstable modes, C = [I_8 0], h = 0.01.
    Sweep,
    /// Non-normal A with a chosen number of unstable modes.
    Random,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Lift a model bundle; --out names the lifted bundle directory.
    Discretize { model: PathBuf },
    /// Structural diagnostics and the minimum admissible rank.
    Diagnose { model: PathBuf },
    /// Converge the Oja flow; --out names a directory for frame.csv and
    /// oja_trace.csv.
    Oja {
        model: PathBuf,
        #[arg(long)]
        rank: usize,
        #[arg(long, default_value_t = 100_000)]
        max_intervals: usize,
    },
    /// Run filters on simulated or given observations; --out names a
    /// directory for trace_<filter>.csv and estimates_<filter>.csv.
    Filter {
        model: PathBuf,
        #[arg(long, default_value = "both")]
        mode: FilterMode,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        /// Defaults to the minimum admissible rank.
        #[arg(long)]
        rank: Option<usize>,
        /// Matrix file with one observation per row; replaces simulation.
        #[arg(long)]
        observations: Option<PathBuf>,
        /// Monte Carlo trajectories for the empirical error column.
        #[arg(long, default_value_t = 0)]
        replications: usize,
        /// Initial state, comma separated (zero by default).
        #[arg(long, value_delimiter = ',')]
        x0: Option<Vec<f64>>,
    },
    /// Steady filters, closed-loop spectrum and stability verdict for a rank.
    Steady {
        model: PathBuf,
        #[arg(long)]
        rank: usize,
    },
    /// Steady error ratio to the Kalman filter over ranks.
    SweepRank {
        model: PathBuf,
        /// Defaults to every rank from the minimum admissible one to n.
        #[arg(long, value_delimiter = ',')]
        ranks: Option<Vec<usize>>,
    },
    /// Crossover rank below which the low-rank filter is cheaper.
    Complexity {
        #[arg(long, value_delimiter = ',', default_value = "10,40,100,150")]
        p: Vec<u64>,
        #[arg(long, default_value_t = 4)]
        s: u64,
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<u64>>,
    },
    /// Write a seeded example model bundle to --out.
    Generate {
        #[arg(value_enum)]
        example: Example,
        #[arg(long, default_value_t = 12)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        unstable: usize,
        #[arg(long, default_value_t = 3)]
        p: usize,
    },
}

const DEFAULT_N_GRID: [u64; 13] = [10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10_000, 20_000, 50_000, 100_000];

/// Parses `argv` (program name first), runs the command and returns the exit
/// status. Errors go to stderr.
pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_BAD_INPUT } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => io::write_text(p, text),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn require_out(cli: &Cli, what: &str) -> Result<PathBuf> {
    cli.out
        .clone()
        .ok_or_else(|| Error::Config(format!("{what} needs --out")))
}

fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Discretize { model } => {
            let dm = lift(&io::read_model(model)?)?;
            io::write_discrete(&require_out(cli, "discretize")?, &dm)?;
            Ok(EXIT_OK)
        }
        Command::Diagnose { model } => {
            let m = io::read_model(model)?;
            emit(cli.out.as_deref(), &diagnose_text(&m)?)?;
            Ok(EXIT_OK)
        }
        Command::Oja {
            model,
            rank,
            max_intervals,
        } => oja(cli, &io::read_model(model)?, *rank, *max_intervals),
        Command::Filter {
            model,
            mode,
            steps,
            rank,
            observations,
            replications,
            x0,
        } => {
            let m = io::read_model(model)?;
            let rank = match rank {
                Some(r) => *r,
                None => diagnose(&m)?.min_admissible_rank.max(1),
            };
            let obs = observations.as_deref().map(io::read_observations).transpose()?;
            let mut cfg = SimulationConfig::new(m, obs.as_ref().map_or(*steps, Vec::len), cli.seed);
            cfg.mode = *mode;
            cfg.rank = rank;
            cfg.epsilon = cli.epsilon;
            cfg.substeps = cli.substeps;
            cfg.replications = if obs.is_some() { 0 } else { *replications };
            if let Some(x) = x0 {
                cfg.x0_true = DVector::from_row_slice(x);
            }
            filter(cli, &cfg, obs)
        }
        Command::Steady { model, rank } => steady(cli, &io::read_model(model)?, *rank),
        Command::SweepRank { model, ranks } => {
            let m = io::read_model(model)?;
            let n = m.state_dim();
            let ranks = match ranks {
                Some(r) => r.clone(),
                None => (diagnose(&m)?.min_admissible_rank.max(1)..=n).collect(),
            };
            let mut cfg = SimulationConfig::new(m, 1, cli.seed);
            cfg.epsilon = cli.epsilon;
            cfg.substeps = cli.substeps;
            let sweep = run_rank_sweep(&cfg, &ranks)?;
            for (r, why) in &sweep.skipped {
                eprintln!("skipped rank {r}: {why}");
            }
            emit(cli.out.as_deref(), &io::ratio_csv(&sweep))?;
            Ok(EXIT_OK)
        }
        Command::Complexity { p, s, n } => {
            let grid = n.clone().unwrap_or_else(|| DEFAULT_N_GRID.to_vec());
            let curves = p
                .iter()
                .map(|&p| Ok((p, boundary_curve(p, *s, &grid)?)))
                .collect::<Result<Vec<_>>>()?;
            emit(cli.out.as_deref(), &io::boundary_csv(&curves))?;
            Ok(EXIT_OK)
        }
        Command::Generate {
            example,
            n,
            unstable,
            p,
        } => {
            let (model, kind) = match example {
                Example::Boundedness => (systems::boundedness_model(cli.seed)?, "boundedness"),
                Example::Sweep => (systems::symmetric_model(cli.seed, 20, 10, 8, 0.01)?, "sweep"),
                Example::Random => (systems::random_instance(cli.seed, *n, *unstable, *p)?.model, "random"),
            };
            let dir = require_out(cli, "generate")?;
            io::write_model(&dir, &model, &[("kind", kind.into()), ("seed", cli.seed.to_string())])?;
            Ok(EXIT_OK)
        }
    }
}

fn diagnose_text(m: &ContinuousModel<f64>) -> Result<String> {
    let d = diagnose(m)?;
    let mut s = String::new();
    let _ = writeln!(s, "n={}", m.state_dim());
    let _ = writeln!(s, "p={}", m.output_dim());
    let _ = writeln!(s, "r_prime={}", d.hurwitz_unstable_count);
    let _ = writeln!(s, "schur_unstable={}", d.schur_unstable_count);
    let _ = writeln!(s, "min_rank={}", d.min_admissible_rank);
    let _ = writeln!(s, "observable={}", d.observable.full_rank);
    let _ = writeln!(s, "reachable={}", d.reachable.full_rank);
    let _ = writeln!(s, "observable_lifted={}", d.observable_lifted.full_rank);
    let _ = writeln!(s, "reachable_lifted={}", d.reachable_lifted.full_rank);
    let _ = writeln!(s, "borderline={}", d.borderline);
    for l in eigenvalues_sorted(m.a())? {
        let _ = writeln!(s, "eig={},{}", io::fmt_f64(l.re), io::fmt_f64(l.im));
    }
    Ok(s)
}

fn oja(cli: &Cli, m: &ContinuousModel<f64>, rank: usize, max_intervals: usize) -> Result<i32> {
    let flow = OjaFlow::new(m.a().clone())?;
    let interval = cli.epsilon;
    let s = cli.substeps.max(flow.min_substeps(interval, cli.epsilon));
    let pt = StiefelPoint::leading(m.state_dim(), rank, cli.epsilon, s)?;
    let reference = dominant_invariant_subspace(m.a(), rank).ok();
    let conv = flow.converge(&pt, interval, cli.tol, max_intervals, reference.as_ref())?;
    let mut trace = String::from("interval,residual,max_angle\n");
    for row in &conv.trace {
        let angle = row.max_angle.map(io::fmt_f64).unwrap_or_default();
        let _ = writeln!(trace, "{},{},{}", row.interval, io::fmt_f64(row.residual), angle);
    }
    match &cli.out {
        Some(dir) => {
            io::write_matrix(&dir.join("frame.csv"), conv.point.frame())?;
            io::write_text(&dir.join("oja_trace.csv"), &trace)?;
        }
        None => emit(None, &trace)?,
    }
    Ok(EXIT_OK)
}

fn filter(cli: &Cli, cfg: &SimulationConfig, obs: Option<Vec<DVector<f64>>>) -> Result<i32> {
    cfg.validate()?;
    let runs = run_filter_experiment(cfg)?;
    let obs = match obs {
        Some(o) => o,
        None => simulate_trajectory(cfg)?.observations,
    };
    let dm = lift(&cfg.model)?;
    let n = dm.state_dim();
    for y in &obs {
        if y.len() != dm.output_dim() {
            return Err(Error::Dimension(format!(
                "observation has {} entries, model has {} outputs",
                y.len(),
                dm.output_dim()
            )));
        }
    }
    let mut estimates = Vec::new();
    for run in &runs {
        let est = match run.filter {
            FilterKind::Kf => {
                let mut st = kf_init(cfg.x0_true.clone(), cfg.sigma0.clone())?;
                obs.iter()
                    .map(|y| {
                        st = kf_step(&st, y, &dm)?;
                        Ok(st.x_filt.clone())
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            FilterKind::Lkf => {
                let f = LowRankFilter::new(dm.clone(), cfg.model.a().clone(), FrameMode::Tracking)?;
                let s = cfg.substeps.max(f.flow().min_substeps(dm.period(), cfg.epsilon));
                let pt = StiefelPoint::leading(n, cfg.rank, cfg.epsilon, s)?;
                let mut st = f.init(cfg.x0_true.clone(), DMatrix::identity(cfg.rank, cfg.rank), pt)?;
                obs.iter()
                    .map(|y| {
                        st = f.step(&st, y)?;
                        Ok(st.x_filt.clone())
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        estimates.push(est);
    }
    match &cli.out {
        Some(dir) => {
            for (run, est) in runs.iter().zip(&estimates) {
                let name = run.filter.name();
                io::write_text(&dir.join(format!("trace_{name}.csv")), &io::trace_csv(run))?;
                io::write_text(&dir.join(format!("estimates_{name}.csv")), &io::vectors_csv("x", est))?;
            }
        }
        None => {
            for run in &runs {
                emit(None, &format!("# {}\n{}", run.filter.name(), io::trace_csv(run)))?;
            }
        }
    }
    let diverged = runs
        .iter()
        .any(|r| r.records.iter().any(|x| !(x.trace <= DIVERGENCE_THRESHOLD)));
    Ok(if diverged { EXIT_UNSTABLE } else { EXIT_OK })
}

fn steady(cli: &Cli, m: &ContinuousModel<f64>, rank: usize) -> Result<i32> {
    let an = steady_analysis(m, rank, cli.epsilon, cli.substeps)?;
    let kf_trace = crate::numerics::trace(&an.kf.covariance);
    let mut s = String::new();
    let _ = writeln!(s, "rank={rank}");
    let _ = writeln!(s, "r_prime={}", an.stability.r_prime);
    let _ = writeln!(s, "verdict={}", an.stability.verdict);
    let _ = writeln!(s, "oja_residual={}", io::fmt_f64(an.oja_residual));
    let _ = writeln!(s, "kf_trace={}", io::fmt_f64(kf_trace));
    let _ = writeln!(s, "kf_spectral_radius={}", io::fmt_f64(an.kf.spectral_radius));
    let _ = writeln!(s, "lkf_reduced_trace={}", io::fmt_f64(crate::numerics::trace(&an.lkf.covariance)));
    let _ = writeln!(s, "lkf_reduced_spectral_radius={}", io::fmt_f64(an.lkf.spectral_radius));
    if let Some(cl) = &an.closed_loop {
        let _ = writeln!(s, "closed_loop_spectral_radius={}", io::fmt_f64(cl.spectrum.spectral_radius()));
        let _ = writeln!(s, "structure_deviation={}", io::fmt_f64(cl.deviation));
        for l in &cl.spectrum.eigenvalues {
            let _ = writeln!(s, "closed_loop_eig={},{}", io::fmt_f64(l.re), io::fmt_f64(l.im));
        }
    }
    match an.error_trace {
        Some(t) => {
            let _ = writeln!(s, "error_trace={}", io::fmt_f64(t));
            let _ = writeln!(s, "trace_ratio={}", io::fmt_f64(t / kf_trace));
        }
        None => {
            let _ = writeln!(s, "error_trace=inf");
        }
    }
    match &cli.out {
        Some(dir) => {
            io::write_text(&dir.join("report.txt"), &s)?;
            io::write_matrix(&dir.join("P.csv"), &an.kf.covariance)?;
            io::write_matrix(&dir.join("R.csv"), &an.lkf.covariance)?;
            io::write_matrix(&dir.join("U.csv"), &an.frame)?;
            io::write_matrix(&dir.join("F.csv"), &an.lkf.gain)?;
        }
        None => emit(None, &s)?,
    }
    let unstable = an.stability.verdict == Verdict::Unstable || an.error_trace.is_none();
    Ok(if unstable { EXIT_UNSTABLE } else { EXIT_OK })
}
