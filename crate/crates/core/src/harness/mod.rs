//! Seeded simulation, the experiment drivers, file formats and the CLI.
//! Everything here works in `f64`.

pub mod cli;
pub mod experiments;
pub mod io;
pub mod rng;
pub mod simulate;
pub mod systems;

pub use experiments::{
    converge_frame, run_boundedness_experiment, run_filter_experiment, run_rank_sweep, steady_analysis,
    FilterKind, RunArtifacts, RunSummary, StepRecord, SweepArtifacts, SweepRecord, DIVERGENCE_THRESHOLD,
};
pub use simulate::{simulate_trajectory, FilterMode, SimulationConfig, Trajectory};
