use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e}, scale {scale:e})")]
    NotPsd { min_eigenvalue: f64, scale: f64 },

    #[error("matrix is not symmetric (asymmetry {asymmetry:e}, scale {scale:e})")]
    NotSymmetric { asymmetry: f64, scale: f64 },

    #[error("positive definiteness lost in {what} at step {step}")]
    NotPositiveDefinite { what: &'static str, step: usize },

    #[error("eigensolver did not converge within {iterations} iterations")]
    Eigen { iterations: usize },

    #[error("no spectral gap at rank {rank}: Re(l_r) - Re(l_r+1) = {gap:e}")]
    GapViolation { rank: usize, gap: f64 },

    #[error("rank {rank} splits a complex-conjugate eigenvalue pair")]
    ConjugatePairSplit { rank: usize },

    #[error("frame is not orthonormal: |U^T U - I|_F = {deviation:e}")]
    NotOrthonormal { deviation: f64 },

    #[error("Euler step collapsed the frame; reduce dt/epsilon (|R_ii| = {pivot:e})")]
    StepSize { pivot: f64 },

    #[error("iteration did not converge within {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("pair is not {0}; the Riccati fixed point is not guaranteed")]
    Detectability(&'static str),

    #[error("closed loop is not Schur stable (spectral radius {spectral_radius})")]
    Unstable { spectral_radius: f64 },

    #[error("error covariance diverged at step {step} (trace {trace:e})")]
    Divergence { step: usize, trace: f64 },

    #[error("closed-loop spectrum deviates from the predicted structure by {deviation:e}")]
    StructureMismatch { deviation: f64 },

    #[error("eigenvalue counts disagree: {hurwitz} Hurwitz-unstable modes of A vs {schur} Schur-unstable modes of A_d")]
    CountMismatch { hurwitz: usize, schur: usize },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn dim_check(ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Dimension(what()))
    }
}
