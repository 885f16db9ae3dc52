use thiserror::Error;

#[derive(Debug, Error)]
pub enum PvbError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("overlap matrix is ill-conditioned (cond = {cond:.3e})")]
    IllConditioned { cond: f64 },
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("empty cell set")]
    EmptySet,
    #[error("cell index {0} out of range")]
    CellOutOfRange(usize),
    #[error("eigensolver failed: {0}")]
    EigenFailure(String),
    #[error("no convergence after {iterations} iterations (max boundary amplitude {boundary_max:.3e})")]
    NoConvergence {
        iterations: usize,
        boundary_max: f64,
        /// `(cell count, boundary max amplitude)` per iteration.
        history: Vec<(usize, f64)>,
    },
    #[error("time step underflow at t = {t} (tau = {tau:.3e})")]
    StepUnderflow { t: f64, tau: f64 },
    #[error("problem too large for a dense oracle ({0} points)")]
    TooLarge(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, PvbError>;
