//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by construction and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid subsystem index {index} for {count} subsystems")]
    InvalidSubsystem { index: usize, count: usize },

    #[error("operator is not hermitian: defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    NotHermitian { defect: f64, tol: f64 },

    #[error("operator is not unitary: defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    NotUnitary { defect: f64, tol: f64 },

    #[error("weights are not normalized: sum deviates from 1 by {0:.3e}")]
    NotNormalized(f64),

    #[error("target basis is not complete: completeness defect {0:.3e}")]
    IncompleteBasis(f64),

    #[error("matrix logarithm branch cut: eigenvalue within {0:.3e} of -1")]
    BranchCut(f64),

    #[error("integration step too large: {0}")]
    StepTooLarge(String),

    #[error("total dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("too many slab configurations: {count} exceeds the cap {cap}")]
    ConfigurationCap { count: usize, cap: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("momentum {0} is not on the grid")]
    KOffGrid(f64),

    #[error("grid too coarse: eta {eta:.3e} below twice the energy spacing {spacing:.3e}")]
    GridTooCoarse { eta: f64, spacing: f64 },

    #[error("refraction index outside the weak-potential regime: Re(1 - H/E) = {0:.3e} < 0")]
    BeyondWeakPotential(f64),

    #[error("unphysical gain: Im(k') = {0:.3e} < 0")]
    UnphysicalGain(f64),

    #[error("no extrema found in the interference pattern")]
    NoExtrema,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("linear algebra backend failure: {0}")]
    Backend(String),

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Backend(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
