use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not Hermitian (relative asymmetry {asym:.3e})")]
    NotHermitian { asym: f64 },
    #[error("matrix is not positive definite (min eigenvalue {min:.3e}, max {max:.3e})")]
    NotPositiveDefinite { min: f64, max: f64 },
    #[error("dimension {0} outside supported range 1..=8")]
    Dimension(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("degenerate body: support value {value:.3e} in direction {direction}")]
    Degenerate { direction: usize, value: f64 },
    #[error("ellipsoid iteration did not converge after {iterations} steps (gap {gap:.3e})")]
    NoConvergence { iterations: usize, gap: f64 },
    #[error("grid mismatch between bodies")]
    GridMismatch,
    #[error("not sparse: interval (level {level}, index {index}) has {available:.6e} free, needs {needed:.6e}")]
    NotSparse { level: i32, index: i64, available: f64, needed: f64 },
    #[error("interval [{lo}, {hi}) outside the domain")]
    OutsideDomain { lo: f64, hi: f64 },
    #[error("empty interval family")]
    EmptyFamily,
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Param(msg.into()))
}
