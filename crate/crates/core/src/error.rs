use thiserror::Error;

/// Errors reported by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("spectral parameter s={0} outside (1/2, 1]")]
    SpectralParamOutOfRange(f64),
    #[error("kernel evaluation requires r > 0 (got r={0})")]
    NonPositiveRadius(f64),
    #[error("radial kernel has unbounded support; Selberg transform requires compact support")]
    UnsupportedKernel,
    #[error("group enumeration frontier exceeded word-length cap {cap} without pruning closure; {open} words still open")]
    FrontierOverflow { cap: usize, open: usize },
    #[error("vector has nonzero mean {mean:.3e}; expected a zero-mean vector")]
    NonzeroMean { mean: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("adjoint check failed: |<Ax,y> - <x,A*y>| = {defect:.3e} exceeds tolerance")]
    AdjointMismatch { defect: f64 },
    #[error("word ball of radius {radius} has {size} elements; {max} exceeds the memory budget")]
    BallTooLarge { radius: usize, size: usize, max: usize },
    #[error("mesh is empty for height cutoff {height_cut} and spacing {spacing}")]
    EmptyMesh { height_cut: f64, spacing: f64 },
    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),
    #[error("no T <= {cap} achieves free interior norm <= 1/5; best was {best_norm:.4} at T={best_t}")]
    NoAdmissibleT { cap: u32, best_norm: f64, best_t: u32 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed cache file: {0}")]
    BadCacheFile(String),
    #[error("malformed config: {0}")]
    BadConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
