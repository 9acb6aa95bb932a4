use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid eigenfunction index {index:?} for {manifold}: {reason}")]
    InvalidIndex {
        manifold: &'static str,
        index: Vec<i32>,
        reason: String,
    },

    #[error("flat torus dimension must be 1 or 2, got {0}")]
    TorusDimension(usize),

    #[error("grid needs at least 2 points, got {0}")]
    TooFewPoints(usize),

    #[error("bandwidth must be positive and finite, got {0}")]
    Bandwidth(f64),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error(
        "dense decomposition refused for N = {n} (cap {cap}); use the sparse or brute-force oracle paths for large grids"
    )]
    DenseCap { n: usize, cap: usize },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("time must be nonnegative and finite, got {0}")]
    NegativeTime(f64),

    #[error("density must lie strictly inside (0, 1), got {0}")]
    Density(f64),

    #[error("grid has no edges; total jump rate is zero")]
    ZeroRate,

    #[error("observer failed at t = {time}, event {event}: {message}")]
    Observer {
        time: f64,
        event: u64,
        message: String,
    },

    #[error("{0} requires Laplace-Beltrami eigenfunctions; use the finite-N oracle instead")]
    NotEigenfunction(String),

    #[error("brute-force state space limited to N <= {max}, got N = {n}")]
    StateSpace { n: usize, max: usize },

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("grid file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
