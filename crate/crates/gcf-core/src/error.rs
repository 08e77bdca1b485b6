use thiserror::Error;

/// Errors shared across the grid, body, flow and monitor layers.
#[derive(Debug, Clone, Error)]
pub enum GcfError {
    #[error("unsupported ambient dimension {0} (expected 2 or 3)")]
    UnsupportedDimension(usize),

    #[error("resolution {got:?} below minimum of {min} nodes per angular direction")]
    ResolutionTooLow { got: Vec<usize>, min: usize },

    #[error("longitude count must be even for the pole-crossing stencil, got {0}")]
    OddLongitudeCount(usize),

    #[error("expected resolution of {expected} entries for dimension {dim}, got {got:?}")]
    BadResolutionShape {
        dim: usize,
        expected: usize,
        got: Vec<usize>,
    },

    #[error("field of length {field_len} is not aligned with grid of {node_count} nodes")]
    MisalignedField { field_len: usize, node_count: usize },

    #[error(
        "convexity lost at node {node} (direction [{x:.6}, {y:.6}, {z:.6}]): \
         smallest curvature-radius eigenvalue {eigenvalue:.6e} is below threshold {threshold:.6e}"
    )]
    ConvexityLost {
        node: usize,
        x: f64,
        y: f64,
        z: f64,
        eigenvalue: f64,
        threshold: f64,
    },

    #[error("origin is not strictly interior: min support {min_s:.6e} <= threshold {threshold:.6e}")]
    OriginNotInterior { min_s: f64, threshold: f64 },

    #[error("need at least {min} snapshots, got {got}")]
    InsufficientSnapshots { got: usize, min: usize },

    #[error("time step underflow at t = {t:.9e} (dt = {dt:.3e})")]
    DtUnderflow { t: f64, dt: f64 },

    #[error("extinction estimate {t_hat:.6} does not exceed the last snapshot time {t_last:.6}")]
    ExtinctionBeforeData { t_hat: f64, t_last: f64 },

    #[error("{0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, GcfError>;

impl GcfError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        GcfError::InvalidInput(msg.into())
    }
}
