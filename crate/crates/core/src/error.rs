use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("graph construction failed: {0}")]
    Construction(String),

    #[error("eigen-solver failed (residual {residual:e})")]
    EigenSolver { residual: f64 },

    #[error("empty point cloud")]
    EmptyCloud,

    #[error("point at the frame origin has no parametric coordinates")]
    DegeneratePoint,

    #[error("point has an empty domain of influence (enlarge r_s)")]
    UnsupportedPoint,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
