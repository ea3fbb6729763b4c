use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum RswError {
    #[error("point ({0}, {1}) is outside the x1 bounds of the grid")]
    OutOfDomain(f64, f64),
    #[error("grid too coarse: {cells} cells span the pulse width, need at least {required}")]
    GridTooCoarse { cells: usize, required: usize },
    #[error("degenerate pulse spec: max ds_phi1 is zero, cannot normalize")]
    DegenerateSpec,
    #[error("no blow-up predicted: max ds_phi1 = {0} is not positive")]
    NoBlowup(f64),
    #[error("fluid height lost positivity (min h = {0})")]
    PositivityLoss(f64),
    #[error("non-finite value in field `{0}`")]
    NonFinite(&'static str),
    #[error("insufficient steepening in series for a blow-up fit")]
    InsufficientSteepening,
    #[error("evaluation time {t} is at or past the blow-up time {tstar}")]
    PastBlowup { t: f64, tstar: f64 },
    #[error("snapshot format error: {0}")]
    Format(String),
    #[error("config/schema error: {0}")]
    Schema(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, RswError>;
