use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("resolution floor violated: {what} = {value} < {floor}")]
    Resolution { what: &'static str, value: f64, floor: f64 },

    #[error("ball with center {center:?} and radius {radius} is not contained in the domain")]
    NotContained { center: Vec<f64>, radius: f64 },

    #[error("non-finite value at node {node} (coordinates {coords:?})")]
    NonFinite { node: usize, coords: Vec<f64> },

    #[error("evaluation at singular locus: {0}")]
    SingularLocus(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("solver failure after {iterations} iterations: {reason}")]
    Solver { iterations: usize, reason: String },

    #[error("regime violation: {0}")]
    Regime(String),

    #[error("uncoverable target: {0} node(s) are not covered by any candidate ball")]
    Uncoverable(usize),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
