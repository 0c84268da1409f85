use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid domain, mesh, or decomposition input.
    #[error("geometry: {0}")]
    Geometry(String),

    /// Invalid flow field or transport coefficients.
    #[error("flow: {0}")]
    Flow(String),

    /// Assembly or full-order solve failure.
    #[error("fem: {0}")]
    Fem(String),

    /// Reduced-order model construction or evaluation failure.
    #[error("rom: {0}")]
    Rom(String),

    /// Invalid source parameters.
    #[error("source: {0}")]
    Source(String),

    /// Source identification failure.
    #[error("solver: {0}")]
    Solver(String),

    /// Waypoint planning failure.
    #[error("planner: {0}")]
    Planner(String),

    /// Mission configuration or execution failure.
    #[error("mission: {0}")]
    Mission(String),

    /// Initialization scan found no evidence of a source.
    #[error("no source detected: all candidate nodes fall outside the detection threshold")]
    NoSourceDetected,

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
