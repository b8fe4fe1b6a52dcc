use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown potential `{0}`")]
    UnknownPotential(String),

    #[error("degenerate coefficients: {0}")]
    Degenerate(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("tail mass test failed: {0}")]
    TailMass(String),

    #[error("integration-by-parts identity violated: {0}")]
    IdentityMismatch(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("time grid mismatch: {0}")]
    GridMismatch(String),

    #[error("{0}")]
    InsufficientData(String),

    #[error("malformed csv: {0}")]
    Format(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
