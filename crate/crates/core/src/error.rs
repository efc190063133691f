use crate::mesh::BoundaryTag;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid mesh parameter: {0}")]
    InvalidMesh(String),

    #[error("point ({x}, {y}) lies outside the domain")]
    OutsideDomain { x: f64, y: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no boundary data supplied for tag {0:?}")]
    MissingBoundaryData(BoundaryTag),

    #[error("singular pivot in factorization at row {row}")]
    SingularPivot { row: usize },

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("operator is not SPD: nonpositive curvature {curvature:e} at CG iteration {iteration}")]
    OperatorNotSpd { iteration: usize, curvature: f64 },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot parse {what}: {detail}")]
    Parse { what: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
