use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rotation increment of {norm} rad is not below pi; the solve diverged")]
    DivergedIncrement { norm: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("need at least {needed} points, cloud has {available}")]
    TooFewPoints { needed: usize, available: usize },

    #[error("target cloud has no normals")]
    MissingNormals,

    #[error("no correspondences within the search radius")]
    NoCorrespondences,

    #[error("matrix is not symmetric (asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("spectrum carries no information (largest eigenvalue <= 0)")]
    AllZeroSpectrum,

    #[error("Gram-Schmidt produced a vanishing vector (norm {norm:e})")]
    NumericalCollapse { norm: f64 },

    #[error("linear system is singular")]
    SingularSystem,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid scene specification: {0}")]
    InvalidSpec(String),

    #[error("unsupported cloud format: {0}")]
    UnsupportedFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
