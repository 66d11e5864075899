use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("rating {rating} outside support {min}..={max}")]
    OutsideSupport { rating: i64, min: i64, max: i64 },

    #[error("invalid rating data: {0}")]
    InvalidData(String),

    #[error("matrix is not positive definite: leading minor of order {minor} is not positive")]
    NotPositiveDefinite { minor: usize },

    #[error("cholesky factorization failed at iteration {iteration} ({step}): leading minor of order {minor} is not positive")]
    SamplerFactorization {
        iteration: usize,
        step: &'static str,
        minor: usize,
    },

    #[error("{0}")]
    NotIdentifiable(String),

    #[error("funk svd diverged at epoch {epoch}: training rmse is not finite")]
    Diverged { epoch: usize },

    #[error("unknown {kind} index {index}; pass cold start to predict for rows absent from training")]
    UnknownRow { kind: &'static str, index: usize },

    #[error("no covariates for {kind} index {index}")]
    MissingCovariates { kind: &'static str, index: usize },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Format(String),
}
