use thiserror::Error;

use crate::regression::ModelIndex;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the library. All variants are cheap to clone so they can
/// be stored as skip reasons in a selection report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("invalid model index: {0}")]
    InvalidModel(String),

    #[error("design columns {0} are numerically rank-deficient")]
    RankDeficient(ModelIndex),

    #[error("residual covariance for model {model} is not positive definite ({reason})")]
    SigmaNotPD { model: ModelIndex, reason: String },

    #[error("criterion undefined for n={n}, p={p}, k_j={k_j}: requires {requirement}")]
    DimensionGuard {
        n: usize,
        p: usize,
        k_j: usize,
        requirement: &'static str,
    },

    #[error("weight scheme requires a fitted model and its data")]
    MissingFit,

    #[error("candidate family would contain {count} models (limit {limit})")]
    TooManyModels { count: u128, limit: u128 },

    #[error("no candidate model could be scored")]
    NoScoreableModel,

    #[error("lag-1 residual variance {0:e} is too small to estimate autocorrelation")]
    DegenerateResiduals(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// True for errors caused by the data itself (collinearity, exact fits),
    /// as opposed to dimension guards or configuration problems.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidData(_)
                | Error::RankDeficient(_)
                | Error::SigmaNotPD { .. }
                | Error::DegenerateResiduals(_)
        )
    }
}
