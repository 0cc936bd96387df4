use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("partitions are not comparable: {left} pixels vs {right} pixels")]
    Incomparable { left: usize, right: usize },

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("need at least {needed} partitions, got {got}")]
    TooFewPartitions { needed: usize, got: usize },

    #[error("adjusted Rand index is undefined: zero denominator")]
    DegenerateMetric,

    #[error("distance range is degenerate: min {min} >= max {max}")]
    DegenerateRange { min: f64, max: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("split produced an empty {0} set")]
    EmptySplit(&'static str),

    #[error("every grid candidate failed")]
    AllCandidatesInvalid,
}

impl Error {
    /// Stable machine-readable code, used in CLI error documents.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidPartition(_) => "invalid_partition",
            Error::Incomparable { .. } => "incomparable",
            Error::EmptyEnsemble => "empty_ensemble",
            Error::TooFewPartitions { .. } => "too_few_partitions",
            Error::DegenerateMetric => "degenerate_metric",
            Error::DegenerateRange { .. } => "degenerate_range",
            Error::InvalidConfig(_) => "invalid_config",
            Error::InvalidImage(_) => "invalid_image",
            Error::EmptySplit(_) => "empty_split",
            Error::AllCandidatesInvalid => "all_candidates_invalid",
        }
    }
}
