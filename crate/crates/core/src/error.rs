use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite predictor")]
    NonFinitePredictor,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-positive curvature")]
    NonPositiveCurvature,

    #[error("divergence; reduce step or increase λ")]
    Divergence,

    #[error("training diverged")]
    TrainingDiverged,

    #[error("no comparable pairs")]
    NoComparablePairs,

    #[error("censoring target unreachable: {0}")]
    CensoringUnreachable(String),

    #[error("outer iteration {iteration}: {source}")]
    Outer {
        iteration: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    /// True for failures of the numerical procedures, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonFinitePredictor | Error::Divergence | Error::TrainingDiverged => true,
            Error::Outer { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn in_outer(self, iteration: usize) -> Self {
        Error::Outer {
            iteration,
            source: alloc::boxed::Box::new(self),
        }
    }
}
