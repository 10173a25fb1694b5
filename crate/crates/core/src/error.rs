use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can report.
///
/// Variants split into validation failures (bad input or configuration) and
/// numerical failures; see [`Error::is_numerical`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("non-monotone time at line {line}")]
    NonMonotoneTime { line: u64 },
    #[error("recording needs at least 2 samples, found {found}")]
    TooFewSamples { found: usize },
    #[error("invalid json artifact: {0}")]
    Json(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("low_cut ≥ high_cut")]
    CutoffOrder,
    #[error("cutoff out of range: {0}")]
    CutoffRange(String),
    #[error("unstable filter design: pole magnitude {0}")]
    UnstableFilter(f64),
    #[error("signal too short for filtering: {len} samples, need at least {min}")]
    SignalTooShort { len: usize, min: usize },
    #[error("no complete gait cycle found")]
    EmptySegmentation,
    #[error("all segments rejected by duration bounds")]
    AllSegmentsRejected,
    #[error("invalid segmentation: {0}")]
    InvalidSegmentation(String),
    #[error("interval [{start}, {end}] outside signal span [{span_start}, {span_end}]")]
    OutsideSpan {
        start: f64,
        end: f64,
        span_start: f64,
        span_end: f64,
    },
    #[error("sampling gap of {gap} s at t={at} exceeds 3 nominal periods")]
    SamplingGap { at: f64, gap: f64 },
    #[error("no gait cycles supplied")]
    NoCycles,
    #[error("grid size mismatch: expected {expected}, found {found}")]
    GridMismatch { expected: usize, found: usize },
    #[error("confidence band needs at least 2 cycles, found {found}")]
    TooFewCycles { found: usize },
    #[error("segmentation infeasible: {0}")]
    Infeasible(String),
    #[error("underdetermined fit: 2K-1 = {params} exceeds grid size {grid}")]
    Underdetermined { params: usize, grid: usize },
    #[error("rank-deficient design matrix")]
    RankDeficient,
    #[error("invalid order range [{min}, {max}]")]
    InvalidOrderRange { min: usize, max: usize },
    #[error("signature has zero variance")]
    ZeroVariance,
    #[error("library error: {0}")]
    Library(String),
    #[error("invalid synthetic spec: {0}")]
    SynthSpec(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for numerical failures (exit code 2); false for validation errors (exit code 1).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::UnstableFilter(_) | Error::RankDeficient => true,
            Error::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    /// Outermost stage name, if the error was raised inside a named stage.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
