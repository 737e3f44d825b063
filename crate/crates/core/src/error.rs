use std::path::PathBuf;

/// Coarse classification of failures, used by the CLI to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad arguments, unreadable or undecodable files, shape mismatches.
    Usage,
    /// The data carries no usable signal (constant image, single class, ...).
    Degenerate,
    /// A numerical routine failed (non-finite values, singular matrices, ...).
    Numerical,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot decode {path}: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("cannot encode {path}: {message}")]
    Encode { path: PathBuf, message: String },
    #[error("expected a 3-channel RGB raster, found {channels} channel(s)")]
    ChannelCount { channels: u8 },
    #[error("image dimensions must be nonzero (got {width}x{height})")]
    EmptyImage { width: usize, height: usize },
    #[error("pixel value {value} at ({x}, {y}) is not in the palette")]
    UnmappedValue { value: String, x: usize, y: usize },
    #[error("invalid palette: {0}")]
    Palette(String),
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("invalid intensity {value} at index {index}")]
    InvalidIntensity { index: usize, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shifted value {value} at index {index} is not positive")]
    NonPositive { index: usize, value: f64 },
    #[error("value {value} at index {index} is outside the inverse transform domain")]
    OutOfDomain { index: usize, value: f64 },
    #[error("non-finite result at index {index}")]
    NonFinite { index: usize },

    #[error("degenerate contrast: all values equal {value}")]
    DegenerateContrast { value: f64 },
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("profile likelihood maximum lies on the bracket boundary at lambda = {lambda}")]
    BracketBoundary { lambda: f64 },
    #[error("class {class} has {count} samples, at least {needed} required")]
    TooFewSamples {
        class: usize,
        count: usize,
        needed: usize,
    },
    #[error("at least two classes are required, found {found}")]
    TooFewClasses { found: usize },
    #[error("kappa is undefined when chance agreement equals 1")]
    UndefinedKappa,
    #[error("confusion matrix is empty")]
    EmptyMatrix,

    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("covariance matrix is singular after regularization")]
    SingularCovariance,
    #[error("feature dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("featurizer mismatch: model was fitted with {expected}, got {got}")]
    FeaturizerMismatch { expected: String, got: String },

    #[error("{0}")]
    Csv(String),
    #[error("{0}")]
    Json(String),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            Io { .. }
            | Decode { .. }
            | Encode { .. }
            | ChannelCount { .. }
            | EmptyImage { .. }
            | UnmappedValue { .. }
            | Palette(_)
            | ShapeMismatch { .. }
            | InvalidIntensity { .. }
            | InvalidParameter(_)
            | DimensionMismatch { .. }
            | FeaturizerMismatch { .. }
            | Csv(_)
            | Json(_) => ErrorCategory::Usage,
            DegenerateContrast { .. }
            | Degenerate(_)
            | TooFewSamples { .. }
            | TooFewClasses { .. }
            | UndefinedKappa
            | EmptyMatrix => ErrorCategory::Degenerate,
            NonPositive { .. }
            | OutOfDomain { .. }
            | NonFinite { .. }
            | BracketBoundary { .. }
            | RankDeficient
            | SingularCovariance => ErrorCategory::Numerical,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
