//! Box-Cox prefiltering for pixel-level image segmentation.
//!
//! The crate covers the whole pipeline: raster loading and grayscale
//! conversion ([`image`], [`io`]), pointwise transforms and the prefilter
//! ([`prefilter`]), maximum-likelihood estimation of the Box-Cox parameter
//! ([`lambda`]), pixel classifiers ([`classify`]), quality metrics
//! ([`metrics`]), and the lambda sweep experiment ([`sweep`]).

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod error;
pub mod image;
pub mod io;
pub mod lambda;
pub mod metrics;
pub mod prefilter;
pub mod sweep;
pub mod synth;

pub use error::{Error, ErrorCategory, Result};
pub use image::{GrayImage, IntensityVector, LabelMask, RgbImage};
pub use classify::{segment_image, ClassifierModel, ClassifierSpec, FeaturizerSpec};
pub use lambda::{fit_lambda, LambdaConfig, LambdaEstimate, LinearGaussianSpec};
pub use prefilter::{boxcox, inverse_boxcox, stretch, BoxCoxParams, StretchRange};
pub use metrics::{ConfusionMatrix, MetricReport};
pub use sweep::{run_sweep, SweepConfig, SweepResult};
