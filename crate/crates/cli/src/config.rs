//! Config file parsing and flag/config/default resolution.
//!
//! The config file is TOML with flat keys (see `FileConfig`). A run
//! manifest carries the fully resolved keys under `[config]`, so a manifest
//! can be passed back through `--config` to replay a run.

use std::path::Path;
use std::str::FromStr;

use boxseg_core::classify::{ClassifierSpec, FeaturizerSpec};
use boxseg_core::io::Palette;
use boxseg_core::lambda::{linspace, LambdaConfig, Subsample};
use boxseg_core::prefilter::{LambdaChoice, StretchRange};
use boxseg_core::sweep::PrecisionScope;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// `"mle"` or a fixed number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaArg {
    Fixed(f64),
    Named(LambdaName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaName {
    Mle,
}

impl FromStr for LambdaArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim().eq_ignore_ascii_case("mle") {
            return Ok(LambdaArg::Named(LambdaName::Mle));
        }
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(LambdaArg::Fixed)
            .ok_or_else(|| format!("expected `mle` or a number, got {s:?}"))
    }
}

/// A classifier written as a short name (`"knn:7"`) or a full table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClassifierValue {
    Name(String),
    Spec(ClassifierSpec),
}

impl ClassifierValue {
    pub fn resolve(&self) -> Result<ClassifierSpec, CliError> {
        match self {
            ClassifierValue::Name(s) => Ok(s.parse()?),
            ClassifierValue::Spec(s) => Ok(*s),
        }
    }
}

/// `"lo:hi:n"` or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridValue {
    Spec(String),
    Values(Vec<f64>),
}

impl GridValue {
    pub fn resolve(&self) -> Result<Vec<f64>, CliError> {
        match self {
            GridValue::Values(v) => Ok(v.clone()),
            GridValue::Spec(s) => parse_grid(s),
        }
    }
}

/// `lo:hi:n` (equispaced, both ends included) or `a,b,c`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("bad grid {s:?}; expected lo:hi:n or a comma list"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if n == 0 || (n > 1 && !(hi > lo)) {
            return Err(bad());
        }
        return Ok(linspace(lo, hi, n));
    }
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
        .collect()
}

/// Every key the config file (and a manifest's `[config]` table) may set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<LambdaArg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bracket: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Pixel cap for the λ fit; 0 disables subsampling.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subsample: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub palette: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prefilter: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub featurizer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mle: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classifier: Option<ClassifierValue>,
}

impl FileConfig {
    /// Reads a config file, or the `[config]` table of a manifest.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| boxseg_core::Error::io(path, e))?;
        let bad = |e: toml::de::Error| CliError::Usage(format!("{}: {e}", path.display()));
        let table: toml::Table = toml::from_str(&text).map_err(bad)?;
        let cfg = match table.get("config") {
            Some(inner) => inner.clone().try_into().map_err(bad)?,
            None => toml::Value::Table(table).try_into().map_err(bad)?,
        };
        Ok(cfg)
    }
}

/// Flag value, else config value, else the built-in default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Parses a string-valued setting from flag or file.
pub fn pick_parsed<T>(flag: Option<&str>, file: Option<&str>, default: T) -> Result<T, CliError>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    match flag.or(file) {
        Some(s) => s
            .parse()
            .map_err(|e: T::Err| CliError::Usage(format!("{s:?}: {e}"))),
        None => Ok(default),
    }
}

pub fn palette(flag: Option<&str>, file: &FileConfig) -> Result<Palette, CliError> {
    pick_parsed(flag, file.palette.as_deref(), Palette::binary())
}

pub fn range(flag: Option<&str>, file: &FileConfig) -> Result<StretchRange, CliError> {
    pick_parsed(flag, file.range.as_deref(), StretchRange::default())
}

pub fn featurizer(flag: Option<&str>, file: &FileConfig) -> Result<FeaturizerSpec, CliError> {
    pick_parsed(flag, file.featurizer.as_deref(), FeaturizerSpec::default())
}

pub fn precision(flag: Option<&str>, file: &FileConfig) -> Result<PrecisionScope, CliError> {
    pick_parsed(flag, file.precision.as_deref(), PrecisionScope::default())
}

pub fn classifier(flag: Option<&str>, file: &FileConfig) -> Result<ClassifierSpec, CliError> {
    match (flag, &file.classifier) {
        (Some(s), _) => Ok(s.parse()?),
        (None, Some(v)) => v.resolve(),
        (None, None) => Ok(ClassifierSpec::default()),
    }
}

/// Options of the λ estimator shared by several commands.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct EstimatorFlags {
    /// Search interval for λ as `lo:hi`.
    #[arg(long, allow_hyphen_values = true)]
    pub bracket: Option<String>,
    /// Coarse grid size before golden-section refinement.
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Final bracket width of the refinement.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Fit on at most this many randomly chosen pixels (0 uses all).
    #[arg(long)]
    pub subsample: Option<usize>,
}

/// Resolves the estimator configuration and records the resolved values
/// back into `out`.
pub fn estimator(
    flags: &EstimatorFlags,
    file: &FileConfig,
    seed: u64,
    out: &mut FileConfig,
) -> Result<LambdaConfig, CliError> {
    let defaults = LambdaConfig::default();
    let bracket_text = flags.bracket.clone().or_else(|| file.bracket.clone());
    let bracket = match &bracket_text {
        Some(s) => {
            let r: StretchRange = s
                .parse()
                .map_err(|_| CliError::Usage(format!("bad bracket {s:?}; expected lo:hi")))?;
            (r.min, r.max)
        }
        None => defaults.bracket,
    };
    let grid_points = pick(flags.grid_points, file.grid_points, defaults.grid_points);
    let tolerance = pick(flags.tolerance, file.tolerance, defaults.tolerance);
    let default_cap = defaults.subsample.max_len.unwrap_or(0);
    let cap = pick(flags.subsample, file.subsample, default_cap);

    out.bracket = Some(format!("{}:{}", bracket.0, bracket.1));
    out.grid_points = Some(grid_points);
    out.tolerance = Some(tolerance);
    out.subsample = Some(cap);
    Ok(LambdaConfig {
        bracket,
        grid_points,
        tolerance,
        subsample: Subsample {
            max_len: (cap > 0).then_some(cap),
            seed,
        },
        ..defaults
    })
}

pub fn lambda_choice(arg: LambdaArg, cfg: LambdaConfig) -> LambdaChoice {
    match arg {
        LambdaArg::Fixed(v) => LambdaChoice::Fixed(v),
        LambdaArg::Named(LambdaName::Mle) => LambdaChoice::Estimate(cfg),
    }
}
