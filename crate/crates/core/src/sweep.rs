//! Segmentation quality as a function of the Box-Cox parameter.
//!
//! For every grid value the image is transformed and re-stretched, a fresh
//! classifier is trained on a fixed stratified split, and the held-out
//! pixels are scored. Grid points run in parallel; rows come back in grid
//! order and never depend on the thread count.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{featurize, fit_classifier, stratified_split, ClassifierSpec, FeaturizerSpec, Split};
use crate::error::{Error, Result};
use crate::image::{GrayImage, LabelMask};
use crate::lambda::{fit_lambda, linspace, LambdaConfig, Subsample};
use crate::metrics::{scalar_metrics, ConfusionMatrix, MetricReport};
use crate::prefilter::{transform_gray, BoxCoxParams, StretchRange, DEFAULT_SHIFT};

/// Which precision the sweep reports in its `precision` column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "type", content = "class", rename_all = "kebab-case")]
pub enum PrecisionScope {
    #[default]
    Macro,
    Weighted,
    Class(usize),
}

impl std::str::FromStr for PrecisionScope {
    type Err = Error;

    /// `macro`, `weighted` or `class:<k>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "macro" => Ok(PrecisionScope::Macro),
            "weighted" => Ok(PrecisionScope::Weighted),
            other => other
                .strip_prefix("class:")
                .and_then(|k| k.parse().ok())
                .map(PrecisionScope::Class)
                .ok_or_else(|| Error::InvalidParameter(format!("unknown precision scope {s:?}"))),
        }
    }
}

impl std::fmt::Display for PrecisionScope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PrecisionScope::Macro => f.write_str("macro"),
            PrecisionScope::Weighted => f.write_str("weighted"),
            PrecisionScope::Class(k) => write!(f, "class:{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub grid: Vec<f64>,
    pub classifier: ClassifierSpec,
    pub featurizer: FeaturizerSpec,
    pub range: StretchRange,
    pub shift: f64,
    pub train_fraction: f64,
    pub seed: u64,
    pub precision: PrecisionScope,
    /// Also fit the maximum-likelihood λ on the raw image.
    pub annotate_mle: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            grid: default_grid(),
            classifier: ClassifierSpec::default(),
            featurizer: FeaturizerSpec::default(),
            range: StretchRange::default(),
            shift: DEFAULT_SHIFT,
            train_fraction: 0.5,
            seed: 0,
            precision: PrecisionScope::Macro,
            annotate_mle: true,
        }
    }
}

/// 61 points over `[-1, 5]`.
pub fn default_grid() -> Vec<f64> {
    linspace(-1.0, 5.0, 61)
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidParameter("sweep grid is empty".into()));
        }
        if self.grid.iter().any(|l| !l.is_finite()) || self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "sweep grid must be finite and strictly increasing".into(),
            ));
        }
        self.featurizer.validate()?;
        BoxCoxParams::new(0.0, self.shift)?;
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "train fraction must be in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if let PrecisionScope::Class(k) = self.precision {
            if k > u8::MAX as usize {
                return Err(Error::InvalidParameter(format!("precision class {k} out of range")));
            }
        }
        Ok(())
    }

    fn precision_of(&self, r: &MetricReport) -> Result<f64> {
        match self.precision {
            PrecisionScope::Macro => Ok(r.macro_precision),
            PrecisionScope::Weighted => Ok(r.weighted_precision),
            PrecisionScope::Class(k) => r
                .per_class
                .get(k)
                .map(|c| c.precision)
                .ok_or_else(|| Error::InvalidParameter(format!("precision class {k} not in mask"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowMetrics {
    pub kappa: f64,
    pub precision: f64,
    pub accuracy: f64,
    /// Per-class recall in class order.
    pub recall: Vec<f64>,
    /// Held-out confusion matrix (rows = truth).
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "detail", rename_all = "lowercase")]
pub enum RowOutcome {
    Ok(RowMetrics),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub outcome: RowOutcome,
}

impl SweepRow {
    pub fn metrics(&self) -> Option<&RowMetrics> {
        match &self.outcome {
            RowOutcome::Ok(m) => Some(m),
            RowOutcome::Failed(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleAnnotation {
    pub lambda_hat: f64,
    pub loglik: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Wall-clock seconds spent fitting the classifier at each grid point.
    /// Kept apart from `rows` because it is not reproducible.
    pub fit_seconds: Vec<f64>,
    pub class_names: Vec<String>,
    pub argmax_kappa: Option<f64>,
    pub argmax_precision: Option<f64>,
    pub mle: Option<MleAnnotation>,
    /// Why the MLE annotation is missing, when it was requested.
    pub mle_error: Option<String>,
}

/// Grid value with the largest metric; the lowest λ wins ties.
fn argmax_lambda(rows: &[SweepRow], f: impl Fn(&RowMetrics) -> f64) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for r in rows {
        if let Some(m) = r.metrics() {
            let v = f(m);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((r.lambda, v));
            }
        }
    }
    best.map(|b| b.0)
}

fn evaluate_point(
    img: &GrayImage,
    mask: &LabelMask,
    split: &Split,
    lambda: f64,
    cfg: &SweepConfig,
) -> Result<(RowMetrics, f64)> {
    let k = mask.num_classes();
    let transformed = transform_gray(img, BoxCoxParams::new(lambda, cfg.shift)?, cfg.range)?;
    let features = featurize(&transformed, cfg.featurizer)?;
    let train_labels: Vec<u8> = split.train.iter().map(|&i| mask.labels()[i]).collect();
    let test_labels: Vec<u8> = split.test.iter().map(|&i| mask.labels()[i]).collect();

    let start = Instant::now();
    let model = fit_classifier(
        &features.select(&split.train),
        &train_labels,
        k,
        cfg.featurizer,
        &cfg.classifier,
        cfg.seed,
    )?;
    let fit_seconds = start.elapsed().as_secs_f64();

    let pred = model.predict(&features.select(&split.test))?;
    let confusion = ConfusionMatrix::from_labels(&test_labels, &pred, k)?;
    let report = scalar_metrics(&confusion)?;
    Ok((
        RowMetrics {
            kappa: report.kappa.ok_or(Error::UndefinedKappa)?,
            precision: cfg.precision_of(&report)?,
            accuracy: report.accuracy,
            recall: report.per_class.iter().map(|c| c.recall).collect(),
            confusion,
        },
        fit_seconds,
    ))
}

/// Runs the sweep. A grid point that fails (for instance a transform that
/// collapses the contrast) becomes a failed row; the rest still run.
pub fn run_sweep(img: &GrayImage, mask: &LabelMask, cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    if img.shape() != mask.shape() {
        return Err(Error::ShapeMismatch {
            left: img.shape(),
            right: mask.shape(),
        });
    }
    let split = stratified_split(mask.labels(), mask.num_classes(), cfg.train_fraction, cfg.seed)?;

    let evaluated: Vec<(SweepRow, f64)> = cfg
        .grid
        .par_iter()
        .map(|&lambda| match evaluate_point(img, mask, &split, lambda, cfg) {
            Ok((m, t)) => (
                SweepRow {
                    lambda,
                    outcome: RowOutcome::Ok(m),
                },
                t,
            ),
            Err(e) => (
                SweepRow {
                    lambda,
                    outcome: RowOutcome::Failed(e.to_string()),
                },
                0.0,
            ),
        })
        .collect();
    let (rows, fit_seconds): (Vec<_>, Vec<_>) = evaluated.into_iter().unzip();

    let (mle, mle_error) = if cfg.annotate_mle {
        match mle_annotation(img, cfg) {
            Ok(a) => (Some(a), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };

    Ok(SweepResult {
        argmax_kappa: argmax_lambda(&rows, |m| m.kappa),
        argmax_precision: argmax_lambda(&rows, |m| m.precision),
        rows,
        fit_seconds,
        class_names: class_names(mask),
        mle,
        mle_error,
    })
}

/// The estimator configuration used for the annotation; the subsample
/// seed follows the sweep seed.
pub fn mle_config(cfg: &SweepConfig) -> LambdaConfig {
    LambdaConfig {
        subsample: Subsample {
            seed: cfg.seed,
            ..Subsample::default()
        },
        ..LambdaConfig::default()
    }
}

fn mle_annotation(img: &GrayImage, cfg: &SweepConfig) -> Result<MleAnnotation> {
    let est = fit_lambda(&img.vectorize(), cfg.shift, &mle_config(cfg))?;
    Ok(MleAnnotation {
        lambda_hat: est.lambda_hat,
        loglik: est.loglik_at_max,
    })
}

fn class_names(mask: &LabelMask) -> Vec<String> {
    (0..mask.num_classes())
        .map(|k| {
            mask.class_names()
                .get(k)
                .cloned()
                .unwrap_or_else(|| format!("class{k}"))
        })
        .collect()
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Csv(e.to_string())
}

fn header(k: usize, names: &[String]) -> Vec<String> {
    let mut h: Vec<String> = ["lambda", "kappa", "precision", "accuracy"].map(String::from).to_vec();
    h.extend(names.iter().map(|n| format!("recall_{n}")));
    for t in 0..k {
        for p in 0..k {
            h.push(format!("cm_{t}_{p}"));
        }
    }
    h.push("status".into());
    h.push("message".into());
    h
}

/// Writes the main CSV, the sibling `*.annotations.json` and the
/// `*.timing.csv` files. Returns the paths written.
pub fn export_sweep(result: &SweepResult, path: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let path = path.as_ref();
    let k = result.class_names.len();
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header(k, &result.class_names)).map_err(csv_err)?;
    for row in &result.rows {
        let mut rec = vec![row.lambda.to_string()];
        match &row.outcome {
            RowOutcome::Ok(m) => {
                rec.extend([m.kappa, m.precision, m.accuracy].map(|v| v.to_string()));
                rec.extend(m.recall.iter().map(f64::to_string));
                rec.extend(m.confusion.counts().iter().map(u64::to_string));
                rec.extend(["ok".to_string(), String::new()]);
            }
            RowOutcome::Failed(msg) => {
                rec.extend(std::iter::repeat_n(String::new(), 3 + k + k * k));
                rec.extend(["failed".to_string(), msg.clone()]);
            }
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let ann_path = sibling(path, "annotations.json");
    let annotations = serde_json::json!({
        "rows": result.rows.len(),
        "class_names": result.class_names,
        "argmax_kappa": result.argmax_kappa,
        "argmax_precision": result.argmax_precision,
        "mle": result.mle,
        "mle_error": result.mle_error,
        "failed": result.rows.iter().filter(|r| r.metrics().is_none()).map(|r| r.lambda).collect::<Vec<_>>(),
    });
    let text = serde_json::to_string_pretty(&annotations).map_err(|e| Error::Json(e.to_string()))?;
    std::fs::write(&ann_path, text).map_err(|e| Error::io(&ann_path, e))?;

    let timing_path = sibling(path, "timing.csv");
    let mut t = csv::Writer::from_path(&timing_path).map_err(csv_err)?;
    t.write_record(["lambda", "fit_seconds"]).map_err(csv_err)?;
    for (row, secs) in result.rows.iter().zip(&result.fit_seconds) {
        t.write_record([row.lambda.to_string(), secs.to_string()]).map_err(csv_err)?;
    }
    t.flush().map_err(|e| Error::io(&timing_path, e))?;

    Ok(vec![path.to_path_buf(), ann_path, timing_path])
}

/// Long-format `lambda,metric,value` rows for plotting. Failed rows are
/// omitted.
pub fn export_plot_data(result: &SweepResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["lambda", "metric", "value"]).map_err(csv_err)?;
    for row in &result.rows {
        let Some(m) = row.metrics() else { continue };
        let l = row.lambda.to_string();
        for (name, v) in [("kappa", m.kappa), ("precision", m.precision), ("accuracy", m.accuracy)] {
            w.write_record([l.clone(), name.to_string(), v.to_string()]).map_err(csv_err)?;
        }
        for (n, v) in result.class_names.iter().zip(&m.recall) {
            w.write_record([l.clone(), format!("recall_{n}"), v.to_string()]).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `dir/stem.<suffix>` next to `path`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "sweep".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// Reads the rows of a CSV written by [`export_sweep`].
pub fn import_sweep(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<SweepRow>)> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let head = r.headers().map_err(csv_err)?.clone();
    let names: Vec<String> = head
        .iter()
        .filter_map(|h| h.strip_prefix("recall_").map(String::from))
        .collect();
    let k = names.len();
    if head.len() != 6 + k + k * k {
        return Err(Error::Csv(format!("unexpected sweep header in {}", path.display())));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Csv(format!("bad number {s:?}")));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let lambda = num(&rec[0])?;
        let outcome = match &rec[4 + k + k * k] {
            "ok" => {
                let counts = (0..k * k)
                    .map(|i| {
                        rec[4 + k + i]
                            .parse::<u64>()
                            .map_err(|_| Error::Csv(format!("bad count {:?}", &rec[4 + k + i])))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let cm_rows: Vec<Vec<u64>> = counts.chunks(k).map(<[u64]>::to_vec).collect();
                RowOutcome::Ok(RowMetrics {
                    kappa: num(&rec[1])?,
                    precision: num(&rec[2])?,
                    accuracy: num(&rec[3])?,
                    recall: (0..k).map(|i| num(&rec[4 + i])).collect::<Result<_>>()?,
                    confusion: ConfusionMatrix::from_rows(&cm_rows)?,
                })
            }
            "failed" => RowOutcome::Failed(rec[5 + k + k * k].to_string()),
            other => return Err(Error::Csv(format!("unknown row status {other:?}"))),
        };
        rows.push(SweepRow { lambda, outcome });
    }
    Ok((names, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::CrackScene;

    fn scene() -> (GrayImage, LabelMask) {
        CrackScene {
            width: 48,
            height: 48,
            ..CrackScene::default()
        }
        .generate(1)
        .unwrap()
    }

    fn small_cfg() -> SweepConfig {
        SweepConfig {
            grid: linspace(-1.0, 2.0, 7),
            ..SweepConfig::default()
        }
    }

    #[test]
    fn rows_follow_grid_and_argmax_is_consistent() {
        let (img, mask) = scene();
        let res = run_sweep(&img, &mask, &small_cfg()).unwrap();
        assert_eq!(res.rows.len(), 7);
        for (r, l) in res.rows.iter().zip(linspace(-1.0, 2.0, 7)) {
            assert_eq!(r.lambda, l);
        }
        let best = res
            .rows
            .iter()
            .filter_map(|r| r.metrics().map(|m| m.kappa))
            .fold(f64::NEG_INFINITY, f64::max);
        let first = res
            .rows
            .iter()
            .find(|r| r.metrics().is_some_and(|m| m.kappa == best))
            .unwrap();
        assert_eq!(res.argmax_kappa, Some(first.lambda));
        assert!(res.mle.is_some());
    }

    #[test]
    fn persisted_confusion_reproduces_row_metrics() {
        let (img, mask) = scene();
        let res = run_sweep(&img, &mask, &small_cfg()).unwrap();
        for r in &res.rows {
            let m = r.metrics().unwrap();
            let rep = scalar_metrics(&m.confusion).unwrap();
            assert!((rep.kappa.unwrap() - m.kappa).abs() <= 1e-12);
            assert!((rep.macro_precision - m.precision).abs() <= 1e-12);
        }
    }

    #[test]
    fn csv_round_trip_and_failed_rows() {
        let (img, mask) = scene();
        // shift 0 and a zero pixel: negative λ is inadmissible
        let mut data = img.data().to_vec();
        data[0] = 0.0;
        let img = GrayImage::new(img.width(), img.height(), data).unwrap();
        let cfg = SweepConfig {
            shift: 0.0,
            grid: vec![-0.5, 0.5, 1.0],
            ..SweepConfig::default()
        };
        let res = run_sweep(&img, &mask, &cfg).unwrap();
        assert!(matches!(res.rows[0].outcome, RowOutcome::Failed(_)));
        assert!(res.rows[1].metrics().is_some());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        let written = export_sweep(&res, &path).unwrap();
        assert_eq!(written.len(), 3);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("lambda,kappa,precision,accuracy,"));
        let (names, rows) = import_sweep(&path).unwrap();
        assert_eq!(names, res.class_names);
        assert_eq!(rows, res.rows);
    }

    #[test]
    fn grid_validation() {
        let (img, mask) = scene();
        for grid in [vec![], vec![1.0, 1.0], vec![2.0, 1.0], vec![f64::NAN]] {
            let cfg = SweepConfig {
                grid,
                ..SweepConfig::default()
            };
            assert!(run_sweep(&img, &mask, &cfg).is_err());
        }
    }

    #[test]
    fn precision_scope_parsing() {
        assert_eq!("class:1".parse::<PrecisionScope>().unwrap(), PrecisionScope::Class(1));
        assert_eq!("weighted".parse::<PrecisionScope>().unwrap(), PrecisionScope::Weighted);
        assert!("median".parse::<PrecisionScope>().is_err());
    }
}
