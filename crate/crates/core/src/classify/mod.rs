//! Pixel classifiers and whole-image segmentation.
//!
//! A [`ClassifierSpec`] says what to train; [`fit_classifier`] turns it into
//! a [`ClassifierModel`], which also remembers the featurizer it was trained
//! with and is persisted as JSON:
//!
//! ```json
//! {"format": "boxseg-classifier", "version": 1,
//!  "featurizer": {"mode": "intensity"}, "num_classes": 2,
//!  "kind": "lda", "params": { ... }}
//! ```
//!
//! `params` holds every fitted number as a decimal double; loading a saved
//! model reproduces its predictions exactly.

pub mod discriminant;
pub mod features;
pub mod knn;
pub mod split;
pub mod svm;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use discriminant::{fit_discriminant, DiscriminantKind, DiscriminantModel, DiscriminantParams, Ridge};
pub use features::{featurize, Features, FeaturizerSpec};
pub use knn::{fit_knn, KnnModel};
pub use split::{stratified_cap, stratified_split, Split};
pub use svm::{fit_svm, fit_svm_pm1, kernel_eval, Kernel, SvmConfig, SvmModel, SvmSolver};

use crate::error::{Error, Result};
use crate::image::{GrayImage, LabelMask};

pub const DEFAULT_KNN_TRAIN_CAP: usize = 5000;

/// What to train.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClassifierSpec {
    Lda {
        #[serde(default)]
        ridge: Ridge,
    },
    Qda {
        #[serde(default)]
        ridge: Ridge,
    },
    Knn {
        k: usize,
        /// Training rows kept (stratified) so brute-force search stays cheap.
        #[serde(default = "default_train_cap")]
        train_cap: usize,
    },
    Svm(SvmConfig),
}

fn default_train_cap() -> usize {
    DEFAULT_KNN_TRAIN_CAP
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec::Lda {
            ridge: Ridge::default(),
        }
    }
}

impl ClassifierSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::Lda { .. } => "lda",
            ClassifierSpec::Qda { .. } => "qda",
            ClassifierSpec::Knn { .. } => "knn",
            ClassifierSpec::Svm(_) => "svm",
        }
    }
}

impl std::str::FromStr for ClassifierSpec {
    type Err = Error;

    /// `lda`, `qda`, `knn[:K]`, `svm` (linear primal) or
    /// `svm:linear|rbf|poly|sigmoid` (kernel dual, default parameters).
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.trim().split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s.trim(), None),
        };
        let bad = || Error::InvalidParameter(format!("unknown classifier {s:?}"));
        Ok(match (head, arg) {
            ("lda", None) => ClassifierSpec::Lda {
                ridge: Ridge::default(),
            },
            ("qda", None) => ClassifierSpec::Qda {
                ridge: Ridge::default(),
            },
            ("knn", k) => ClassifierSpec::Knn {
                k: k.map_or(Ok(5), str::parse).map_err(|_| bad())?,
                train_cap: DEFAULT_KNN_TRAIN_CAP,
            },
            ("svm", None) => ClassifierSpec::Svm(SvmConfig::default()),
            ("svm", Some(kernel)) => ClassifierSpec::Svm(SvmConfig::kernel_dual(match kernel {
                "linear" => Kernel::Linear,
                "rbf" => Kernel::Rbf { gamma: 1.0 },
                "poly" => Kernel::Polynomial {
                    gamma: 1.0,
                    coef0: 1.0,
                    degree: 3,
                },
                "sigmoid" => Kernel::Sigmoid {
                    gamma: 0.5,
                    coef0: 0.0,
                },
                _ => return Err(bad()),
            })),
            _ => return Err(bad()),
        })
    }
}

/// The fitted parameters, tagged by classifier family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum TrainedModel {
    Lda(DiscriminantModel),
    Qda(DiscriminantModel),
    Knn(KnnModel),
    Svm(SvmModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub format: String,
    pub version: u32,
    pub featurizer: FeaturizerSpec,
    pub num_classes: usize,
    #[serde(flatten)]
    pub model: TrainedModel,
}

const FORMAT: &str = "boxseg-classifier";

/// Fits `spec` on feature rows. `seed` drives any training subsample.
///
/// Fitting itself is sequential so results never depend on thread count.
pub fn fit_classifier(
    features: &Features,
    labels: &[u8],
    num_classes: usize,
    featurizer: FeaturizerSpec,
    spec: &ClassifierSpec,
    seed: u64,
) -> Result<ClassifierModel> {
    if features.dim() != featurizer.dim() {
        return Err(Error::DimensionMismatch {
            expected: featurizer.dim(),
            got: features.dim(),
        });
    }
    let model = match *spec {
        ClassifierSpec::Lda { ridge } => {
            TrainedModel::Lda(fit_discriminant(features, labels, num_classes, DiscriminantKind::Lda, ridge)?)
        }
        ClassifierSpec::Qda { ridge } => {
            TrainedModel::Qda(fit_discriminant(features, labels, num_classes, DiscriminantKind::Qda, ridge)?)
        }
        ClassifierSpec::Knn { k, train_cap } => {
            if train_cap == 0 {
                return Err(Error::InvalidParameter("knn train_cap must be positive".into()));
            }
            let keep = stratified_cap(labels, num_classes, train_cap, seed)?;
            let sub_labels: Vec<u8> = keep.iter().map(|&i| labels[i]).collect();
            TrainedModel::Knn(fit_knn(&features.select(&keep), &sub_labels, num_classes, k)?)
        }
        ClassifierSpec::Svm(mut cfg) => {
            cfg.seed = cfg.seed.wrapping_add(seed);
            TrainedModel::Svm(fit_svm(features, labels, num_classes, &cfg)?)
        }
    };
    Ok(ClassifierModel {
        format: FORMAT.into(),
        version: 1,
        featurizer,
        num_classes,
        model,
    })
}

impl ClassifierModel {
    pub fn kind(&self) -> &'static str {
        match self.model {
            TrainedModel::Lda(_) => "lda",
            TrainedModel::Qda(_) => "qda",
            TrainedModel::Knn(_) => "knn",
            TrainedModel::Svm(_) => "svm",
        }
    }

    pub fn predict(&self, features: &Features) -> Result<Vec<u8>> {
        match &self.model {
            TrainedModel::Lda(m) | TrainedModel::Qda(m) => m.predict(features),
            TrainedModel::Knn(m) => m.predict(features),
            TrainedModel::Svm(m) => m.predict(features),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Json(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text).map_err(|e| Error::Json(e.to_string()))?;
        if model.format != FORMAT || model.version != 1 {
            return Err(Error::Json(format!(
                "unsupported model format {:?} version {}",
                model.format, model.version
            )));
        }
        model.featurizer.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Featurizes `img` with `spec` and labels every pixel.
pub fn segment_image(img: &GrayImage, model: &ClassifierModel, spec: FeaturizerSpec) -> Result<LabelMask> {
    if spec != model.featurizer {
        return Err(Error::FeaturizerMismatch {
            expected: model.featurizer.to_string(),
            got: spec.to_string(),
        });
    }
    let features = featurize(img, spec)?;
    let labels = model.predict(&features)?;
    LabelMask::new(img.width(), img.height(), model.num_classes, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_blobs() -> (GrayImage, Vec<u8>) {
        let data: Vec<f64> = (0..64).map(|i| if i < 32 { 10.0 + (i % 5) as f64 } else { 200.0 + (i % 7) as f64 }).collect();
        let labels = (0..64).map(|i| u8::from(i >= 32)).collect();
        (GrayImage::new(8, 8, data).unwrap(), labels)
    }

    #[test]
    fn every_family_segments_blobs() {
        let (img, labels) = two_blobs();
        let f = featurize(&img, FeaturizerSpec::Intensity).unwrap();
        for spec in ["lda", "qda", "knn:3", "svm", "svm:rbf"] {
            let spec: ClassifierSpec = spec.parse().unwrap();
            let m = fit_classifier(&f, &labels, 2, FeaturizerSpec::Intensity, &spec, 0).unwrap();
            let mask = segment_image(&img, &m, FeaturizerSpec::Intensity).unwrap();
            assert_eq!(mask.shape(), img.shape());
            assert_eq!(mask.labels(), &labels[..], "{}", spec.name());
        }
    }

    #[test]
    fn json_round_trip_reproduces_predictions() {
        let (img, labels) = two_blobs();
        let spec = FeaturizerSpec::window(3).unwrap();
        let f = featurize(&img, spec).unwrap();
        for cs in ["lda", "qda", "knn:5", "svm", "svm:poly"] {
            let m = fit_classifier(&f, &labels, 2, spec, &cs.parse().unwrap(), 7).unwrap();
            let back = ClassifierModel::from_json(&m.to_json().unwrap()).unwrap();
            assert_eq!(back, m, "{cs}");
            assert_eq!(back.predict(&f).unwrap(), m.predict(&f).unwrap());
        }
    }

    #[test]
    fn constant_image_gives_constant_mask() {
        let (img, labels) = two_blobs();
        let f = featurize(&img, FeaturizerSpec::Intensity).unwrap();
        let m = fit_classifier(&f, &labels, 2, FeaturizerSpec::Intensity, &ClassifierSpec::default(), 0).unwrap();
        let flat = GrayImage::new(5, 3, vec![90.0; 15]).unwrap();
        let mask = segment_image(&flat, &m, FeaturizerSpec::Intensity).unwrap();
        assert!(mask.labels().iter().all(|&l| l == mask.labels()[0]));
    }

    #[test]
    fn featurizer_mismatch_is_rejected() {
        let (img, labels) = two_blobs();
        let f = featurize(&img, FeaturizerSpec::Intensity).unwrap();
        let m = fit_classifier(&f, &labels, 2, FeaturizerSpec::Intensity, &ClassifierSpec::default(), 0).unwrap();
        assert!(matches!(
            segment_image(&img, &m, FeaturizerSpec::Window { size: 3 }),
            Err(Error::FeaturizerMismatch { .. })
        ));
    }

    #[test]
    fn spec_parsing_and_toml_shape() {
        assert!("knn:x".parse::<ClassifierSpec>().is_err());
        assert!("svm:foo".parse::<ClassifierSpec>().is_err());
        let spec: ClassifierSpec = serde_json::from_str(r#"{"kind":"knn","k":7}"#).unwrap();
        assert_eq!(
            spec,
            ClassifierSpec::Knn {
                k: 7,
                train_cap: DEFAULT_KNN_TRAIN_CAP
            }
        );
        let svm: ClassifierSpec =
            serde_json::from_str(&serde_json::to_string(&ClassifierSpec::Svm(SvmConfig::default())).unwrap()).unwrap();
        assert_eq!(svm, ClassifierSpec::Svm(SvmConfig::default()));
    }
}
