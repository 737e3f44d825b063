//! Gaussian discriminant analysis with pooled (LDA) or per-class (QDA)
//! covariance.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::Features;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscriminantKind {
    Lda,
    Qda,
}

/// Diagonal loading added before inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum Ridge {
    /// `factor * trace(Σ) / d`; falls back to the pooled trace when a
    /// class covariance is identically zero.
    Relative(f64),
    Absolute(f64),
}

impl Default for Ridge {
    fn default() -> Self {
        Ridge::Relative(1e-6)
    }
}

/// Stored parameters; this is the persisted form of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminantParams {
    pub kind: DiscriminantKind,
    pub priors: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// One matrix for LDA, one per class for QDA. Ridge not included.
    pub covariances: Vec<Vec<Vec<f64>>>,
    /// Absolute diagonal loading applied to each covariance.
    pub ridges: Vec<f64>,
}

/// Per-covariance quantities precomputed from the parameters.
#[derive(Debug, Clone)]
struct Prepared {
    inv: DMatrix<f64>,
    log_det: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "DiscriminantParams", into = "DiscriminantParams")]
pub struct DiscriminantModel {
    params: DiscriminantParams,
    prepared: Vec<Prepared>,
    /// LDA only: `Σ⁻¹ μₖ` and `−½ μₖᵀ Σ⁻¹ μₖ + log πₖ`.
    linear: Vec<(DVector<f64>, f64)>,
}

impl PartialEq for DiscriminantModel {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
    }
}

impl TryFrom<DiscriminantParams> for DiscriminantModel {
    type Error = Error;

    fn try_from(params: DiscriminantParams) -> Result<Self> {
        let k = params.priors.len();
        let d = params.means.first().map_or(0, Vec::len);
        let expected_covs = match params.kind {
            DiscriminantKind::Lda => 1,
            DiscriminantKind::Qda => k,
        };
        if k < 2
            || params.means.len() != k
            || params.means.iter().any(|m| m.len() != d)
            || params.covariances.len() != expected_covs
            || params.ridges.len() != expected_covs
            || params
                .covariances
                .iter()
                .any(|c| c.len() != d || c.iter().any(|r| r.len() != d))
        {
            return Err(Error::InvalidParameter("inconsistent discriminant parameters".into()));
        }
        let prepared = params
            .covariances
            .iter()
            .zip(&params.ridges)
            .map(|(c, &ridge)| prepare(c, ridge))
            .collect::<Result<Vec<_>>>()?;
        let linear = match params.kind {
            DiscriminantKind::Lda => {
                let inv = &prepared[0].inv;
                params
                    .means
                    .iter()
                    .zip(&params.priors)
                    .map(|(m, &p)| {
                        let mu = DVector::from_column_slice(m);
                        let w = inv * &mu;
                        let c = -0.5 * mu.dot(&w) + p.ln();
                        (w, c)
                    })
                    .collect()
            }
            DiscriminantKind::Qda => Vec::new(),
        };
        Ok(Self {
            params,
            prepared,
            linear,
        })
    }
}

impl From<DiscriminantModel> for DiscriminantParams {
    fn from(m: DiscriminantModel) -> Self {
        m.params
    }
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let d = rows.len();
    DMatrix::from_fn(d, d, |i, j| rows[i][j])
}

fn prepare(cov: &[Vec<f64>], ridge: f64) -> Result<Prepared> {
    let d = cov.len();
    let m = to_matrix(cov) + DMatrix::identity(d, d) * ridge;
    let chol = m.cholesky().ok_or(Error::SingularCovariance)?;
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    if !log_det.is_finite() {
        return Err(Error::SingularCovariance);
    }
    Ok(Prepared {
        inv: chol.inverse(),
        log_det,
    })
}

fn trace(c: &[Vec<f64>]) -> f64 {
    (0..c.len()).map(|i| c[i][i]).sum()
}

fn ridge_amount(ridge: Ridge, cov: &[Vec<f64>], pooled: &[Vec<f64>]) -> Result<f64> {
    match ridge {
        Ridge::Absolute(a) if a >= 0.0 && a.is_finite() => Ok(a),
        Ridge::Relative(f) if f >= 0.0 && f.is_finite() => {
            let d = cov.len() as f64;
            let t = trace(cov);
            let t = if t > 0.0 { t } else { trace(pooled) };
            Ok(f * t / d)
        }
        other => Err(Error::InvalidParameter(format!("invalid ridge {other:?}"))),
    }
}

/// Estimates priors, class means and covariance(s).
///
/// LDA pools the within-class scatter with divisor `N − K`; QDA uses the
/// unbiased per-class divisor `Nₖ − 1`. Every class needs at least `d + 1`
/// samples.
pub fn fit_discriminant(
    features: &Features,
    labels: &[u8],
    num_classes: usize,
    kind: DiscriminantKind,
    ridge: Ridge,
) -> Result<DiscriminantModel> {
    if labels.len() != features.rows() {
        return Err(Error::DimensionMismatch {
            expected: features.rows(),
            got: labels.len(),
        });
    }
    let d = features.dim();
    let present = {
        let mut seen = vec![false; num_classes];
        for &l in labels {
            *seen
                .get_mut(usize::from(l))
                .ok_or_else(|| Error::InvalidParameter(format!("label {l} >= {num_classes}")))? = true;
        }
        seen.iter().filter(|&&s| s).count()
    };
    if num_classes < 2 || present < 2 {
        return Err(Error::TooFewClasses { found: present });
    }

    let mut counts = vec![0usize; num_classes];
    let mut sums = vec![vec![0.0; d]; num_classes];
    for (x, &l) in features.iter_rows().zip(labels) {
        let k = usize::from(l);
        counts[k] += 1;
        for (s, v) in sums[k].iter_mut().zip(x) {
            *s += v;
        }
    }
    for (k, &n) in counts.iter().enumerate() {
        if n < d + 1 {
            return Err(Error::TooFewSamples {
                class: k,
                count: n,
                needed: d + 1,
            });
        }
    }
    let n_total = labels.len();
    let means: Vec<Vec<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &n)| s.iter().map(|v| v / n as f64).collect())
        .collect();

    let mut scatter = vec![vec![vec![0.0; d]; d]; num_classes];
    for (x, &l) in features.iter_rows().zip(labels) {
        let k = usize::from(l);
        let mu = &means[k];
        for i in 0..d {
            let di = x[i] - mu[i];
            for j in 0..d {
                scatter[k][i][j] += di * (x[j] - mu[j]);
            }
        }
    }
    let mut pooled = vec![vec![0.0; d]; d];
    for s in &scatter {
        for i in 0..d {
            for j in 0..d {
                pooled[i][j] += s[i][j];
            }
        }
    }
    let pooled_div = (n_total - num_classes) as f64;
    for row in pooled.iter_mut() {
        for v in row.iter_mut() {
            *v /= pooled_div;
        }
    }

    let covariances = match kind {
        DiscriminantKind::Lda => vec![pooled.clone()],
        DiscriminantKind::Qda => scatter
            .into_iter()
            .zip(&counts)
            .map(|(s, &n)| {
                s.into_iter()
                    .map(|row| row.into_iter().map(|v| v / (n - 1) as f64).collect())
                    .collect()
            })
            .collect(),
    };
    let ridges = covariances
        .iter()
        .map(|c| ridge_amount(ridge, c, &pooled))
        .collect::<Result<Vec<_>>>()?;
    let priors = counts.iter().map(|&n| n as f64 / n_total as f64).collect();

    DiscriminantModel::try_from(DiscriminantParams {
        kind,
        priors,
        means,
        covariances,
        ridges,
    })
}

impl DiscriminantModel {
    /// Builds a model from explicit parameters.
    pub fn from_params(params: DiscriminantParams) -> Result<Self> {
        Self::try_from(params)
    }

    pub fn params(&self) -> &DiscriminantParams {
        &self.params
    }

    pub fn kind(&self) -> DiscriminantKind {
        self.params.kind
    }

    pub fn num_classes(&self) -> usize {
        self.params.priors.len()
    }

    pub fn dim(&self) -> usize {
        self.params.means[0].len()
    }

    /// `δₖ(x)` for every class.
    pub fn discriminants(&self, x: &[f64]) -> Vec<f64> {
        let xv = DVector::from_column_slice(x);
        match self.params.kind {
            DiscriminantKind::Lda => self.linear.iter().map(|(w, c)| xv.dot(w) + c).collect(),
            DiscriminantKind::Qda => self
                .prepared
                .iter()
                .zip(&self.params.means)
                .zip(&self.params.priors)
                .map(|((p, mu), &prior)| {
                    let diff = &xv - DVector::from_column_slice(mu);
                    let q = diff.dot(&(&p.inv * &diff));
                    -0.5 * p.log_det - 0.5 * q + prior.ln()
                })
                .collect(),
        }
    }

    pub fn predict_row(&self, x: &[f64]) -> u8 {
        argmax(&self.discriminants(x)) as u8
    }

    pub fn predict(&self, features: &Features) -> Result<Vec<u8>> {
        if features.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: features.dim(),
            });
        }
        Ok(features
            .data()
            .par_chunks_exact(features.dim())
            .map(|x| self.predict_row(x))
            .collect())
    }
}

/// Index of the largest value; the first one wins ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > values[best] { i } else { best })
}
