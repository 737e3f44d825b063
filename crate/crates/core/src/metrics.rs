//! Confusion-matrix metrics, overlap indices and Cohen's kappa.
//!
//! Conventions where a ratio has a zero denominator:
//! precision or recall of a class that was never predicted (or never
//! present) is 0 and flagged in [`ClassMetrics`]; IoU and Dice of two empty
//! sets are 1.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::LabelMask;

/// `K x K` count table; rows are truth, columns are prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> Self {
        Self {
            k,
            counts: vec![0; k * k],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidParameter("confusion matrix must be square".into()));
        }
        Ok(Self {
            k,
            counts: rows.concat(),
        })
    }

    /// Tallies paired label slices.
    pub fn from_labels(truth: &[u8], pred: &[u8], k: usize) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::ShapeMismatch {
                left: (truth.len(), 1),
                right: (pred.len(), 1),
            });
        }
        let mut m = Self::zeros(k);
        for (&t, &p) in truth.iter().zip(pred) {
            let (t, p) = (usize::from(t), usize::from(p));
            if t >= k || p >= k {
                return Err(Error::InvalidParameter(format!(
                    "label {} out of range for {k} classes",
                    t.max(p)
                )));
            }
            m.counts[t * k + p] += 1;
        }
        Ok(m)
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.k + pred]
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.k.max(1)).map(<[u64]>::to_vec).collect()
    }

    /// Row-major flat counts.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        (0..self.k).map(|p| self.get(truth, p)).sum()
    }

    pub fn col_sum(&self, pred: usize) -> u64 {
        (0..self.k).map(|t| self.get(t, pred)).sum()
    }

    /// One-vs-rest counts for `class`.
    pub fn binary(&self, class: usize) -> BinaryCounts {
        let tp = self.get(class, class);
        let fp = self.col_sum(class) - tp;
        let fn_ = self.row_sum(class) - tp;
        BinaryCounts {
            tp,
            fp,
            fn_,
            tn: self.total() - tp - fp - fn_,
        }
    }

    /// Rows normalized to percentages (a row of zeros stays zero).
    pub fn row_percentages(&self) -> Vec<Vec<f64>> {
        (0..self.k)
            .map(|t| {
                let s = self.row_sum(t);
                (0..self.k)
                    .map(|p| {
                        if s == 0 {
                            0.0
                        } else {
                            100.0 * self.get(t, p) as f64 / s as f64
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Builds the confusion matrix of two aligned masks.
pub fn confusion(pred: &LabelMask, truth: &LabelMask) -> Result<ConfusionMatrix> {
    if pred.shape() != truth.shape() {
        return Err(Error::ShapeMismatch {
            left: pred.shape(),
            right: truth.shape(),
        });
    }
    let k = pred.num_classes().max(truth.num_classes());
    ConfusionMatrix::from_labels(truth.labels(), pred.labels(), k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinaryCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

impl BinaryCounts {
    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.tp + self.tn + self.fp + self.fn_)
    }

    pub fn f1(&self) -> Option<f64> {
        Some(f1(self.precision()?, self.recall()?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub iou: f64,
    pub dice: f64,
    /// Number of pixels of this class in the truth.
    pub support: u64,
    /// False when the class was never predicted (precision set to 0).
    pub precision_defined: bool,
    /// False when the class is absent from the truth (recall set to 0).
    pub recall_defined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Support-weighted averages.
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    /// `None` when chance agreement is 1 (a single category overall).
    pub kappa: Option<f64>,
    pub confusion: ConfusionMatrix,
}

/// IoU and Dice for `class` read off a confusion matrix.
pub fn overlap_from_confusion(m: &ConfusionMatrix, class: usize) -> (f64, f64) {
    let inter = m.get(class, class);
    let a = m.col_sum(class);
    let b = m.row_sum(class);
    let union = a + b - inter;
    if union == 0 {
        return (1.0, 1.0);
    }
    (
        inter as f64 / union as f64,
        2.0 * inter as f64 / (a + b) as f64,
    )
}

/// IoU and Dice of the predicted and true pixel sets of `class`.
pub fn overlap_metrics(pred: &LabelMask, truth: &LabelMask, class: u8) -> Result<(f64, f64)> {
    if pred.shape() != truth.shape() {
        return Err(Error::ShapeMismatch {
            left: pred.shape(),
            right: truth.shape(),
        });
    }
    let (mut inter, mut a, mut b) = (0u64, 0u64, 0u64);
    for (&p, &t) in pred.labels().iter().zip(truth.labels()) {
        let in_a = p == class;
        let in_b = t == class;
        a += u64::from(in_a);
        b += u64::from(in_b);
        inter += u64::from(in_a && in_b);
    }
    let union = a + b - inter;
    if union == 0 {
        return Ok((1.0, 1.0));
    }
    Ok((
        inter as f64 / union as f64,
        2.0 * inter as f64 / (a + b) as f64,
    ))
}

/// Cohen's kappa, `(p0 − pe) / (1 − pe)`.
///
/// Evaluated as the exact integer ratio
/// `(N·trace − Σ rₖcₖ) / (N² − Σ rₖcₖ)` so that `κ = 1` for diagonal
/// matrices and `κ = 0` when `p0 = pe` hold exactly.
pub fn kappa(m: &ConfusionMatrix) -> Result<f64> {
    let total = u128::from(m.total());
    if total == 0 {
        return Err(Error::EmptyMatrix);
    }
    let chance: u128 = (0..m.num_classes())
        .map(|k| u128::from(m.row_sum(k)) * u128::from(m.col_sum(k)))
        .sum();
    let den = total * total - chance;
    if den == 0 {
        return Err(Error::UndefinedKappa);
    }
    let num = (total * u128::from(m.trace())) as i128 - chance as i128;
    Ok(num as f64 / den as f64)
}

/// Every scalar metric derived from a confusion matrix.
pub fn scalar_metrics(m: &ConfusionMatrix) -> Result<MetricReport> {
    let total = m.total();
    if total == 0 || m.num_classes() == 0 {
        return Err(Error::EmptyMatrix);
    }
    let per_class: Vec<ClassMetrics> = (0..m.num_classes())
        .map(|k| {
            let b = m.binary(k);
            let (precision, precision_defined) = b.precision().map_or((0.0, false), |p| (p, true));
            let (recall, recall_defined) = b.recall().map_or((0.0, false), |r| (r, true));
            let (iou, dice) = overlap_from_confusion(m, k);
            ClassMetrics {
                precision,
                recall,
                f1: f1(precision, recall),
                iou,
                dice,
                support: m.row_sum(k),
                precision_defined,
                recall_defined,
            }
        })
        .collect();
    let kn = per_class.len() as f64;
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / kn;
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        per_class
            .iter()
            .map(|c| f(c) * c.support as f64)
            .sum::<f64>()
            / total as f64
    };
    let kappa = match kappa(m) {
        Ok(k) => Some(k),
        Err(Error::UndefinedKappa) => None,
        Err(e) => return Err(e),
    };
    Ok(MetricReport {
        accuracy: m.trace() as f64 / total as f64,
        macro_precision: mean(|c| c.precision),
        macro_recall: mean(|c| c.recall),
        macro_f1: mean(|c| c.f1),
        weighted_precision: weighted(|c| c.precision),
        weighted_recall: weighted(|c| c.recall),
        weighted_f1: weighted(|c| c.f1),
        kappa,
        per_class,
        confusion: m.clone(),
    })
}

impl MetricReport {
    fn class_label(names: &[String], k: usize) -> String {
        names.get(k).cloned().unwrap_or_else(|| format!("class{k}"))
    }

    /// Human-readable table (percentages, two decimals).
    pub fn to_table(&self, class_names: &[String]) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<12} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
            "class", "precision", "recall", "f1", "iou", "dice", "support"
        );
        for (k, c) in self.per_class.iter().enumerate() {
            let _ = writeln!(
                s,
                "{:<12} {:>9.2} {:>9.2} {:>9.2} {:>9.2} {:>9.2} {:>9}",
                Self::class_label(class_names, k),
                100.0 * c.precision,
                100.0 * c.recall,
                100.0 * c.f1,
                100.0 * c.iou,
                100.0 * c.dice,
                c.support
            );
        }
        let _ = writeln!(
            s,
            "{:<12} {:>9.2} {:>9.2} {:>9.2}",
            "macro",
            100.0 * self.macro_precision,
            100.0 * self.macro_recall,
            100.0 * self.macro_f1
        );
        let _ = writeln!(
            s,
            "{:<12} {:>9.2} {:>9.2} {:>9.2}",
            "weighted",
            100.0 * self.weighted_precision,
            100.0 * self.weighted_recall,
            100.0 * self.weighted_f1
        );
        let _ = writeln!(s, "accuracy     {:.4}", self.accuracy);
        match self.kappa {
            Some(k) => {
                let _ = writeln!(s, "kappa        {k:.4}");
            }
            None => {
                let _ = writeln!(s, "kappa        undefined");
            }
        }
        let _ = writeln!(s, "normalized confusion (% of each truth row):");
        for (t, row) in self.confusion.row_percentages().iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:7.2}")).collect();
            let _ = writeln!(s, "  {:<10} {}", Self::class_label(class_names, t), cells.join(" "));
        }
        s
    }

    /// Long-format `scope,metric,value` rows.
    pub fn to_long_rows(&self, class_names: &[String]) -> Vec<(String, String, String)> {
        let mut rows = Vec::new();
        let mut push = |scope: &str, metric: &str, value: String| {
            rows.push((scope.to_string(), metric.to_string(), value));
        };
        for (k, c) in self.per_class.iter().enumerate() {
            let scope = Self::class_label(class_names, k);
            push(&scope, "precision", c.precision.to_string());
            push(&scope, "recall", c.recall.to_string());
            push(&scope, "f1", c.f1.to_string());
            push(&scope, "iou", c.iou.to_string());
            push(&scope, "dice", c.dice.to_string());
            push(&scope, "support", c.support.to_string());
        }
        push("overall", "accuracy", self.accuracy.to_string());
        push(
            "overall",
            "kappa",
            self.kappa.map(|k| k.to_string()).unwrap_or_default(),
        );
        push("macro", "precision", self.macro_precision.to_string());
        push("macro", "recall", self.macro_recall.to_string());
        push("macro", "f1", self.macro_f1.to_string());
        push("weighted", "precision", self.weighted_precision.to_string());
        push("weighted", "recall", self.weighted_recall.to_string());
        push("weighted", "f1", self.weighted_f1.to_string());
        for t in 0..self.confusion.num_classes() {
            for p in 0..self.confusion.num_classes() {
                push(
                    "confusion",
                    &format!("{}->{}", Self::class_label(class_names, t), Self::class_label(class_names, p)),
                    self.confusion.get(t, p).to_string(),
                );
            }
        }
        rows
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, class_names: &[String]) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Csv(e.to_string()))?;
        w.write_record(["scope", "metric", "value"])
            .map_err(|e| Error::Csv(e.to_string()))?;
        for (a, b, c) in self.to_long_rows(class_names) {
            w.write_record([a, b, c]).map_err(|e| Error::Csv(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(w: usize, h: usize, k: usize, labels: &[u8]) -> LabelMask {
        LabelMask::new(w, h, k, labels.to_vec()).unwrap()
    }

    #[test]
    fn confusion_basic_cases() {
        let a = mask(2, 2, 2, &[0, 1, 1, 0]);
        let same = confusion(&a, &a).unwrap();
        assert_eq!(same.rows(), vec![vec![2, 0], vec![0, 2]]);

        let b = mask(2, 2, 2, &[1, 0, 0, 1]);
        assert_eq!(confusion(&b, &a).unwrap().rows(), vec![vec![0, 2], vec![2, 0]]);

        // hand tally: truth [0,0,1,1], pred [0,1,1,1]
        let truth = mask(2, 2, 2, &[0, 0, 1, 1]);
        let pred = mask(2, 2, 2, &[0, 1, 1, 1]);
        assert_eq!(confusion(&pred, &truth).unwrap().rows(), vec![vec![1, 1], vec![0, 2]]);

        let other = mask(4, 1, 2, &[0, 0, 1, 1]);
        assert!(matches!(confusion(&other, &truth), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn scalar_metrics_examples() {
        let diag = ConfusionMatrix::from_rows(&[vec![5, 0], vec![0, 7]]).unwrap();
        let r = scalar_metrics(&diag).unwrap();
        assert_eq!(r.accuracy, 1.0);
        for c in &r.per_class {
            assert_eq!((c.precision, c.recall, c.f1), (1.0, 1.0, 1.0));
        }
        assert_eq!(r.kappa, Some(1.0));

        let m = ConfusionMatrix::from_rows(&[vec![40, 10], vec![20, 30]]).unwrap();
        let r = scalar_metrics(&m).unwrap();
        assert!((r.accuracy - 0.7).abs() < 1e-15);
        // class 1: P = 30/40, R = 30/50
        let c1 = &r.per_class[1];
        assert!((c1.precision - 0.75).abs() < 1e-15);
        assert!((c1.recall - 0.6).abs() < 1e-15);
        assert!((c1.f1 - 2.0 * 0.75 * 0.6 / 1.35).abs() < 1e-15);

        assert!(matches!(
            scalar_metrics(&ConfusionMatrix::zeros(2)),
            Err(Error::EmptyMatrix)
        ));
    }

    #[test]
    fn absent_class_is_flagged() {
        let m = ConfusionMatrix::from_rows(&[vec![3, 0], vec![2, 0]]).unwrap();
        let r = scalar_metrics(&m).unwrap();
        assert!(!r.per_class[1].precision_defined);
        assert_eq!(r.per_class[1].precision, 0.0);
        assert!(r.per_class[1].recall_defined);
        assert_eq!(r.per_class[1].recall, 0.0);
    }

    #[test]
    fn kappa_examples() {
        let m = ConfusionMatrix::from_rows(&[vec![40, 10], vec![20, 30]]).unwrap();
        assert!((kappa(&m).unwrap() - 0.4).abs() < 1e-15);

        let single = ConfusionMatrix::from_rows(&[vec![9, 0], vec![0, 0]]).unwrap();
        assert!(matches!(kappa(&single), Err(Error::UndefinedKappa)));
        assert!(scalar_metrics(&single).unwrap().kappa.is_none());

        // p0 = pe = 0.5
        let chance = ConfusionMatrix::from_rows(&[vec![1, 1], vec![1, 1]]).unwrap();
        assert_eq!(kappa(&chance).unwrap(), 0.0);
    }

    #[test]
    fn overlap_examples() {
        let a = mask(3, 2, 2, &[1, 1, 0, 1, 0, 0]);
        assert_eq!(overlap_metrics(&a, &a, 1).unwrap(), (1.0, 1.0));

        let b = mask(3, 2, 2, &[0, 0, 1, 0, 1, 1]);
        assert_eq!(overlap_metrics(&a, &b, 1).unwrap(), (0.0, 0.0));

        // |A| = |B| = 3, |A∩B| = 2
        let c = mask(3, 2, 2, &[1, 1, 1, 0, 0, 0]);
        let (iou, dice) = overlap_metrics(&a, &c, 1).unwrap();
        assert!((iou - 0.5).abs() < 1e-15);
        assert!((dice - 2.0 / 3.0).abs() < 1e-15);

        let zeros = mask(3, 2, 2, &[0; 6]);
        assert_eq!(overlap_metrics(&zeros, &zeros, 1).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn long_rows_cover_report() {
        let m = ConfusionMatrix::from_rows(&[vec![40, 10], vec![20, 30]]).unwrap();
        let r = scalar_metrics(&m).unwrap();
        let rows = r.to_long_rows(&["bg".into(), "fg".into()]);
        assert!(rows.contains(&("overall".into(), "accuracy".into(), "0.7".into())));
        assert!(rows.contains(&("confusion".into(), "fg->bg".into(), "20".into())));
        assert!(r.to_table(&[]).contains("class1"));
    }
}
