use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::discriminant::argmax;
use super::features::Features;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub num_classes: usize,
    pub train: Features,
    pub labels: Vec<u8>,
}

pub fn fit_knn(features: &Features, labels: &[u8], num_classes: usize, k: usize) -> Result<KnnModel> {
    if features.is_empty() {
        return Err(Error::Degenerate("empty training set".into()));
    }
    if labels.len() != features.rows() {
        return Err(Error::DimensionMismatch {
            expected: features.rows(),
            got: labels.len(),
        });
    }
    if k == 0 || k > features.rows() {
        return Err(Error::InvalidParameter(format!(
            "K = {k} must be in 1..={}",
            features.rows()
        )));
    }
    if let Some(&l) = labels.iter().find(|&&l| usize::from(l) >= num_classes) {
        return Err(Error::InvalidParameter(format!("label {l} >= {num_classes}")));
    }
    Ok(KnnModel {
        k,
        num_classes,
        train: features.clone(),
        labels: labels.to_vec(),
    })
}

/// Heap entry ordered by `(distance, index)`.
#[derive(PartialEq)]
struct Neighbor(f64, usize);

impl Eq for Neighbor {}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KnnModel {
    pub fn dim(&self) -> usize {
        self.train.dim()
    }

    /// Indices of the `K` nearest training rows, nearest first; equal
    /// distances are ordered by row index.
    pub fn neighbors(&self, x: &[f64]) -> Vec<usize> {
        let mut heap: BinaryHeap<Neighbor> = BinaryHeap::with_capacity(self.k + 1);
        for (i, row) in self.train.iter_rows().enumerate() {
            let cand = Neighbor(sq_dist(x, row), i);
            if heap.len() < self.k {
                heap.push(cand);
            } else if cand < *heap.peek().expect("k >= 1") {
                heap.pop();
                heap.push(cand);
            }
        }
        heap.into_sorted_vec().into_iter().map(|n| n.1).collect()
    }

    /// Empirical class frequencies among the neighbours.
    pub fn posterior(&self, x: &[f64]) -> Vec<f64> {
        let mut counts = vec![0usize; self.num_classes];
        for i in self.neighbors(x) {
            counts[usize::from(self.labels[i])] += 1;
        }
        counts.iter().map(|&c| c as f64 / self.k as f64).collect()
    }

    pub fn predict_row(&self, x: &[f64]) -> u8 {
        argmax(&self.posterior(x)) as u8
    }

    pub fn predict(&self, queries: &Features) -> Result<Vec<u8>> {
        if queries.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: queries.dim(),
            });
        }
        Ok(queries
            .data()
            .par_chunks_exact(queries.dim())
            .map(|x| self.predict_row(x))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k1_returns_matching_point_label() {
        let x = Features::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![5.0, 5.0]]).unwrap();
        let m = fit_knn(&x, &[0, 1, 1], 2, 1).unwrap();
        assert_eq!(m.predict_row(&[1.0, 1.0]), 1);
        assert_eq!(m.predict_row(&[0.0, 0.0]), 0);
    }

    #[test]
    fn k_equals_n_is_global_majority() {
        let x = Features::new(5, 1, vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = fit_knn(&x, &[1, 0, 1, 1, 0], 2, 5).unwrap();
        for q in [-10.0, 0.0, 2.5, 100.0] {
            assert_eq!(m.predict_row(&[q]), 1);
        }
    }

    #[test]
    fn equidistant_neighbors_prefer_lower_index() {
        let x = Features::new(3, 1, vec![2.0, 0.0, 4.0]).unwrap();
        let m = fit_knn(&x, &[0, 1, 0], 2, 2).unwrap();
        // query 1.0: row 1 (dist 1) and row 0 (dist 1) tie at the front
        assert_eq!(m.neighbors(&[1.0]), vec![0, 1]);
        // query 3.0: rows 0 and 2 tie
        assert_eq!(m.neighbors(&[3.0]), vec![0, 2]);
        // a 1-1 vote breaks to the smaller class index
        assert_eq!(m.predict_row(&[1.0]), 0);
    }

    #[test]
    fn error_contracts() {
        let x = Features::new(2, 1, vec![0.0, 1.0]).unwrap();
        assert!(fit_knn(&x, &[0, 1], 2, 3).is_err());
        assert!(fit_knn(&x, &[0, 1], 2, 0).is_err());
        let empty = Features::new(0, 1, vec![]).unwrap();
        assert!(matches!(fit_knn(&empty, &[], 2, 1), Err(Error::Degenerate(_))));
    }
}
