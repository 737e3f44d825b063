use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Train and test pixel indices, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified random split: within every class, `round(fraction * n_k)`
/// pixels go to training and the rest to testing.
///
/// Classes are processed in label order from a single seeded stream, so the
/// split depends only on `(labels, fraction, seed)`.
pub fn stratified_split(labels: &[u8], num_classes: usize, fraction: f64, seed: u64) -> Result<Split> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction must be in (0, 1], got {fraction}"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class
            .get_mut(usize::from(l))
            .ok_or_else(|| Error::InvalidParameter(format!("label {l} >= {num_classes}")))?
            .push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut idx in by_class {
        idx.shuffle(&mut rng);
        let cut = ((idx.len() as f64) * fraction).round() as usize;
        train.extend_from_slice(&idx[..cut]);
        test.extend_from_slice(&idx[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// Deterministic stratified subsample of at most `cap` rows, used to bound
/// the cost of kernel and neighbour methods.
pub fn stratified_cap(labels: &[u8], num_classes: usize, cap: usize, seed: u64) -> Result<Vec<usize>> {
    if labels.len() <= cap {
        return Ok((0..labels.len()).collect());
    }
    let fraction = cap as f64 / labels.len() as f64;
    let mut keep = stratified_split(labels, num_classes, fraction, seed)?.train;
    keep.truncate(cap);
    Ok(keep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_stratified_and_disjoint() {
        let labels: Vec<u8> = (0..101).map(|i| u8::from(i % 5 == 0)).collect();
        let s = stratified_split(&labels, 2, 0.5, 1).unwrap();
        assert_eq!(s.train.len() + s.test.len(), labels.len());
        let ones_train = s.train.iter().filter(|&&i| labels[i] == 1).count();
        assert_eq!(ones_train, 11); // round(21 / 2)
        assert!(s.train.iter().all(|i| !s.test.contains(i)));
        assert_eq!(s, stratified_split(&labels, 2, 0.5, 1).unwrap());
        assert_ne!(s, stratified_split(&labels, 2, 0.5, 2).unwrap());
    }

    #[test]
    fn cap_limits_rows() {
        let labels: Vec<u8> = (0..1000).map(|i| (i % 3) as u8).collect();
        let keep = stratified_cap(&labels, 3, 100, 0).unwrap();
        assert!(keep.len() <= 100 && keep.len() >= 99);
        assert_eq!(stratified_cap(&labels[..50], 3, 100, 0).unwrap().len(), 50);
    }
}
