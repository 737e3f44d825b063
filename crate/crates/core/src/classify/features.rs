use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Dense row-major `n x d` feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Features {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Features {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() != rows * dim {
            return Err(Error::InvalidParameter(format!(
                "feature buffer of length {} does not match {rows}x{dim}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("features must be finite".into()));
        }
        Ok(Self { rows, dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidParameter("ragged feature rows".into()));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Rows at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            dim: self.dim,
            data,
        }
    }

    /// Every entry multiplied by `a`.
    pub fn scaled(&self, a: f64) -> Self {
        Self {
            rows: self.rows,
            dim: self.dim,
            data: self.data.iter().map(|v| v * a).collect(),
        }
    }
}

/// Per-pixel feature extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum FeaturizerSpec {
    /// The pixel intensity alone (`d = 1`).
    #[default]
    Intensity,
    /// Intensity, local mean and local standard deviation over a square
    /// window with replicated borders (`d = 3`).
    Window { size: usize },
}

impl FeaturizerSpec {
    pub fn window(size: usize) -> Result<Self> {
        let spec = FeaturizerSpec::Window { size };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            FeaturizerSpec::Intensity => Ok(()),
            FeaturizerSpec::Window { size } if size >= 3 && size % 2 == 1 => Ok(()),
            FeaturizerSpec::Window { size } => Err(Error::InvalidParameter(format!(
                "window size must be odd and >= 3, got {size}"
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FeaturizerSpec::Intensity => 1,
            FeaturizerSpec::Window { .. } => 3,
        }
    }
}

impl std::fmt::Display for FeaturizerSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FeaturizerSpec::Intensity => f.write_str("intensity"),
            FeaturizerSpec::Window { size } => write!(f, "window:{size}"),
        }
    }
}

impl std::str::FromStr for FeaturizerSpec {
    type Err = Error;

    /// `intensity` or `window:<size>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "intensity" => Ok(FeaturizerSpec::Intensity),
            other => {
                let size = other
                    .strip_prefix("window:")
                    .and_then(|n| n.parse().ok())
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown featurizer {s:?}")))?;
                FeaturizerSpec::window(size)
            }
        }
    }
}

/// One feature row per pixel, row-major pixel order.
pub fn featurize(img: &GrayImage, spec: FeaturizerSpec) -> Result<Features> {
    spec.validate()?;
    match spec {
        FeaturizerSpec::Intensity => Features::new(img.len(), 1, img.data().to_vec()),
        FeaturizerSpec::Window { size } => {
            let (w, h) = img.shape();
            let r = (size / 2) as isize;
            let count = (size * size) as f64;
            let clamp = |v: isize, hi: usize| v.clamp(0, hi as isize - 1) as usize;
            let mut data = Vec::with_capacity(img.len() * 3);
            let mut window = Vec::with_capacity(size * size);
            for y in 0..h {
                for x in 0..w {
                    window.clear();
                    for dy in -r..=r {
                        let yy = clamp(y as isize + dy, h);
                        for dx in -r..=r {
                            window.push(img.get(clamp(x as isize + dx, w), yy));
                        }
                    }
                    let mean = window.iter().sum::<f64>() / count;
                    let var = window.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
                    data.extend_from_slice(&[img.get(x, y), mean, var.sqrt()]);
                }
            }
            Features::new(img.len(), 3, data)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intensity_features() {
        let img = GrayImage::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let f = featurize(&img, FeaturizerSpec::Intensity).unwrap();
        assert_eq!(f.dim(), 1);
        assert_eq!(f.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn window_on_constant_image() {
        let img = GrayImage::new(3, 3, vec![6.0; 9]).unwrap();
        let f = featurize(&img, FeaturizerSpec::window(3).unwrap()).unwrap();
        for row in f.iter_rows() {
            assert_eq!(row, &[6.0, 6.0, 0.0]);
        }
    }

    #[test]
    fn window_mean_of_center_spike() {
        let img = GrayImage::from_rows(&[
            vec![0.0, 0.0, 0.0],
            vec![0.0, 9.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        let f = featurize(&img, FeaturizerSpec::window(3).unwrap()).unwrap();
        assert_eq!(f.row(4)[1], 1.0);
        // corner (0,0) with replicated border: window holds the spike once
        assert_eq!(f.row(0)[1], 1.0);
        // (2,1): column 1 holds the spike, replicated nowhere
        assert_eq!(f.row(5)[1], 1.0);
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("intensity".parse::<FeaturizerSpec>().unwrap(), FeaturizerSpec::Intensity);
        assert_eq!(
            "window:5".parse::<FeaturizerSpec>().unwrap(),
            FeaturizerSpec::Window { size: 5 }
        );
        assert!("window:4".parse::<FeaturizerSpec>().is_err());
        assert!("window:1".parse::<FeaturizerSpec>().is_err());
    }
}
