//! In-memory raster types.
//!
//! All rasters are stored row-major: pixel `(x, y)` lives at index
//! `y * width + x`. Intensities are `f64` from decoding onwards; integer
//! quantization only happens when an image is written back to disk.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Luma weights applied to R, G and B.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// The same weights in thousandths; the weighted sum of 8-bit channels is
/// an exact integer, so one division is the only rounding step and gray
/// pixels (`r = g = b`) convert exactly.
const LUMA_MILLI: [u32; 3] = [299, 587, 114];

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::EmptyImage { width, height });
    }
    Ok(())
}

/// 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        check_dims(width, height)?;
        if pixels.len() != width * height {
            return Err(Error::ShapeMismatch {
                left: (width, height),
                right: (pixels.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds an RGB image whose three channels all equal `gray`.
    pub fn from_gray_u8(width: usize, height: usize, gray: &[u8]) -> Result<Self> {
        Self::new(width, height, gray.iter().map(|&v| [v, v, v]).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    /// Weighted luma conversion, kept in floating point.
    pub fn to_gray(&self) -> GrayImage {
        let [wr, wg, wb] = LUMA_MILLI;
        let data = self
            .pixels
            .iter()
            .map(|&[r, g, b]| {
                f64::from(wr * u32::from(r) + wg * u32::from(g) + wb * u32::from(b)) / 1000.0
            })
            .collect();
        GrayImage {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

/// Real-valued grayscale raster with finite, nonnegative intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::ShapeMismatch {
                left: (width, height),
                right: (data.len(), 1),
            });
        }
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidIntensity { index, value });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds an image from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::InvalidParameter("ragged rows".into()));
        }
        Self::new(width, height, rows.concat())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Row-major flattening.
    pub fn vectorize(&self) -> IntensityVector {
        IntensityVector {
            values: self.data.clone(),
            shape: (self.width, self.height),
        }
    }

    /// Rounds to the nearest integer and clamps to `[0, 255]`.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| v.round().clamp(0.0, 255.0) as u8)
            .collect()
    }
}

/// Flattened pixel intensities together with the raster shape they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityVector {
    values: Vec<f64>,
    shape: (usize, usize),
}

impl IntensityVector {
    /// Wraps a plain vector as a `len x 1` raster.
    pub fn from_values(values: Vec<f64>) -> Self {
        let n = values.len();
        Self {
            values,
            shape: (n, 1),
        }
    }

    pub fn with_shape(values: Vec<f64>, shape: (usize, usize)) -> Result<Self> {
        if values.len() != shape.0 * shape.1 {
            return Err(Error::ShapeMismatch {
                left: shape,
                right: (values.len(), 1),
            });
        }
        Ok(Self { values, shape })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(width, height)` of the originating raster.
    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    /// Same shape, new values. Used by the elementwise transforms.
    pub(crate) fn map_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            values,
            shape: self.shape,
        }
    }

    /// Inverse of [`GrayImage::vectorize`].
    pub fn unvectorize(&self) -> Result<GrayImage> {
        GrayImage::new(self.shape.0, self.shape.1, self.values.clone())
    }

    pub fn min_max(&self) -> Option<(f64, f64)> {
        min_max(&self.values)
    }
}

/// Sequential min/max; `None` on empty input.
pub(crate) fn min_max(values: &[f64]) -> Option<(f64, f64)> {
    let first = *values.first()?;
    Some(
        values
            .iter()
            .fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v))),
    )
}

/// Per-pixel class labels in `0..num_classes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMask {
    width: usize,
    height: usize,
    num_classes: usize,
    labels: Vec<u8>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    class_names: Vec<String>,
}

impl LabelMask {
    pub fn new(width: usize, height: usize, num_classes: usize, labels: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        if labels.len() != width * height {
            return Err(Error::ShapeMismatch {
                left: (width, height),
                right: (labels.len(), 1),
            });
        }
        if num_classes == 0 || num_classes > 256 {
            return Err(Error::InvalidParameter(format!(
                "class count must be in 1..=256, got {num_classes}"
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| usize::from(l) >= num_classes) {
            return Err(Error::InvalidParameter(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Self {
            width,
            height,
            num_classes,
            labels,
            class_names: Vec::new(),
        })
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        if !names.is_empty() && names.len() != self.num_classes {
            return Err(Error::InvalidParameter(format!(
                "{} class names for {} classes",
                names.len(),
                self.num_classes
            )));
        }
        self.class_names = names;
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rgb1(p: [u8; 3]) -> RgbImage {
        RgbImage::new(1, 1, vec![p]).unwrap()
    }

    #[test]
    fn gray_of_white_black_red() {
        assert_eq!(rgb1([255, 255, 255]).to_gray().data()[0], 255.0);
        assert_eq!(rgb1([0, 0, 0]).to_gray().data()[0], 0.0);
        let red = rgb1([255, 0, 0]).to_gray().data()[0];
        assert!((red - 76.245).abs() < 1e-12, "{red}");
    }

    #[test]
    fn gray_levels_convert_exactly() {
        for v in 0..=255u8 {
            assert_eq!(rgb1([v, v, v]).to_gray().data()[0], f64::from(v));
        }
    }

    #[test]
    fn vectorize_is_row_major() {
        let img = GrayImage::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let v = img.vectorize();
        assert_eq!(v.values(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(v.shape(), (2, 2));

        let single = GrayImage::new(1, 1, vec![5.0]).unwrap().vectorize();
        assert_eq!(single.values(), &[5.0]);
    }

    #[test]
    fn rejects_empty_and_negative() {
        assert!(matches!(
            GrayImage::new(0, 3, vec![]),
            Err(Error::EmptyImage { .. })
        ));
        assert!(matches!(
            GrayImage::new(1, 1, vec![-1.0]),
            Err(Error::InvalidIntensity { .. })
        ));
        assert!(GrayImage::new(1, 1, vec![f64::NAN]).is_err());
        assert!(LabelMask::new(2, 1, 2, vec![0, 2]).is_err());
    }

    proptest! {
        #[test]
        fn vectorize_roundtrip(w in 1usize..=32, h in 1usize..=32, seed in any::<u64>()) {
            let data: Vec<f64> = (0..w * h)
                .map(|i| ((i as u64).wrapping_mul(seed | 1) % 1000) as f64 / 3.0)
                .collect();
            let img = GrayImage::new(w, h, data).unwrap();
            prop_assert_eq!(img.vectorize().unvectorize().unwrap(), img);
        }

        #[test]
        fn gray_in_range(r in any::<u8>(), g in any::<u8>(), b in any::<u8>()) {
            let v = rgb1([r, g, b]).to_gray().data()[0];
            prop_assert!((0.0..=255.0 + 1e-9).contains(&v));
        }

        #[test]
        fn gray_is_linear_in_a_single_channel(v in 0u8..=127) {
            let one = rgb1([0, v, 0]).to_gray().data()[0];
            let two = rgb1([0, 2 * v, 0]).to_gray().data()[0];
            prop_assert!((two - 2.0 * one).abs() < 1e-12);
        }
    }
}
