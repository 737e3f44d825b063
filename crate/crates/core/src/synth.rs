//! Seeded synthetic images with known statistical structure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{GrayImage, LabelMask};
use crate::prefilter::BoxCoxParams;

fn normal(mu: f64, sigma: f64) -> Result<Normal<f64>> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("standard deviation must be >= 0, got {sigma}")));
    }
    Normal::new(mu, sigma).map_err(|e| Error::InvalidParameter(format!("normal({mu}, {sigma}): {e}")))
}

fn lognormal(mu: f64, sigma: f64) -> Result<LogNormal<f64>> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("standard deviation must be >= 0, got {sigma}")));
    }
    LogNormal::new(mu, sigma).map_err(|e| Error::InvalidParameter(format!("lognormal({mu}, {sigma}): {e}")))
}

fn to_u8_level(v: f64) -> f64 {
    v.round().clamp(0.0, 255.0)
}

/// `n` draws of `y` with `boxcox(y; λ, 0) ~ N(μ, σ²)`.
///
/// Normal draws outside the image of the transform (`λz ≤ −1`) are
/// rejected and redrawn, so every returned value is finite and positive.
pub fn boxcox_normal_sample(lambda: f64, mu: f64, sigma: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let dist = normal(mu, sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        if attempts > 100 * n.max(100) {
            return Err(Error::InvalidParameter(format!(
                "N({mu}, {sigma}^2) rarely lands in the domain of the inverse transform at lambda {lambda}"
            )));
        }
        let z = dist.sample(&mut rng);
        if let Some(y) = BoxCoxParams::invert_value(lambda, z) {
            if y.is_finite() && y > 0.0 {
                out.push(y);
            }
        }
    }
    Ok(out)
}

/// Log-normal intensities rounded to 8-bit levels.
pub fn lognormal_image(width: usize, height: usize, mu: f64, sigma: f64, seed: u64) -> Result<GrayImage> {
    let dist = lognormal(mu, sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..width * height).map(|_| to_u8_level(dist.sample(&mut rng))).collect();
    GrayImage::new(width, height, data)
}

/// Normal intensities rounded to 8-bit levels.
pub fn normal_image(width: usize, height: usize, mu: f64, sigma: f64, seed: u64) -> Result<GrayImage> {
    let dist = normal(mu, sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..width * height).map(|_| to_u8_level(dist.sample(&mut rng))).collect();
    GrayImage::new(width, height, data)
}

/// Two-class "crack" scene: a bright log-normal background crossed by thin
/// dark random-walk lines whose intensities are also log-normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrackScene {
    pub width: usize,
    pub height: usize,
    /// `(μ, σ)` of the log-intensity of the background (class 0).
    pub background: (f64, f64),
    /// `(μ, σ)` of the log-intensity of the cracks (class 1).
    pub crack: (f64, f64),
    pub cracks: usize,
    /// Line thickness in pixels.
    pub thickness: usize,
}

impl Default for CrackScene {
    fn default() -> Self {
        Self {
            width: 128,
            height: 128,
            background: (3.8, 0.47),
            crack: (1.1, 0.3),
            cracks: 3,
            thickness: 2,
        }
    }
}

impl CrackScene {
    pub fn generate(&self, seed: u64) -> Result<(GrayImage, LabelMask)> {
        let (w, h) = (self.width, self.height);
        if w < 2 || h < 2 || self.thickness == 0 || self.thickness >= h {
            return Err(Error::InvalidParameter(format!(
                "crack scene {w}x{h} with thickness {} is too small",
                self.thickness
            )));
        }
        let bg = lognormal(self.background.0, self.background.1)?;
        let fg = lognormal(self.crack.0, self.crack.1)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let mut labels = vec![0u8; w * h];
        let max_row = (h - self.thickness) as i64;
        for _ in 0..self.cracks {
            let mut y = rng.random_range(0..=max_row);
            for x in 0..w {
                for t in 0..self.thickness {
                    labels[(y as usize + t) * w + x] = 1;
                }
                y = (y + rng.random_range(-1..=1)).clamp(0, max_row);
            }
        }
        let data = labels
            .iter()
            .map(|&l| to_u8_level(if l == 1 { fg.sample(&mut rng) } else { bg.sample(&mut rng) }))
            .collect();
        let mask = LabelMask::new(w, h, 2, labels)?
            .with_class_names(vec!["background".into(), "crack".into()])?;
        Ok((GrayImage::new(w, h, data)?, mask))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boxcox_sample_is_normal_after_transform() {
        let y = boxcox_normal_sample(0.5, 3.0, 1.0, 5000, 1).unwrap();
        assert!(y.iter().all(|&v| v > 0.0));
        let z: Vec<f64> = y.iter().map(|&v| BoxCoxParams::apply_shifted(0.5, v)).collect();
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        assert!((mean - 3.0).abs() < 0.05, "{mean}");
    }

    #[test]
    fn crack_scene_is_seeded_and_mostly_background() {
        let scene = CrackScene::default();
        let (img, mask) = scene.generate(4).unwrap();
        let (img2, mask2) = scene.generate(4).unwrap();
        assert_eq!(img, img2);
        assert_eq!(mask, mask2);
        let frac = mask.labels().iter().filter(|&&l| l == 1).count() as f64 / mask.labels().len() as f64;
        assert!(frac > 0.02 && frac < 0.1, "{frac}");
        assert!(img.data().iter().all(|v| (0.0..=255.0).contains(v) && v.fract() == 0.0));
    }

    #[test]
    fn images_have_requested_shape() {
        assert_eq!(lognormal_image(5, 3, 4.0, 0.3, 0).unwrap().shape(), (5, 3));
        assert_eq!(normal_image(4, 4, 128.0, 5.0, 0).unwrap().shape(), (4, 4));
        assert!(normal_image(4, 4, 128.0, -1.0, 0).is_err());
    }
}
