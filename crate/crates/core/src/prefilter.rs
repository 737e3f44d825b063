//! Pointwise intensity transforms and the prefiltering pipeline
//! (grayscale, shift, Box-Cox, histogram stretch).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{min_max, GrayImage, IntensityVector, RgbImage};
use crate::lambda::{fit_lambda, LambdaConfig, LambdaEstimate};

/// Below this magnitude the logarithmic branch is used.
pub const LAMBDA_ZERO_THRESHOLD: f64 = 1e-8;

/// Default shift added before the power transform so zero pixels stay admissible.
pub const DEFAULT_SHIFT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxCoxParams {
    pub lambda: f64,
    pub shift: f64,
}

impl BoxCoxParams {
    pub fn new(lambda: f64, shift: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be finite, got {lambda}")));
        }
        if !(shift.is_finite() && shift >= 0.0) {
            return Err(Error::InvalidParameter(format!("shift must be >= 0, got {shift}")));
        }
        Ok(Self { lambda, shift })
    }

    /// Transform of a single already-shifted value (`> 0`, or `0` when `λ > 0`).
    #[inline]
    pub fn apply_shifted(lambda: f64, shifted: f64) -> f64 {
        let log = shifted.ln();
        if lambda.abs() < LAMBDA_ZERO_THRESHOLD {
            log
        } else {
            // expm1 avoids cancellation for small |lambda * log|.
            (lambda * log).exp_m1() / lambda
        }
    }

    #[inline]
    pub fn invert_value(lambda: f64, v: f64) -> Option<f64> {
        if lambda.abs() < LAMBDA_ZERO_THRESHOLD {
            Some(v.exp())
        } else {
            let t = lambda * v;
            (t > -1.0 || (t == -1.0 && lambda > 0.0)).then(|| (t.ln_1p() / lambda).exp())
        }
    }
}

/// Box-Cox transform of every element: `((y + c)^λ - 1) / λ`, or `ln(y + c)` at `λ = 0`.
pub fn boxcox(v: &IntensityVector, p: BoxCoxParams) -> Result<IntensityVector> {
    let out = v
        .values()
        .iter()
        .enumerate()
        .map(|(index, &y)| {
            let shifted = y + p.shift;
            // Zero is admissible only on the power branch with positive λ,
            // where it maps to the finite value -1/λ.
            if !(shifted > 0.0 || (shifted == 0.0 && p.lambda >= LAMBDA_ZERO_THRESHOLD)) {
                return Err(Error::NonPositive {
                    index,
                    value: shifted,
                });
            }
            let t = BoxCoxParams::apply_shifted(p.lambda, shifted);
            if t.is_finite() {
                Ok(t)
            } else {
                Err(Error::NonFinite { index })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(v.map_values(out))
}

/// Exact inverse of [`boxcox`], shift removed.
pub fn inverse_boxcox(v: &IntensityVector, p: BoxCoxParams) -> Result<IntensityVector> {
    let out = v
        .values()
        .iter()
        .enumerate()
        .map(|(index, &t)| {
            let y = BoxCoxParams::invert_value(p.lambda, t)
                .ok_or(Error::OutOfDomain { index, value: t })?;
            if y.is_finite() {
                Ok(y - p.shift)
            } else {
                Err(Error::NonFinite { index })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(v.map_values(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    pub gain: f64,
    pub gamma: f64,
}

impl GammaParams {
    pub fn new(gain: f64, gamma: f64) -> Result<Self> {
        if !(gain > 0.0 && gain.is_finite() && gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma correction needs positive gain and gamma, got ({gain}, {gamma})"
            )));
        }
        Ok(Self { gain, gamma })
    }
}

/// Power-law correction `gain * f^gamma`.
pub fn gamma_correct(img: &GrayImage, p: GammaParams) -> Result<GrayImage> {
    let data = img
        .data()
        .iter()
        .map(|&f| p.gain * f.powf(p.gamma))
        .collect();
    GrayImage::new(img.width(), img.height(), data)
}

/// Target interval of a histogram stretch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StretchRange {
    pub min: f64,
    pub max: f64,
}

impl StretchRange {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && max > min) {
            return Err(Error::InvalidParameter(format!(
                "stretch range needs max > min, got [{min}, {max}]"
            )));
        }
        Ok(Self { min, max })
    }
}

impl Default for StretchRange {
    fn default() -> Self {
        Self {
            min: 0.0,
            max: 255.0,
        }
    }
}

impl std::str::FromStr for StretchRange {
    type Err = Error;

    /// Parses `lo:hi`.
    fn from_str(s: &str) -> Result<Self> {
        let (lo, hi) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("range {s:?} is not lo:hi")))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad range bound {t:?}")))
        };
        Self::new(parse(lo)?, parse(hi)?)
    }
}

impl std::fmt::Display for StretchRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.min, self.max)
    }
}

/// Affine map of the observed `[min, max]` onto `range`.
///
/// Endpoints are pinned exactly so the output extremes are `range.min` and
/// `range.max` without rounding drift.
pub fn stretch(v: &IntensityVector, range: StretchRange) -> Result<IntensityVector> {
    Ok(v.map_values(stretch_values(v.values(), range)?))
}

pub(crate) fn stretch_values(values: &[f64], range: StretchRange) -> Result<Vec<f64>> {
    let (lo, hi) = min_max(values).ok_or_else(|| Error::Degenerate("empty input".into()))?;
    if !(hi > lo) {
        return Err(Error::DegenerateContrast { value: lo });
    }
    let scale = (range.max - range.min) / (hi - lo);
    Ok(values
        .iter()
        .map(|&f| {
            if f == lo {
                range.min
            } else if f == hi {
                range.max
            } else {
                ((f - lo) * scale + range.min).clamp(range.min, range.max)
            }
        })
        .collect())
}

/// How the pipeline picks its Box-Cox parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaChoice {
    Fixed(f64),
    Estimate(LambdaConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub lambda: LambdaChoice,
    pub shift: f64,
    pub range: StretchRange,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            lambda: LambdaChoice::Estimate(LambdaConfig::default()),
            shift: DEFAULT_SHIFT,
            range: StretchRange::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub image: GrayImage,
    pub params: BoxCoxParams,
    /// Present when the parameter was estimated.
    pub estimate: Option<LambdaEstimate>,
}

/// Box-Cox with `params`, then stretch to `range`, on a grayscale image.
pub fn transform_gray(img: &GrayImage, params: BoxCoxParams, range: StretchRange) -> Result<GrayImage> {
    let transformed = boxcox(&img.vectorize(), params)?;
    stretch(&transformed, range)?.unvectorize()
}

/// Grayscale conversion, shift, Box-Cox (estimating the parameter when
/// asked), and histogram stretch.
pub fn prefilter_pipeline(img: &RgbImage, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    prefilter_gray(&img.to_gray(), cfg)
}

/// [`prefilter_pipeline`] starting from an already grayscale image.
pub fn prefilter_gray(gray: &GrayImage, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let (lambda, estimate) = match &cfg.lambda {
        LambdaChoice::Fixed(l) => (*l, None),
        LambdaChoice::Estimate(lc) => {
            let est = fit_lambda(&gray.vectorize(), cfg.shift, lc)?;
            (est.lambda_hat, Some(est))
        }
    };
    let params = BoxCoxParams::new(lambda, cfg.shift)?;
    let image = transform_gray(gray, params, cfg.range)?;
    Ok(PipelineOutput {
        image,
        params,
        estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one(y: f64) -> IntensityVector {
        IntensityVector::from_values(vec![y])
    }

    fn bc(y: f64, lambda: f64, shift: f64) -> f64 {
        boxcox(&one(y), BoxCoxParams::new(lambda, shift).unwrap()).unwrap().values()[0]
    }

    #[test]
    fn boxcox_examples() {
        assert!((bc(4.0, 0.5, 0.0) - 2.0).abs() < 1e-15);
        assert!((bc(std::f64::consts::E, 0.0, 0.0) - 1.0).abs() < 1e-15);
        for lambda in [-2.0, -0.3, 0.0, 0.7, 3.0] {
            assert_eq!(bc(1.0, lambda, 0.0), 0.0);
        }
        // shifted form
        assert!((bc(3.0, 0.5, 1.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn boxcox_errors() {
        let p = BoxCoxParams::new(0.5, 0.0).unwrap();
        assert!(matches!(boxcox(&one(-0.5), p), Err(Error::NonPositive { .. })));
        assert_eq!(boxcox(&one(0.0), p).unwrap().values()[0], -2.0);
        for lambda in [0.0, -0.5] {
            let p = BoxCoxParams::new(lambda, 0.0).unwrap();
            assert!(matches!(boxcox(&one(0.0), p), Err(Error::NonPositive { .. })));
        }
        let big = BoxCoxParams::new(400.0, 0.0).unwrap();
        assert!(matches!(boxcox(&one(255.0), big), Err(Error::NonFinite { .. })));
        assert!(BoxCoxParams::new(1.0, -1.0).is_err());
    }

    #[test]
    fn inverse_examples() {
        let p0 = BoxCoxParams::new(0.0, 0.0).unwrap();
        let e = inverse_boxcox(&one(1.0), p0).unwrap().values()[0];
        assert!((e - std::f64::consts::E).abs() < 1e-15);
        let p = BoxCoxParams::new(0.5, 0.0).unwrap();
        assert!((inverse_boxcox(&one(2.0), p).unwrap().values()[0] - 4.0).abs() < 1e-14);
        // lambda * v + 1 = 0 maps back to zero, below that is out of domain
        assert_eq!(inverse_boxcox(&one(-2.0), p).unwrap().values()[0], 0.0);
        assert!(matches!(
            inverse_boxcox(&one(-2.5), p),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn continuity_at_zero() {
        for i in 0..=300 {
            let y = 0.5 + i as f64 * (299.5 / 300.0);
            assert!((bc(y, 1e-9, 0.0) - y.ln()).abs() < 1e-6);
            // just above the threshold, on the power branch
            assert!((bc(y, 2e-8, 0.0) - y.ln()).abs() < 1e-6);
        }
    }

    #[test]
    fn gamma_examples() {
        let img = GrayImage::from_rows(&[vec![4.0, 0.0, 17.5]]).unwrap();
        let out = gamma_correct(&img, GammaParams::new(1.0, 0.5).unwrap()).unwrap();
        assert_eq!(out.data()[0], 2.0);
        assert_eq!(out.data()[1], 0.0);
        let id = gamma_correct(&img, GammaParams::new(1.0, 1.0).unwrap()).unwrap();
        assert_eq!(id, img);
        let z = gamma_correct(&img, GammaParams::new(3.0, 2.2).unwrap()).unwrap();
        assert_eq!(z.data()[1], 0.0);
        assert!(GammaParams::new(0.0, 1.0).is_err());
        assert!(GammaParams::new(1.0, -1.0).is_err());
    }

    #[test]
    fn stretch_examples() {
        let v = IntensityVector::from_values(vec![10.0, 105.0, 200.0, 50.0]);
        let out = stretch(&v, StretchRange::default()).unwrap();
        assert_eq!(out.values()[0], 0.0);
        assert_eq!(out.values()[2], 255.0);
        assert!((out.values()[1] - 127.5).abs() < 1e-12);

        let flat = IntensityVector::from_values(vec![3.0; 9]);
        assert!(matches!(
            stretch(&flat, StretchRange::default()),
            Err(Error::DegenerateContrast { .. })
        ));
        assert!(StretchRange::new(5.0, 5.0).is_err());
        assert_eq!("0:255".parse::<StretchRange>().unwrap(), StretchRange::default());
    }

    #[test]
    fn pipeline_with_fixed_lambda_one_is_plain_stretch() {
        let gray = GrayImage::from_rows(&[vec![0.0, 10.0], vec![100.0, 255.0]]).unwrap();
        let cfg = PipelineConfig {
            lambda: LambdaChoice::Fixed(1.0),
            shift: 0.0,
            range: StretchRange::default(),
        };
        let out = prefilter_gray(&gray, &cfg).unwrap();
        for (a, b) in out.image.data().iter().zip(gray.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(out.estimate.is_none());
    }

    proptest! {
        // Restricted to |λ·log(y + c)| <= 10: beyond that the forward map
        // saturates at -1/λ and no inverse can recover 10 digits.
        #[test]
        fn inverse_roundtrip(
            ys in proptest::collection::vec(0.0f64..1000.0, 1..50),
            lambda in -3.0f64..5.0,
            shift in 0.01f64..5.0,
        ) {
            let ys: Vec<f64> = ys
                .into_iter()
                .filter(|y| (lambda * (y + shift).ln()).abs() <= 10.0)
                .collect();
            let p = BoxCoxParams::new(lambda, shift).unwrap();
            let v = IntensityVector::from_values(ys.clone());
            let t = boxcox(&v, p).unwrap();
            let back = inverse_boxcox(&t, p).unwrap();
            for (y, b) in ys.iter().zip(back.values()) {
                let rel = ((y + shift) - (b + shift)).abs() / (y + shift);
                prop_assert!(rel < 1e-10, "y={y} back={b} rel={rel}");
            }
        }

        #[test]
        fn boxcox_preserves_order(
            ys in proptest::collection::vec(0.0f64..300.0, 2..60),
            lambda in -3.0f64..5.0,
        ) {
            let p = BoxCoxParams::new(lambda, 1.0).unwrap();
            let t = boxcox(&IntensityVector::from_values(ys.clone()), p).unwrap();
            for i in 0..ys.len() {
                for j in 0..ys.len() {
                    if ys[i] < ys[j] {
                        prop_assert!(t.values()[i] <= t.values()[j]);
                    }
                }
            }
        }

        #[test]
        fn stretch_hits_endpoints(
            ys in proptest::collection::vec(-50.0f64..500.0, 2..60),
            lo in -10.0f64..10.0,
            width in 0.5f64..300.0,
        ) {
            prop_assume!(ys.iter().any(|&y| y != ys[0]));
            let r = StretchRange::new(lo, lo + width).unwrap();
            let out = stretch(&IntensityVector::from_values(ys), r).unwrap();
            let (mn, mx) = out.min_max().unwrap();
            prop_assert!((mn - r.min).abs() <= 1e-12);
            prop_assert!((mx - r.max).abs() <= 1e-12);
        }
    }
}
