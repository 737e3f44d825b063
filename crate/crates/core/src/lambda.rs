//! Maximum-likelihood estimation of the Box-Cox parameter.
//!
//! The transformed intensities are modelled as `N(A θ, σ² I)`. For fixed λ
//! the nuisance parameters have closed forms, `θ̂ = (AᵀA)⁻¹Aᵀ y⁽λ⁾` and
//! `σ̂² = ‖y⁽λ⁾ − Aθ̂‖² / n`, which leaves the profile log-likelihood
//!
//! ```text
//! ℓp(λ) = −(n/2)·log σ̂²(λ) + (λ − 1)·Σ log(yᵢ + c)
//! ```
//!
//! maximized by a 61-point grid followed by golden-section refinement.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::IntensityVector;
use crate::prefilter::{BoxCoxParams, LAMBDA_ZERO_THRESHOLD};

/// Design matrix of the linear Gaussian model.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum LinearGaussianSpec {
    /// Single column of ones: θ̂ is the mean, σ̂² the biased variance.
    #[default]
    InterceptOnly,
    /// Explicit `n x p` design.
    Design(DMatrix<f64>),
}

impl LinearGaussianSpec {
    pub fn columns(&self) -> usize {
        match self {
            LinearGaussianSpec::InterceptOnly => 1,
            LinearGaussianSpec::Design(a) => a.ncols(),
        }
    }
}

/// Least-squares solver prepared once per design.
enum Solver {
    Intercept,
    Qr { q: DMatrix<f64>, r_inv: DMatrix<f64> },
}

impl Solver {
    fn new(spec: &LinearGaussianSpec, n: usize) -> Result<Self> {
        let p = spec.columns();
        if n < p + 1 {
            return Err(Error::Degenerate(format!(
                "{n} observations cannot identify {p} coefficients and a variance"
            )));
        }
        match spec {
            LinearGaussianSpec::InterceptOnly => Ok(Solver::Intercept),
            LinearGaussianSpec::Design(a) => {
                if a.nrows() != n {
                    return Err(Error::DimensionMismatch {
                        expected: a.nrows(),
                        got: n,
                    });
                }
                let qr = a.clone().qr();
                let r = qr.r();
                let scale = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let tol = scale * f64::EPSILON * n.max(p) as f64;
                if scale == 0.0 || r.diagonal().iter().any(|v| v.abs() <= tol) {
                    return Err(Error::RankDeficient);
                }
                let r_inv = r.try_inverse().ok_or(Error::RankDeficient)?;
                Ok(Solver::Qr { q: qr.q(), r_inv })
            }
        }
    }

    /// Returns `(θ̂, σ̂²)` without the degeneracy check.
    fn solve(&self, y: &[f64]) -> (Vec<f64>, f64) {
        let n = y.len() as f64;
        match self {
            Solver::Intercept => {
                let mean = y.iter().sum::<f64>() / n;
                let ss = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
                (vec![mean], ss / n)
            }
            Solver::Qr { q, r_inv } => {
                let yv = DVector::from_column_slice(y);
                let qty = q.transpose() * &yv;
                let theta = r_inv * &qty;
                let resid = &yv - q * qty;
                let ss = resid.iter().map(|v| v * v).sum::<f64>();
                (theta.iter().copied().collect(), ss / n)
            }
        }
    }
}

/// Closed-form θ̂ and σ̂² for already transformed data.
pub fn mle_theta_sigma(
    transformed: &IntensityVector,
    spec: &LinearGaussianSpec,
) -> Result<(Vec<f64>, f64)> {
    let solver = Solver::new(spec, transformed.len())?;
    let (theta, sigma2) = solver.solve(transformed.values());
    if !(sigma2 > 0.0) {
        return Err(Error::Degenerate("residual variance is zero".into()));
    }
    Ok((theta, sigma2))
}

/// Precomputed per-dataset quantities shared by every λ evaluation.
struct Profile {
    logs: Vec<f64>,
    sum_log: f64,
    solver: Solver,
}

impl Profile {
    fn new(values: &[f64], shift: f64, spec: &LinearGaussianSpec) -> Result<Self> {
        let logs = values
            .iter()
            .enumerate()
            .map(|(index, &y)| {
                let s = y + shift;
                if s > 0.0 && s.is_finite() {
                    Ok(s.ln())
                } else {
                    Err(Error::NonPositive { index, value: s })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let solver = Solver::new(spec, logs.len())?;
        let sum_log = logs.iter().sum();
        Ok(Self {
            logs,
            sum_log,
            solver,
        })
    }

    fn transformed(&self, lambda: f64) -> Vec<f64> {
        if lambda.abs() < LAMBDA_ZERO_THRESHOLD {
            self.logs.clone()
        } else {
            self.logs
                .iter()
                .map(|&l| (lambda * l).exp_m1() / lambda)
                .collect()
        }
    }

    fn fit(&self, lambda: f64) -> Result<(f64, Vec<f64>, f64)> {
        let y = self.transformed(lambda);
        if let Some(index) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let (theta, sigma2) = self.solver.solve(&y);
        if !(sigma2 > 0.0) {
            return Err(Error::Degenerate(format!(
                "residual variance is zero at lambda = {lambda}"
            )));
        }
        let n = self.logs.len() as f64;
        let ll = -0.5 * n * sigma2.ln() + (lambda - 1.0) * self.sum_log;
        Ok((ll, theta, sigma2))
    }

    fn loglik(&self, lambda: f64) -> Result<f64> {
        self.fit(lambda).map(|(ll, _, _)| ll)
    }
}

/// Profile log-likelihood of λ for shifted data `y + shift`.
pub fn profile_loglik(
    v: &IntensityVector,
    lambda: f64,
    spec: &LinearGaussianSpec,
    shift: f64,
) -> Result<f64> {
    Profile::new(v.values(), shift, spec)?.loglik(lambda)
}

/// Random subsampling applied before the fit on very large images.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Subsample {
    /// `None` always uses every pixel.
    pub max_len: Option<usize>,
    pub seed: u64,
}

impl Default for Subsample {
    fn default() -> Self {
        Self {
            max_len: Some(1 << 20),
            seed: 0,
        }
    }
}

impl Subsample {
    pub fn full() -> Self {
        Self {
            max_len: None,
            seed: 0,
        }
    }

    /// Sorted indices to keep, or `None` when everything is used.
    pub fn indices(&self, n: usize) -> Option<Vec<usize>> {
        let cap = self.max_len?;
        if n <= cap {
            return None;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut idx = rand::seq::index::sample(&mut rng, n, cap).into_vec();
        idx.sort_unstable();
        Some(idx)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaConfig {
    pub bracket: (f64, f64),
    pub grid_points: usize,
    /// Width of the final golden-section interval.
    pub tolerance: f64,
    pub design: LinearGaussianSpec,
    pub subsample: Subsample,
}

impl Default for LambdaConfig {
    fn default() -> Self {
        Self {
            bracket: (-3.0, 5.0),
            grid_points: 61,
            tolerance: 1e-4,
            design: LinearGaussianSpec::InterceptOnly,
            subsample: Subsample::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaEstimate {
    pub lambda_hat: f64,
    pub theta_hat: Vec<f64>,
    pub sigma2_hat: f64,
    pub loglik_at_max: f64,
    /// `(λ, ℓp(λ))` at every coarse grid point, in grid order.
    pub grid_evaluations: Vec<(f64, f64)>,
    pub shift: f64,
    /// Number of observations the fit actually used.
    pub n_used: usize,
}

/// Equispaced grid including both endpoints.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (points - 1) as f64;
            (0..points)
                .map(|i| if i == points - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximizes `f` on `[lo, hi]` by golden-section search; returns the best
/// point evaluated and its value.
fn golden_max<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2)?;
        }
    }
    let mid = 0.5 * (lo + hi);
    let fm = f(mid)?;
    let best = [(x1, f1), (mid, fm), (x2, f2)]
        .into_iter()
        .fold((f64::NAN, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
    Ok(best)
}

/// Estimates λ for `v + shift` by coarse grid search plus golden-section
/// refinement around the best grid point.
///
/// Fails with [`Error::BracketBoundary`] when the grid maximum sits on
/// either end of the bracket.
pub fn fit_lambda(v: &IntensityVector, shift: f64, cfg: &LambdaConfig) -> Result<LambdaEstimate> {
    let (lo, hi) = cfg.bracket;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidParameter(format!("bad bracket [{lo}, {hi}]")));
    }
    if cfg.grid_points < 3 {
        return Err(Error::InvalidParameter("grid needs at least 3 points".into()));
    }
    if !(cfg.tolerance > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }

    let values: Vec<f64> = match cfg.subsample.indices(v.len()) {
        Some(idx) => idx.iter().map(|&i| v.values()[i]).collect(),
        None => v.values().to_vec(),
    };
    let design = match (&cfg.design, cfg.subsample.indices(v.len())) {
        (LinearGaussianSpec::Design(a), Some(idx)) => {
            LinearGaussianSpec::Design(a.select_rows(idx.iter()))
        }
        (d, _) => d.clone(),
    };
    let profile = Profile::new(&values, shift, &design)?;

    let grid = linspace(lo, hi, cfg.grid_points);
    let lls = grid
        .par_iter()
        .map(|&l| profile.loglik(l))
        .collect::<Result<Vec<_>>>()?;
    let grid_evaluations: Vec<(f64, f64)> = grid.iter().copied().zip(lls).collect();

    // Lowest-λ tie-break: only strictly larger values replace the incumbent.
    let best_idx = grid_evaluations
        .iter()
        .enumerate()
        .fold(0, |b, (i, &(_, ll))| if ll > grid_evaluations[b].1 { i } else { b });
    if best_idx == 0 || best_idx == grid.len() - 1 {
        return Err(Error::BracketBoundary {
            lambda: grid[best_idx],
        });
    }

    let (grid_lambda, grid_ll) = grid_evaluations[best_idx];
    let (ref_lambda, ref_ll) = golden_max(
        |l| profile.loglik(l),
        grid[best_idx - 1],
        grid[best_idx + 1],
        cfg.tolerance,
    )?;
    let lambda_hat = if ref_ll > grid_ll { ref_lambda } else { grid_lambda };
    let (loglik_at_max, theta_hat, sigma2_hat) = profile.fit(lambda_hat)?;

    Ok(LambdaEstimate {
        lambda_hat,
        theta_hat,
        sigma2_hat,
        loglik_at_max,
        grid_evaluations,
        shift,
        n_used: values.len(),
    })
}

/// Convenience wrapper: the Box-Cox parameters implied by an estimate.
impl LambdaEstimate {
    pub fn params(&self) -> BoxCoxParams {
        BoxCoxParams {
            lambda: self.lambda_hat,
            shift: self.shift,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn vecf(v: &[f64]) -> IntensityVector {
        IntensityVector::from_values(v.to_vec())
    }

    #[test]
    fn theta_sigma_small_cases() {
        let err = mle_theta_sigma(&vecf(&[2.0; 4]), &LinearGaussianSpec::InterceptOnly);
        assert!(matches!(err, Err(Error::Degenerate(_))));

        let (theta, s2) = mle_theta_sigma(&vecf(&[1.0, 3.0]), &LinearGaussianSpec::InterceptOnly).unwrap();
        assert_eq!(theta, vec![2.0]);
        assert_eq!(s2, 1.0);

        assert!(mle_theta_sigma(&vecf(&[1.0]), &LinearGaussianSpec::InterceptOnly).is_err());
    }

    #[test]
    fn theta_sigma_matches_direct_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let y: Vec<f64> = (0..257).map(|_| rng.random_range(-5.0..40.0)).collect();
        let (theta, s2) = mle_theta_sigma(&vecf(&y), &LinearGaussianSpec::InterceptOnly).unwrap();

        let mut sum = 0.0;
        for v in &y {
            sum += v;
        }
        let mean = sum / y.len() as f64;
        let mut ss = 0.0;
        for v in &y {
            ss += (v - mean).powi(2);
        }
        assert!((theta[0] - mean).abs() < 1e-12);
        assert!((s2 - ss / y.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn explicit_intercept_design_agrees_with_fast_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let y: Vec<f64> = (0..50).map(|_| rng.random_range(0.0..10.0)).collect();
        let ones = LinearGaussianSpec::Design(DMatrix::from_element(50, 1, 1.0));
        let (t1, s1) = mle_theta_sigma(&vecf(&y), &ones).unwrap();
        let (t2, s2) = mle_theta_sigma(&vecf(&y), &LinearGaussianSpec::InterceptOnly).unwrap();
        assert!((t1[0] - t2[0]).abs() < 1e-10);
        assert!((s1 - s2).abs() < 1e-10);
    }

    #[test]
    fn linear_trend_design_recovers_slope() {
        let n = 40;
        let a = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y: Vec<f64> = (0..n)
            .map(|i| 3.0 + 0.5 * i as f64 + if i % 2 == 0 { 0.1 } else { -0.1 })
            .collect();
        let (theta, s2) = mle_theta_sigma(&vecf(&y), &LinearGaussianSpec::Design(a)).unwrap();
        assert!((theta[0] - 3.0).abs() < 0.05, "{theta:?}");
        assert!((theta[1] - 0.5).abs() < 0.01, "{theta:?}");
        assert!(s2 > 0.0 && s2 < 0.011);
    }

    #[test]
    fn rank_deficient_design() {
        let a = DMatrix::from_fn(10, 2, |_, _| 1.0);
        let y = vecf(&(0..10).map(f64::from).collect::<Vec<_>>());
        assert!(matches!(
            mle_theta_sigma(&y, &LinearGaussianSpec::Design(a)),
            Err(Error::RankDeficient)
        ));
    }

    #[test]
    fn lognormal_prefers_log() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normal = Normal::new(5.0, 0.1).unwrap();
        let y: Vec<f64> = (0..2000).map(|_| Distribution::<f64>::sample(&normal, &mut rng).exp()).collect();
        let v = vecf(&y);
        let spec = LinearGaussianSpec::InterceptOnly;
        assert!(profile_loglik(&v, 0.0, &spec, 0.0).unwrap() > profile_loglik(&v, 1.0, &spec, 0.0).unwrap());
    }

    #[test]
    fn loglik_finite_over_default_bracket() {
        let y: Vec<f64> = (0..256).map(|i| f64::from(i % 256)).collect();
        let v = vecf(&y);
        for l in linspace(-3.0, 5.0, 161) {
            let ll = profile_loglik(&v, l, &LinearGaussianSpec::InterceptOnly, 1.0).unwrap();
            assert!(ll.is_finite(), "lambda {l}");
        }
    }

    #[test]
    fn fit_recovers_lambda_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let normal = Normal::new(3.0, 1.0).unwrap();
        let z: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
        let y = crate::prefilter::inverse_boxcox(&vecf(&z), BoxCoxParams::new(0.5, 0.0).unwrap()).unwrap();
        let est = fit_lambda(&y, 0.0, &LambdaConfig::default()).unwrap();
        assert!((0.45..=0.55).contains(&est.lambda_hat), "{}", est.lambda_hat);
        assert_eq!(est.grid_evaluations.len(), 61);
        assert!(est
            .grid_evaluations
            .iter()
            .all(|&(_, ll)| est.loglik_at_max >= ll));
    }

    #[test]
    fn fit_recovers_lambda_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let normal = Normal::new(5.0, 0.3).unwrap();
        let y: Vec<f64> = (0..10_000).map(|_| Distribution::<f64>::sample(&normal, &mut rng).exp()).collect();
        let est = fit_lambda(&vecf(&y), 0.0, &LambdaConfig::default()).unwrap();
        assert!(est.lambda_hat.abs() <= 0.05, "{}", est.lambda_hat);
    }

    #[test]
    fn boundary_and_degenerate_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let normal = Normal::new(3.0, 0.5).unwrap();
        let z: Vec<f64> = (0..2000).map(|_| normal.sample(&mut rng)).collect();
        let y = crate::prefilter::inverse_boxcox(&vecf(&z), BoxCoxParams::new(0.5, 0.0).unwrap()).unwrap();
        let narrow = LambdaConfig {
            bracket: (1.5, 3.0),
            ..LambdaConfig::default()
        };
        assert!(matches!(
            fit_lambda(&y, 0.0, &narrow),
            Err(Error::BracketBoundary { lambda }) if lambda == 1.5
        ));
        assert!(matches!(
            fit_lambda(&vecf(&[7.0; 100]), 1.0, &LambdaConfig::default()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn fit_is_deterministic_and_subsampling_is_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let y: Vec<f64> = (0..5000).map(|_| rng.random_range(0.0..255.0f64).floor()).collect();
        let cfg = LambdaConfig {
            subsample: Subsample {
                max_len: Some(1000),
                seed: 4,
            },
            ..LambdaConfig::default()
        };
        let a = fit_lambda(&vecf(&y), 1.0, &cfg).unwrap();
        let b = fit_lambda(&vecf(&y), 1.0, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_used, 1000);
    }
}
