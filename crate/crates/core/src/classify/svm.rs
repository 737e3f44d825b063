//! Support vector machines.
//!
//! Two solvers are provided. The linear primal solver minimizes
//! `(reg/2)‖w‖² + mean hinge loss` by epoch-shuffled stochastic subgradient
//! steps with step size `1/(reg·t)` and a projection onto the ball of
//! radius `1/√reg` (the bias is carried as an extra constant feature). The
//! kernel dual solver runs SMO with maximal-violating-pair selection on the
//! box-constrained dual until the KKT gap drops below the tolerance.
//!
//! Features are standardized per column before either solver sees them.
//! More than two classes are handled one-vs-rest.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::discriminant::argmax;
use super::features::Features;
use super::split::stratified_cap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Polynomial { gamma: f64, coef0: f64, degree: u32 },
    Rbf { gamma: f64 },
    Sigmoid { gamma: f64, coef0: f64 },
}

impl Kernel {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            Kernel::Linear => Ok(()),
            Kernel::Polynomial { gamma, coef0, degree } => {
                if !(gamma > 0.0) || !(coef0 >= 0.0) || degree == 0 {
                    return bad(format!(
                        "polynomial kernel needs gamma > 0, coef0 >= 0, degree >= 1 (got {gamma}, {coef0}, {degree})"
                    ));
                }
                Ok(())
            }
            Kernel::Rbf { gamma } => {
                if !(gamma > 0.0) {
                    return bad(format!("rbf kernel needs gamma > 0 (got {gamma})"));
                }
                Ok(())
            }
            Kernel::Sigmoid { gamma, coef0 } => {
                if !(gamma > 0.0) || !coef0.is_finite() {
                    return bad(format!("sigmoid kernel needs gamma > 0 (got {gamma}, {coef0})"));
                }
                Ok(())
            }
        }
    }

    #[inline]
    fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let dot = || x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        match *self {
            Kernel::Linear => dot(),
            Kernel::Polynomial { gamma, coef0, degree } => {
                (gamma * dot() + coef0).powi(degree as i32)
            }
            Kernel::Rbf { gamma } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * d2).exp()
            }
            Kernel::Sigmoid { gamma, coef0 } => (gamma * dot() + coef0).tanh(),
        }
    }
}

/// `K(x, x′)` with parameter validation.
pub fn kernel_eval(kernel: &Kernel, x: &[f64], y: &[f64]) -> Result<f64> {
    kernel.validate()?;
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(kernel.eval_unchecked(x, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "kebab-case")]
pub enum SvmSolver {
    LinearPrimal {
        reg: f64,
        epochs: usize,
    },
    KernelDual {
        kernel: Kernel,
        c: f64,
        tol: f64,
        max_iter: usize,
        /// Training rows kept (stratified) before building the kernel matrix.
        cap: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub solver: SvmSolver,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            solver: SvmSolver::LinearPrimal {
                reg: 1e-4,
                epochs: 20,
            },
            seed: 0,
        }
    }
}

impl SvmConfig {
    pub fn kernel_dual(kernel: Kernel) -> Self {
        Self {
            solver: SvmSolver::KernelDual {
                kernel,
                c: 1.0,
                tol: 1e-3,
                max_iter: 200_000,
                cap: 2000,
            },
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        match self.solver {
            SvmSolver::LinearPrimal { reg, epochs } => {
                if !(reg > 0.0 && reg.is_finite()) || epochs == 0 {
                    return Err(Error::InvalidParameter(format!(
                        "primal svm needs reg > 0 and epochs >= 1 (got {reg}, {epochs})"
                    )));
                }
            }
            SvmSolver::KernelDual {
                kernel,
                c,
                tol,
                max_iter,
                cap,
            } => {
                kernel.validate()?;
                if !(c > 0.0) || !(tol > 0.0) || max_iter == 0 || cap < 2 {
                    return Err(Error::InvalidParameter(format!(
                        "dual svm needs C > 0, tol > 0, max_iter >= 1, cap >= 2 (got {c}, {tol}, {max_iter}, {cap})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Per-column affine standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Reciprocal standard deviation (1 for constant columns).
    pub inv_scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Features) -> Self {
        let d = x.dim();
        let n = x.rows() as f64;
        let mut mean = vec![0.0; d];
        for r in x.iter_rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in x.iter_rows() {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let inv_scale = var
            .iter()
            .map(|&s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    1.0 / sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, inv_scale }
    }

    pub fn apply_row(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            x.iter()
                .zip(&self.mean)
                .zip(&self.inv_scale)
                .map(|((v, m), s)| (v - m) * s),
        );
    }

    pub fn apply(&self, x: &Features) -> Features {
        let mut data = Vec::with_capacity(x.data().len());
        let mut buf = Vec::new();
        for r in x.iter_rows() {
            self.apply_row(r, &mut buf);
            data.extend_from_slice(&buf);
        }
        Features::new(x.rows(), x.dim(), data).expect("same shape")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum BinarySvm {
    Linear {
        w: Vec<f64>,
        b: f64,
    },
    Dual {
        kernel: Kernel,
        support: Features,
        /// `αᵢ tᵢ` for each support vector.
        coef: Vec<f64>,
        b: f64,
    },
}

impl BinarySvm {
    /// Signed decision value `f(x)`; positive means the `+1` side.
    pub fn decision(&self, x: &[f64]) -> f64 {
        match self {
            BinarySvm::Linear { w, b } => w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b,
            BinarySvm::Dual {
                kernel,
                support,
                coef,
                b,
            } => {
                support
                    .iter_rows()
                    .zip(coef)
                    .map(|(s, c)| c * kernel.eval_unchecked(s, x))
                    .sum::<f64>()
                    + b
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmDiagnostics {
    pub converged: bool,
    pub iterations: usize,
    /// Final maximal KKT violation (dual) or 0 (primal).
    pub kkt_gap: f64,
}

fn check_targets(t: &[i8]) -> Result<()> {
    if t.iter().any(|&v| v != 1 && v != -1) {
        return Err(Error::InvalidParameter("svm targets must be -1 or +1".into()));
    }
    let pos = t.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == t.len() {
        return Err(Error::TooFewClasses {
            found: usize::from(!t.is_empty()),
        });
    }
    Ok(())
}

fn fit_primal(x: &Features, t: &[i8], reg: f64, epochs: usize, seed: u64) -> (BinarySvm, SvmDiagnostics) {
    let d = x.dim();
    let mut w = vec![0.0; d + 1];
    let radius2 = 1.0 / reg;
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut step = 0u64;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            step += 1;
            let eta = 1.0 / (reg * step as f64);
            let xi = x.row(i);
            let ti = f64::from(t[i]);
            let margin = ti * (w[..d].iter().zip(xi).map(|(a, v)| a * v).sum::<f64>() + w[d]);
            let shrink = 1.0 - eta * reg;
            w.iter_mut().for_each(|v| *v *= shrink);
            if margin < 1.0 {
                for (wj, xj) in w[..d].iter_mut().zip(xi) {
                    *wj += eta * ti * xj;
                }
                w[d] += eta * ti;
            }
            let norm2: f64 = w.iter().map(|v| v * v).sum();
            if norm2 > radius2 {
                let s = (radius2 / norm2).sqrt();
                w.iter_mut().for_each(|v| *v *= s);
            }
        }
    }
    let b = w.pop().expect("bias slot");
    (
        BinarySvm::Linear { w, b },
        SvmDiagnostics {
            converged: true,
            iterations: step as usize,
            kkt_gap: 0.0,
        },
    )
}

fn fit_dual(
    x: &Features,
    t: &[i8],
    kernel: Kernel,
    c: f64,
    tol: f64,
    max_iter: usize,
) -> (BinarySvm, SvmDiagnostics) {
    const TAU: f64 = 1e-12;
    let n = x.rows();
    let y: Vec<f64> = t.iter().map(|&v| f64::from(v)).collect();
    // Q_ij = y_i y_j K(x_i, x_j)
    let q: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n, k % n);
            y[i] * y[j] * kernel.eval_unchecked(x.row(i), x.row(j))
        })
        .collect();
    let qd = |i: usize, j: usize| q[i * n + j];

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    let mut iterations = 0;
    let mut gap = f64::INFINITY;
    let mut converged = false;
    while iterations < max_iter {
        let (mut gmax, mut gmin) = (f64::NEG_INFINITY, f64::INFINITY);
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for k in 0..n {
            let v = -y[k] * grad[k];
            if in_up(alpha[k], y[k]) && v > gmax {
                gmax = v;
                i = k;
            }
            if in_low(alpha[k], y[k]) && v < gmin {
                gmin = v;
                j = k;
            }
        }
        gap = gmax - gmin;
        if i == usize::MAX || j == usize::MAX || gap < tol {
            converged = true;
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = qd(i, i) + qd(j, j) + 2.0 * qd(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = qd(i, i) + qd(j, j) - 2.0 * qd(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (k, g) in grad.iter_mut().enumerate() {
            *g += qd(k, i) * di + qd(k, j) * dj;
        }
    }

    // Offset from the free variables, or the midpoint of the feasible range.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for k in 0..n {
        let yg = y[k] * grad[k];
        if alpha[k] >= c {
            if y[k] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[k] <= 0.0 {
            if y[k] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 {
        sum_free / free as f64
    } else {
        0.5 * (ub + lb)
    };

    let sv: Vec<usize> = (0..n).filter(|&k| alpha[k] > 0.0).collect();
    let model = BinarySvm::Dual {
        kernel,
        support: x.select(&sv),
        coef: sv.iter().map(|&k| alpha[k] * y[k]).collect(),
        b: -rho,
    };
    (
        model,
        SvmDiagnostics {
            converged,
            iterations,
            kkt_gap: gap,
        },
    )
}

/// Trains one binary machine on standardized features with `±1` targets.
pub fn fit_binary_svm(x: &Features, t: &[i8], cfg: &SvmConfig) -> Result<(BinarySvm, SvmDiagnostics)> {
    cfg.validate()?;
    if t.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            got: t.len(),
        });
    }
    check_targets(t)?;
    Ok(match cfg.solver {
        SvmSolver::LinearPrimal { reg, epochs } => fit_primal(x, t, reg, epochs, cfg.seed),
        SvmSolver::KernelDual {
            kernel,
            c,
            tol,
            max_iter,
            ..
        } => fit_dual(x, t, kernel, c, tol, max_iter),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmMachine {
    pub svm: BinarySvm,
    pub diagnostics: SvmDiagnostics,
}

/// Standardizer plus one machine (two classes, positive = class 1) or one
/// machine per class (one-vs-rest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub num_classes: usize,
    pub scaler: Standardizer,
    pub machines: Vec<SvmMachine>,
}

/// Fits an SVM on class labels `0..num_classes`.
pub fn fit_svm(features: &Features, labels: &[u8], num_classes: usize, cfg: &SvmConfig) -> Result<SvmModel> {
    cfg.validate()?;
    if labels.len() != features.rows() {
        return Err(Error::DimensionMismatch {
            expected: features.rows(),
            got: labels.len(),
        });
    }
    let mut counts = vec![0usize; num_classes];
    for &l in labels {
        *counts
            .get_mut(usize::from(l))
            .ok_or_else(|| Error::InvalidParameter(format!("label {l} >= {num_classes}")))? += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count();
    if num_classes < 2 || present < 2 {
        return Err(Error::TooFewClasses { found: present });
    }
    if let Some(class) = counts.iter().position(|&c| c == 0) {
        return Err(Error::TooFewSamples {
            class,
            count: 0,
            needed: 1,
        });
    }

    let (x, labels): (Features, Vec<u8>) = match cfg.solver {
        SvmSolver::KernelDual { cap, .. } if features.rows() > cap => {
            let keep = stratified_cap(labels, num_classes, cap, cfg.seed)?;
            (features.select(&keep), keep.iter().map(|&i| labels[i]).collect())
        }
        _ => (features.clone(), labels.to_vec()),
    };
    let scaler = Standardizer::fit(&x);
    let xs = scaler.apply(&x);

    let positives: Vec<u8> = if num_classes == 2 {
        vec![1]
    } else {
        (0..num_classes as u8).collect()
    };
    let machines = positives
        .iter()
        .map(|&pos| {
            let t: Vec<i8> = labels.iter().map(|&l| if l == pos { 1 } else { -1 }).collect();
            fit_binary_svm(&xs, &t, cfg).map(|(svm, diagnostics)| SvmMachine { svm, diagnostics })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SvmModel {
        num_classes,
        scaler,
        machines,
    })
}

/// Binary convenience wrapper over `±1` targets (`-1` is class 0).
pub fn fit_svm_pm1(features: &Features, t: &[i8], cfg: &SvmConfig) -> Result<SvmModel> {
    check_targets(t)?;
    let labels: Vec<u8> = t.iter().map(|&v| u8::from(v > 0)).collect();
    fit_svm(features, &labels, 2, cfg)
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.scaler.mean.len()
    }

    pub fn converged(&self) -> bool {
        self.machines.iter().all(|m| m.diagnostics.converged)
    }

    /// Decision values of every machine for a raw (unscaled) row.
    pub fn decisions(&self, x: &[f64]) -> Vec<f64> {
        let mut buf = Vec::with_capacity(x.len());
        self.scaler.apply_row(x, &mut buf);
        self.machines.iter().map(|m| m.svm.decision(&buf)).collect()
    }

    pub fn predict_row(&self, x: &[f64]) -> u8 {
        let d = self.decisions(x);
        if self.num_classes == 2 {
            u8::from(d[0] > 0.0)
        } else {
            argmax(&d) as u8
        }
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

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn kernel_examples() {
        assert_eq!(kernel_eval(&Kernel::Rbf { gamma: 0.7 }, &[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(kernel_eval(&Kernel::Linear, &[1.0, 0.0], &[0.0, 3.0]).unwrap(), 0.0);
        let poly = Kernel::Polynomial {
            gamma: 1.0,
            coef0: 1.0,
            degree: 2,
        };
        assert_eq!(kernel_eval(&poly, &[1.0], &[1.0]).unwrap(), 4.0);
        let sig = Kernel::Sigmoid {
            gamma: 0.5,
            coef0: -1.0,
        };
        assert!((kernel_eval(&sig, &[2.0], &[1.0]).unwrap() - 0.0f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn kernel_parameter_validation() {
        assert!(kernel_eval(&Kernel::Rbf { gamma: 0.0 }, &[1.0], &[1.0]).is_err());
        let neg_r = Kernel::Polynomial {
            gamma: 1.0,
            coef0: -1.0,
            degree: 2,
        };
        assert!(kernel_eval(&neg_r, &[1.0], &[1.0]).is_err());
        let zero_deg = Kernel::Polynomial {
            gamma: 1.0,
            coef0: 0.0,
            degree: 0,
        };
        assert!(kernel_eval(&zero_deg, &[1.0], &[1.0]).is_err());
        // sigmoid allows any real r
        let sig = Kernel::Sigmoid {
            gamma: 1.0,
            coef0: -3.0,
        };
        assert!(kernel_eval(&sig, &[1.0], &[1.0]).is_ok());
    }

    fn clusters(n_per: usize, seed: u64) -> (Features, Vec<i8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut t = Vec::new();
        for &(cx, label) in &[(-2.0, -1i8), (2.0, 1i8)] {
            for _ in 0..n_per {
                rows.push(vec![
                    cx + rng.random_range(-0.5..0.5),
                    rng.random_range(-1.0..1.0),
                ]);
                t.push(label);
            }
        }
        (Features::from_rows(&rows).unwrap(), t)
    }

    #[test]
    fn separable_clusters_primal() {
        let (x, t) = clusters(50, 1);
        let m = fit_svm_pm1(&x, &t, &SvmConfig::default()).unwrap();
        let pred = m.predict(&x).unwrap();
        for (p, &ti) in pred.iter().zip(&t) {
            assert_eq!(*p, u8::from(ti > 0));
        }
    }

    #[test]
    fn dual_agrees_with_primal_in_sign() {
        let (x, t) = clusters(20, 2);
        let primal = fit_svm_pm1(&x, &t, &SvmConfig::default()).unwrap();
        let mut cfg = SvmConfig::kernel_dual(Kernel::Linear);
        if let SvmSolver::KernelDual { ref mut c, .. } = cfg.solver {
            *c = 10.0;
        }
        let dual = fit_svm_pm1(&x, &t, &cfg).unwrap();
        assert!(dual.converged());
        for r in x.iter_rows() {
            let a = primal.decisions(r)[0];
            let b = dual.decisions(r)[0];
            assert_eq!(a > 0.0, b > 0.0, "primal {a} dual {b}");
        }
    }

    #[test]
    fn rbf_dual_handles_nonlinear_boundary() {
        // inner disc vs outer ring
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..200 {
            let outer = i % 2 == 1;
            let r = if outer { rng.random_range(2.0..3.0) } else { rng.random_range(0.0..1.0) };
            let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            rows.push(vec![r * a.cos(), r * a.sin()]);
            labels.push(u8::from(outer));
        }
        let x = Features::from_rows(&rows).unwrap();
        let m = fit_svm(&x, &labels, 2, &SvmConfig::kernel_dual(Kernel::Rbf { gamma: 1.0 })).unwrap();
        let pred = m.predict(&x).unwrap();
        let correct = pred.iter().zip(&labels).filter(|(a, b)| a == b).count();
        assert!(correct >= 195, "{correct}");
        for machine in &m.machines {
            if let BinarySvm::Dual { coef, .. } = &machine.svm {
                assert!(coef.iter().all(|c| c.abs() <= 1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn one_vs_rest_three_classes() {
        let rows: Vec<Vec<f64>> = (0..90).map(|i| vec![(i / 30) as f64 * 10.0 + (i % 30) as f64 * 0.1]).collect();
        let labels: Vec<u8> = (0..90).map(|i| (i / 30) as u8).collect();
        let x = Features::from_rows(&rows).unwrap();
        let m = fit_svm(&x, &labels, 3, &SvmConfig::kernel_dual(Kernel::Rbf { gamma: 1.0 })).unwrap();
        assert_eq!(m.machines.len(), 3);
        assert_eq!(m.predict(&x).unwrap(), labels);
    }

    #[test]
    fn single_class_is_rejected() {
        let x = Features::new(3, 1, vec![0.0, 1.0, 2.0]).unwrap();
        assert!(matches!(
            fit_svm_pm1(&x, &[1, 1, 1], &SvmConfig::default()),
            Err(Error::TooFewClasses { .. })
        ));
    }

    #[test]
    fn non_convergence_is_reported() {
        let (x, t) = clusters(30, 4);
        let mut cfg = SvmConfig::kernel_dual(Kernel::Rbf { gamma: 0.5 });
        if let SvmSolver::KernelDual { ref mut max_iter, .. } = cfg.solver {
            *max_iter = 1;
        }
        let m = fit_svm_pm1(&x, &t, &cfg).unwrap();
        assert!(!m.converged());
        assert_eq!(m.machines[0].diagnostics.iterations, 1);
    }
}
