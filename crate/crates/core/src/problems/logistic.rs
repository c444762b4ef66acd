//! Fixed step-size gradient descent on ridge-regularized logistic regression.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fixed_point::FixedPointMap;

/// `F(x) = (1/N) Σ log(1 + exp(-b_i a_i^T x)) + (τ/2) ||x||²`.
#[derive(Debug, Clone)]
pub struct LogisticProblem {
    a: DMatrix<f64>,
    b: DVector<f64>,
    tau: f64,
    lipschitz: f64,
}

impl LogisticProblem {
    /// `a` holds one sample per row, `b` the labels in {-1, 1}.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, tau: f64) -> Result<Self> {
        let s = Self::data_smoothness(&a, &b)?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "ridge weight must be positive, got {tau}"
            )));
        }
        Ok(Self {
            a,
            b,
            tau,
            lipschitz: tau + s,
        })
    }

    /// Chooses `τ = L_F / ratio`, where `L_F = τ + ||A||² / (4N)` itself depends on `τ`.
    pub fn with_tau_ratio(a: DMatrix<f64>, b: DVector<f64>, ratio: f64) -> Result<Self> {
        if ratio.is_nan() || ratio <= 1.0 {
            return Err(Error::InvalidProblem(format!(
                "tau ratio must exceed 1, got {ratio}"
            )));
        }
        let s = Self::data_smoothness(&a, &b)?;
        let tau = s / (ratio - 1.0);
        Ok(Self {
            a,
            b,
            tau,
            lipschitz: tau + s,
        })
    }

    fn data_smoothness(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<f64> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::InvalidProblem("empty dataset".into()));
        }
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                found: b.len(),
            });
        }
        if let Some(bad) = b.iter().find(|&&l| l != 1.0 && l != -1.0) {
            return Err(Error::InvalidProblem(format!(
                "labels must be -1 or 1, found {bad}"
            )));
        }
        Ok(spectral_norm_sq(a, 1e-6) / (4.0 * a.nrows() as f64))
    }

    pub fn samples(&self) -> usize {
        self.a.nrows()
    }

    pub fn features(&self) -> usize {
        self.a.ncols()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `L_F`, the Lipschitz constant of `∇F`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Contraction modulus of the gradient step, `(L_F - τ) / (L_F + τ)`.
    pub fn kappa(&self) -> f64 {
        (self.lipschitz - self.tau) / (self.lipschitz + self.tau)
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        let margins = &self.a * x;
        let loss: f64 = margins
            .iter()
            .zip(self.b.iter())
            .map(|(z, b)| softplus(-b * z))
            .sum();
        loss / self.samples() as f64 + 0.5 * self.tau * x.norm_squared()
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let margins = &self.a * x;
        let n = self.samples() as f64;
        let weights = DVector::from_iterator(
            self.samples(),
            margins
                .iter()
                .zip(self.b.iter())
                .map(|(z, b)| -b * sigmoid(-b * z) / n),
        );
        self.a.tr_mul(&weights) + x * self.tau
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// `g(x) = x - 2/(L_F + τ) ∇F(x)`.
#[derive(Debug, Clone)]
pub struct LogisticMap {
    problem: LogisticProblem,
    step: f64,
}

impl LogisticMap {
    pub fn problem(&self) -> &LogisticProblem {
        &self.problem
    }

    pub fn step_size(&self) -> f64 {
        self.step
    }
}

pub fn logistic_map(problem: LogisticProblem) -> LogisticMap {
    let step = 2.0 / (problem.lipschitz + problem.tau);
    LogisticMap { problem, step }
}

impl FixedPointMap for LogisticMap {
    fn dim(&self) -> usize {
        self.problem.features()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        x - self.problem.gradient(x) * self.step
    }

    fn kappa_hint(&self) -> Option<f64> {
        Some(self.problem.kappa())
    }
}

/// Largest eigenvalue of `A^T A` by power iteration, stopping once the
/// Rayleigh quotient changes by less than `rel_tol` relative.
pub fn spectral_norm_sq(a: &DMatrix<f64>, rel_tol: f64) -> f64 {
    let n = a.ncols();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut estimate = 0.0;
    for _ in 0..10_000 {
        let w = a.tr_mul(&(a * &v));
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (next - estimate).abs() <= rel_tol * next {
            return next;
        }
        estimate = next;
    }
    estimate
}

/// Scales each column to unit Euclidean norm; all-zero columns are left alone.
pub fn normalize_columns(a: &mut DMatrix<f64>) {
    for mut col in a.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
}

/// A synthetic binary classification set with strongly correlated features.
///
/// Features are random mixtures of a few latent directions whose scales decay
/// geometrically, so the normalized design matrix is badly conditioned; labels
/// follow a noisy linear rule.
pub fn synthetic_dataset(
    samples: usize,
    features: usize,
    seed: u64,
) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let decay = 1e-3f64.powf(1.0 / (features.max(2) - 1) as f64);
    let mixing = DMatrix::from_fn(features, features, |r, _| decay.powi(r as i32) * normal());
    let latent = DMatrix::from_fn(samples, features, |_, _| normal());
    let mut a = latent * mixing;
    normalize_columns(&mut a);
    let w = DVector::from_fn(features, |_, _| normal());
    let scores = &a * &w;
    let spread = scores.norm() / (samples as f64).sqrt();
    let b = DVector::from_fn(samples, |i, _| {
        if scores[i] + 0.5 * spread * normal() >= 0.0 {
            1.0
        } else {
            -1.0
        }
    });
    (a, b)
}
