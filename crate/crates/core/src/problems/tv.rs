//! Alternating minimization for total-variation denoising, viewed as a
//! fixed-point map on the auxiliary gradient field `w`.
//!
//! With periodic boundaries the forward-difference operator `D` is circulant,
//! so `M = D^T D + (ν/β) I` is diagonal in the 2-D Fourier basis and the
//! `u`-update is two FFTs and a pointwise division.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::fixed_point::FixedPointMap;

/// A square grayscale image stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub size: usize,
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn new(size: usize, pixels: Vec<f64>) -> Result<Self> {
        if size == 0 || pixels.len() != size * size {
            return Err(Error::InvalidProblem(format!(
                "image must be square: {} pixels for side {size}",
                pixels.len()
            )));
        }
        Ok(Self { size, pixels })
    }

    /// Piecewise-constant test scene with values in [0, 1].
    pub fn phantom(size: usize) -> Self {
        let n = size as f64;
        let pixels = (0..size * size)
            .map(|idx| {
                let (r, c) = ((idx / size) as f64 + 0.5, (idx % size) as f64 + 0.5);
                let in_square =
                    (0.15 * n..0.5 * n).contains(&r) && (0.15 * n..0.5 * n).contains(&c);
                let in_disk = (r - 0.65 * n).powi(2) + (c - 0.6 * n).powi(2) <= (0.22 * n).powi(2);
                let in_bar = (0.7 * n..0.85 * n).contains(&r) && (0.1 * n..0.4 * n).contains(&c);
                if in_square {
                    0.9
                } else if in_disk {
                    0.55
                } else if in_bar {
                    0.3
                } else {
                    0.1
                }
            })
            .collect();
        Self { size, pixels }
    }

    /// Adds i.i.d. Gaussian noise; values are not clamped.
    pub fn with_noise(&self, std_dev: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, std_dev).expect("finite standard deviation");
        let pixels = self
            .pixels
            .iter()
            .map(|p| p + normal.sample(&mut rng))
            .collect();
        Self {
            size: self.size,
            pixels,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TvProblem {
    pub image: Image,
    pub beta: f64,
    pub nu: f64,
}

impl TvProblem {
    pub fn new(image: Image, beta: f64, nu: f64) -> Result<Self> {
        if !(beta > 0.0 && nu > 0.0) {
            return Err(Error::InvalidProblem(format!(
                "beta and nu must be positive, got {beta}, {nu}"
            )));
        }
        Ok(Self { image, beta, nu })
    }

    /// Bound on the Lipschitz modulus of the map for `K = I`, `||D|| <= 2`.
    pub fn kappa(&self) -> f64 {
        1.0 - 1.0 / (1.0 + 4.0 * self.beta / self.nu)
    }
}

/// Periodic forward differences. The output interleaves `(∂x, ∂y)` per pixel.
pub fn gradient(size: usize, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; 2 * size * size];
    for r in 0..size {
        for c in 0..size {
            let p = r * size + c;
            out[2 * p] = u[r * size + (c + 1) % size] - u[p];
            out[2 * p + 1] = u[((r + 1) % size) * size + c] - u[p];
        }
    }
    out
}

/// Adjoint of [`gradient`].
pub fn gradient_adjoint(size: usize, w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; size * size];
    for r in 0..size {
        for c in 0..size {
            let p = r * size + c;
            let left = r * size + (c + size - 1) % size;
            let up = ((r + size - 1) % size) * size + c;
            out[p] = w[2 * left] - w[2 * p] + w[2 * up + 1] - w[2 * p + 1];
        }
    }
    out
}

/// `s_β(x) = max(||x|| - 1/β, 0) x / ||x||`, zero at the origin.
pub fn shrink(x: [f64; 2], beta: f64) -> [f64; 2] {
    let norm = x[0].hypot(x[1]);
    let kept = norm - 1.0 / beta;
    if kept <= 0.0 {
        return [0.0, 0.0];
    }
    let scale = kept / norm;
    [x[0] * scale, x[1] * scale]
}

/// `g(w) = Φ(D M⁻¹ (D^T w + (ν/β) s))`.
pub struct TvMap {
    size: usize,
    beta: f64,
    kappa: f64,
    scaled_image: Vec<f64>,
    /// Eigenvalues of `M` in FFT order.
    spectrum: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for TvMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TvMap")
            .field("size", &self.size)
            .field("beta", &self.beta)
            .field("kappa", &self.kappa)
            .finish_non_exhaustive()
    }
}

pub fn tv_map(problem: &TvProblem) -> TvMap {
    let n = problem.image.size;
    let ratio = problem.nu / problem.beta;
    let eig1d: Vec<f64> = (0..n)
        .map(|k| 2.0 - 2.0 * (2.0 * PI * k as f64 / n as f64).cos())
        .collect();
    let spectrum = (0..n * n)
        .map(|idx| eig1d[idx / n] + eig1d[idx % n] + ratio)
        .collect();
    let mut planner = FftPlanner::new();
    TvMap {
        size: n,
        beta: problem.beta,
        kappa: problem.kappa(),
        scaled_image: problem.image.pixels.iter().map(|s| ratio * s).collect(),
        spectrum,
        forward: planner.plan_fft_forward(n),
        inverse: planner.plan_fft_inverse(n),
    }
}

impl TvMap {
    pub fn size(&self) -> usize {
        self.size
    }

    fn fft2(&self, buf: &mut [Complex<f64>], plan: &Arc<dyn Fft<f64>>) {
        let n = self.size;
        plan.process(buf);
        transpose(buf, n);
        plan.process(buf);
        transpose(buf, n);
    }

    /// Solves `M u = v`.
    pub fn solve_m(&self, v: &[f64]) -> Vec<f64> {
        let n = self.size;
        let mut buf: Vec<Complex<f64>> = v.iter().map(|&x| Complex::new(x, 0.0)).collect();
        self.fft2(&mut buf, &self.forward);
        for (z, l) in buf.iter_mut().zip(&self.spectrum) {
            *z /= *l;
        }
        self.fft2(&mut buf, &self.inverse);
        let scale = 1.0 / (n * n) as f64;
        buf.iter().map(|z| z.re * scale).collect()
    }

    /// `M u` applied through explicit differences.
    pub fn apply_m(&self, u: &[f64]) -> Vec<f64> {
        let ratio = self.spectrum[0];
        let dtdu = gradient_adjoint(self.size, &gradient(self.size, u));
        dtdu.iter().zip(u).map(|(a, b)| a + ratio * b).collect()
    }

    /// The image `u = M⁻¹ (D^T w + (ν/β) s)` associated with `w`.
    pub fn recover_image(&self, w: &DVector<f64>) -> Vec<f64> {
        let mut rhs = gradient_adjoint(self.size, w.as_slice());
        for (r, s) in rhs.iter_mut().zip(&self.scaled_image) {
            *r += s;
        }
        self.solve_m(&rhs)
    }

    /// The linear part `h(w) = D u(w)` before shrinkage.
    pub fn linear_part(&self, w: &DVector<f64>) -> Vec<f64> {
        gradient(self.size, &self.recover_image(w))
    }
}

fn transpose(buf: &mut [Complex<f64>], n: usize) {
    for r in 0..n {
        for c in r + 1..n {
            buf.swap(r * n + c, c * n + r);
        }
    }
}

impl FixedPointMap for TvMap {
    fn dim(&self) -> usize {
        2 * self.size * self.size
    }

    fn apply(&self, w: &DVector<f64>) -> DVector<f64> {
        let h = self.linear_part(w);
        let mut out = DVector::zeros(h.len());
        for (p, pair) in h.chunks_exact(2).enumerate() {
            let s = shrink([pair[0], pair[1]], self.beta);
            out[2 * p] = s[0];
            out[2 * p + 1] = s[1];
        }
        out
    }

    fn kappa_hint(&self) -> Option<f64> {
        Some(self.kappa)
    }
}
