//! The regularized coefficient problem
//!
//! ```text
//! min_α ||f^{k0} + Σ α_i (f^{ki} - f^{k0})||² + λ ||α||²
//! ```
//!
//! solved through its `m x m` normal equations, and the trial point built from
//! the resulting coefficients.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::history::{HistoryWindow, Permutation};

/// Solution of the coefficient problem for one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub alpha: DVector<f64>,
    /// `||f̂(α)||`, the linearized residual at the trial point.
    pub predicted_norm: f64,
    pub lambda: f64,
}

/// `λ = μ ||f^{k0}||^p` with `p` either 2 or 4.
pub fn compute_lambda(mu: f64, f_k0_norm: f64, exponent: u32) -> Result<f64> {
    if f_k0_norm == 0.0 {
        return Err(Error::ZeroResidual);
    }
    debug_assert!(exponent == 2 || exponent == 4);
    Ok(mu * f_k0_norm.powi(exponent as i32))
}

/// Solves `(J^T J + λ I) α = -J^T f^{k0}`.
///
/// A Cholesky factorization is tried first; it can only fail when `λ` is zero
/// or negligible next to `J^T J`, in which case the minimum-norm solution is
/// taken from a spectral pseudo-inverse.
pub fn solve_coefficients(
    jtj: &DMatrix<f64>,
    jtf: &DVector<f64>,
    lambda: f64,
    f_k0_norm_sq: f64,
) -> Result<Coefficients> {
    let m = jtf.len();
    if jtj.nrows() != m || jtj.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: jtj.nrows(),
        });
    }
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "regularization weight must be >= 0, got {lambda}"
        )));
    }

    let mut system = jtj.clone();
    for i in 0..m {
        system[(i, i)] += lambda;
    }
    let rhs = -jtf;

    let alpha = match system.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        None => pseudo_inverse_solve(system, &rhs),
    };
    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::InvariantViolation(
            "coefficient solve produced non-finite values".into(),
        ));
    }

    let sq = f_k0_norm_sq + 2.0 * alpha.dot(jtf) + alpha.dot(&(jtj * &alpha));
    // Cancellation can push the quadratic slightly outside [0, ||f^{k0}||^2].
    let predicted_norm = sq.max(0.0).sqrt().min(f_k0_norm_sq.sqrt());

    Ok(Coefficients {
        alpha,
        predicted_norm,
        lambda,
    })
}

fn pseudo_inverse_solve(system: DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let m = rhs.len();
    let eig = SymmetricEigen::new(system);
    let largest = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let cutoff = largest * f64::EPSILON * m.max(1) as f64;
    let projected = eig.eigenvectors.transpose() * rhs;
    let scaled = DVector::from_fn(m, |i, _| {
        let l = eig.eigenvalues[i];
        if l > cutoff {
            projected[i] / l
        } else {
            0.0
        }
    });
    &eig.eigenvectors * scaled
}

/// `ĝ(α) = g^{k0} + Σ α_i (g^{ki} - g^{k0})`.
pub fn trial_step(h: &HistoryWindow, p: &Permutation, alpha: &DVector<f64>) -> DVector<f64> {
    assert_eq!(alpha.len(), p.m(), "one coefficient per non-pivot entry");
    let g0 = &h.pivot_entry(p).g;
    let mut out = g0.clone();
    for (a, e) in alpha.iter().zip(h.rest_entries(p)) {
        if *a != 0.0 {
            out.axpy(*a, &(&e.g - g0), 1.0);
        }
    }
    out
}

/// `f̂(α)` evaluated with the stored residual vectors rather than the Gram matrix.
pub fn predicted_residual(
    h: &HistoryWindow,
    p: &Permutation,
    alpha: &DVector<f64>,
) -> DVector<f64> {
    let f0 = &h.pivot_entry(p).f;
    let mut out = f0.clone();
    for (a, e) in alpha.iter().zip(h.rest_entries(p)) {
        out.axpy(*a, &(&e.f - f0), 1.0);
    }
    out
}
