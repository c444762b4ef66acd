//! Douglas–Rachford splitting for nonnegative least squares
//! `min ||Hx - t||²` subject to `x >= 0`, written over the split variable
//! `v = (v1, v2) ∈ R^{2q}`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fixed_point::FixedPointMap;

/// Smallest admissible eigenvalue of `2 H^T H`.
pub const RANK_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct NnlsProblem {
    h: DMatrix<f64>,
    t: DVector<f64>,
    beta: f64,
    sigma0: f64,
    sigma1: f64,
}

impl NnlsProblem {
    pub fn new(h: DMatrix<f64>, t: DVector<f64>, beta: f64) -> Result<Self> {
        if h.nrows() == 0 || h.ncols() == 0 {
            return Err(Error::InvalidProblem("empty matrix".into()));
        }
        if h.nrows() != t.len() {
            return Err(Error::DimensionMismatch {
                expected: h.nrows(),
                found: t.len(),
            });
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "beta must be positive, got {beta}"
            )));
        }
        let eig = SymmetricEigen::new(h.tr_mul(&h) * 2.0).eigenvalues;
        let sigma0 = eig.min();
        let sigma1 = eig.max();
        if sigma0 <= RANK_THRESHOLD {
            return Err(Error::InvalidProblem(format!(
                "matrix lacks full column rank: smallest eigenvalue of 2H^T H is {sigma0:e}"
            )));
        }
        Ok(Self {
            h,
            t,
            beta,
            sigma0,
            sigma1,
        })
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn t(&self) -> &DVector<f64> {
        &self.t
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn columns(&self) -> usize {
        self.h.ncols()
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn sigma1(&self) -> f64 {
        self.sigma1
    }

    /// Lipschitz modulus of the first reflected proximal operator.
    pub fn c1(&self) -> f64 {
        let (b, s0, s1) = (self.beta, self.sigma0, self.sigma1);
        ((b * s1 - 1.0) / (b * s1 + 1.0)).max((1.0 - b * s0) / (1.0 + b * s0))
    }

    pub fn kappa(&self) -> f64 {
        (3.0 + self.c1().powi(2)).sqrt() / 2.0
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        (&self.h * x - &self.t).norm_squared()
    }
}

/// `g(v) = ½ (R2(v2) + v1, R1(v1) + v2)`.
#[derive(Debug, Clone)]
pub struct NnlsMap {
    problem: NnlsProblem,
    factor: Cholesky<f64, Dyn>,
    hty: DVector<f64>,
}

pub fn nnls_map(problem: NnlsProblem) -> NnlsMap {
    let q = problem.columns();
    let shift = 1.0 / (2.0 * problem.beta);
    let system = problem.h.tr_mul(&problem.h) + DMatrix::identity(q, q) * shift;
    let factor = system
        .cholesky()
        .expect("H^T H + shift I is positive definite");
    let hty = problem.h.tr_mul(&problem.t);
    NnlsMap {
        problem,
        factor,
        hty,
    }
}

impl NnlsMap {
    pub fn problem(&self) -> &NnlsProblem {
        &self.problem
    }

    /// `(H^T H + (2β)⁻¹ I)⁻¹ (H^T t + v1 / (2β))`.
    pub fn prox_quadratic(&self, v1: &DVector<f64>) -> DVector<f64> {
        let rhs = &self.hty + v1 / (2.0 * self.problem.beta);
        self.factor.solve(&rhs)
    }

    pub fn reflect_quadratic(&self, v1: &DVector<f64>) -> DVector<f64> {
        self.prox_quadratic(v1) * 2.0 - v1
    }

    /// The primal point associated with a split iterate.
    pub fn solution(&self, v: &DVector<f64>) -> DVector<f64> {
        let q = self.problem.columns();
        self.prox_quadratic(&v.rows(0, q).into_owned())
    }
}

/// `2 max(v, 0) - v`, which is `|v|` componentwise.
pub fn reflect_orthant(v2: &DVector<f64>) -> DVector<f64> {
    v2.map(f64::abs)
}

impl FixedPointMap for NnlsMap {
    fn dim(&self) -> usize {
        2 * self.problem.columns()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let q = self.problem.columns();
        let v1 = v.rows(0, q).into_owned();
        let v2 = v.rows(q, q).into_owned();
        let top = (reflect_orthant(&v2) + &v1) * 0.5;
        let bottom = (self.reflect_quadratic(&v1) + &v2) * 0.5;
        let mut out = DVector::zeros(2 * q);
        out.rows_mut(0, q).copy_from(&top);
        out.rows_mut(q, q).copy_from(&bottom);
        out
    }

    fn kappa_hint(&self) -> Option<f64> {
        Some(self.problem.kappa())
    }
}

/// Sparse random `H` with the given fraction of Gaussian nonzeros plus
/// `shift` on the leading diagonal, and a Gaussian right-hand side.
pub fn random_instance(
    rows: usize,
    cols: usize,
    density: f64,
    shift: f64,
    seed: u64,
) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            if rng.random::<f64>() < density {
                h[(r, c)] = StandardNormal.sample(&mut rng);
            }
        }
    }
    for i in 0..rows.min(cols) {
        h[(i, i)] += shift;
    }
    let t = DVector::from_fn(rows, |_, _| StandardNormal.sample(&mut rng));
    (h, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Enumerates every support set and keeps the best feasible unconstrained
    /// least-squares solution restricted to it.
    fn brute_force_nnls(h: &DMatrix<f64>, t: &DVector<f64>) -> DVector<f64> {
        let q = h.ncols();
        let mut best = DVector::zeros(q);
        let mut best_val = t.norm_squared();
        for mask in 1u32..(1 << q) {
            let cols: Vec<usize> = (0..q).filter(|i| mask & (1 << i) != 0).collect();
            let sub = h.select_columns(cols.iter());
            let Some(chol) = sub.tr_mul(&sub).cholesky() else {
                continue;
            };
            let xs = chol.solve(&sub.tr_mul(t));
            if xs.iter().any(|&v| v < 0.0) {
                continue;
            }
            let mut x = DVector::zeros(q);
            for (j, &c) in cols.iter().enumerate() {
                x[c] = xs[j];
            }
            let val = (h * &x - t).norm_squared();
            if val < best_val {
                best_val = val;
                best = x;
            }
        }
        best
    }

    fn iterate_to_fixed_point(map: &NnlsMap) -> DVector<f64> {
        let mut v = DVector::zeros(map.dim());
        for _ in 0..200_000 {
            let next = map.apply(&v);
            let done = (&next - &v).norm() <= 1e-13;
            v = next;
            if done {
                break;
            }
        }
        v
    }

    #[test]
    fn orthonormal_columns_give_root_three_over_two() {
        let h = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let p = NnlsProblem::new(h, DVector::zeros(3), 0.5).unwrap();
        assert_relative_eq!(p.sigma0(), 2.0, max_relative = 1e-14);
        assert_relative_eq!(p.sigma1(), 2.0, max_relative = 1e-14);
        assert_eq!(p.c1(), 0.0);
        assert_relative_eq!(p.kappa(), 3f64.sqrt() / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn orthant_reflection() {
        let v = DVector::from_vec(vec![0.0, 1.5, 3.0]);
        assert_eq!(reflect_orthant(&v), v);
        let w = DVector::from_vec(vec![-2.0, 1.0]);
        assert_eq!(reflect_orthant(&w), DVector::from_vec(vec![2.0, 1.0]));
    }

    #[test]
    fn rank_deficient_matrix_is_rejected() {
        let h = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(NnlsProblem::new(h, DVector::zeros(3), 1.0).is_err());
    }

    #[test]
    fn map_is_lipschitz_with_stated_modulus() {
        let (h, t) = random_instance(8, 4, 0.5, 1.0, 3);
        let map = nnls_map(NnlsProblem::new(h, t, 0.7).unwrap());
        let kappa = map.kappa_hint().unwrap();
        assert!(kappa < 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let x = DVector::from_fn(8, |_, _| rng.random_range(-3.0..3.0));
            let y = DVector::from_fn(8, |_, _| rng.random_range(-3.0..3.0));
            assert!((map.apply(&x) - map.apply(&y)).norm() <= (kappa + 1e-10) * (x - y).norm());
        }
    }

    #[test]
    fn fixed_point_solves_small_instances() {
        for seed in 0..6u64 {
            let q = 2 + (seed as usize % 3);
            let (h, t) = random_instance(q + 3, q, 0.6, 1.0, seed);
            let map = nnls_map(NnlsProblem::new(h.clone(), t.clone(), 1.0).unwrap());
            let x = map.solution(&iterate_to_fixed_point(&map));
            let oracle = brute_force_nnls(&h, &t);
            assert!((&x - &oracle).amax() < 1e-8, "seed {seed}: {x} vs {oracle}");
        }
    }

    #[test]
    fn fixed_point_solves_six_by_three() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let h = DMatrix::from_fn(6, 3, |_, _| StandardNormal.sample(&mut rng));
        let t = DVector::from_fn(6, |_, _| StandardNormal.sample(&mut rng));
        let map = nnls_map(NnlsProblem::new(h.clone(), t.clone(), 1.0).unwrap());
        let x = map.solution(&iterate_to_fixed_point(&map));
        let oracle = brute_force_nnls(&h, &t);
        assert!(x.iter().all(|&v| v >= -1e-10));
        assert!((&x - &oracle).amax() < 1e-8);
        let p = map.problem();
        assert!(p.objective(&x) <= p.objective(&oracle) + 1e-10);
    }

    #[test]
    fn generator_is_seeded() {
        let a = random_instance(20, 10, 0.05, 1.0, 9);
        let b = random_instance(20, 10, 0.05, 1.0, 9);
        assert_eq!(a, b);
        assert!(NnlsProblem::new(a.0, a.1, 1.0).is_ok());
    }
}
