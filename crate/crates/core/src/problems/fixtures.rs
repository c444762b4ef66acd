//! Small maps with known structure, used by the property tests, the
//! acceptance suite and `fixture:<name>` on the command line.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fixed_point::FixedPointMap;

/// Dimension of the generated matrix fixtures.
pub const FIXTURE_DIM: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureClass {
    /// `g(x) = Qx + b` with `||Q|| <= 0.9`.
    AffineContraction,
    /// Projected gradient step on a convex quadratic over the orthant.
    ForwardBackward,
    /// Discontinuous scalar map that still satisfies the residual conditions.
    Piecewise,
    /// Maps without a fixed point.
    NoFixedPoint,
}

#[derive(Debug, Clone)]
pub enum FixtureMap {
    Affine {
        q: DMatrix<f64>,
        b: DVector<f64>,
        norm: f64,
    },
    ForwardBackward {
        p: DMatrix<f64>,
        q: DVector<f64>,
        step: f64,
        modulus: f64,
    },
    /// `0.5 x` on `[0, 1]`, `0` elsewhere.
    Piecewise,
    /// `x + 1`.
    Shift,
    /// `0.5 x`.
    Halving,
}

impl FixtureMap {
    /// `(I - Q)⁻¹ b` for the affine maps.
    pub fn affine_fixed_point(&self) -> Option<DVector<f64>> {
        match self {
            FixtureMap::Affine { q, b, .. } => {
                let n = b.len();
                (DMatrix::identity(n, n) - q).lu().solve(b)
            }
            _ => None,
        }
    }
}

impl FixedPointMap for FixtureMap {
    fn dim(&self) -> usize {
        match self {
            FixtureMap::Affine { b, .. } => b.len(),
            FixtureMap::ForwardBackward { q, .. } => q.len(),
            FixtureMap::Piecewise | FixtureMap::Shift | FixtureMap::Halving => 1,
        }
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            FixtureMap::Affine { q, b, .. } => q * x + b,
            FixtureMap::ForwardBackward { p, q, step, .. } => {
                (x - (p * x + q) * *step).map(|v| v.max(0.0))
            }
            FixtureMap::Piecewise => x.map(|v| {
                if (0.0..=1.0).contains(&v) {
                    0.5 * v
                } else {
                    0.0
                }
            }),
            FixtureMap::Shift => x.add_scalar(1.0),
            FixtureMap::Halving => x * 0.5,
        }
    }

    fn kappa_hint(&self) -> Option<f64> {
        match self {
            FixtureMap::Affine { norm, .. } => Some(*norm),
            FixtureMap::ForwardBackward { modulus, .. } => Some(*modulus),
            FixtureMap::Halving => Some(0.5),
            FixtureMap::Piecewise | FixtureMap::Shift => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub class: FixtureClass,
    pub map: FixtureMap,
}

impl fmt::Display for Fixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (dim {})", self.name, self.map.dim())
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// `Q = 0.9 G / ||G||` for a Gaussian `G`.
pub fn random_affine(n: usize, norm: f64, seed: u64) -> FixtureMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gaussian_matrix(&mut rng, n, n);
    let sigma = g.clone().svd(false, false).singular_values.max();
    FixtureMap::Affine {
        q: g * (norm / sigma),
        b: gaussian_vector(&mut rng, n),
        norm,
    }
}

/// Symmetric `Q` with eigenvalues spread over `[-0.5, top]`, so plain
/// iteration decays exactly like `top^k` once the other modes die out.
pub fn symmetric_affine(n: usize, top: f64, seed: u64) -> FixtureMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = gaussian_matrix(&mut rng, n, n).qr().q();
    let eigs = DVector::from_fn(n, |i, _| {
        if n == 1 {
            top
        } else {
            -0.5 + (top + 0.5) * i as f64 / (n - 1) as f64
        }
    });
    let q = &basis * DMatrix::from_diagonal(&eigs) * basis.transpose();
    FixtureMap::Affine {
        q,
        b: gaussian_vector(&mut rng, n),
        norm: top,
    }
}

/// `G(x) = max(0, x - μ(Px + q))` with `P = B^T B + 0.1 I` and `μ = 1/L`.
pub fn forward_backward(n: usize, seed: u64) -> FixtureMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = gaussian_matrix(&mut rng, n, n) / (n as f64).sqrt();
    let p = b.tr_mul(&b) + DMatrix::identity(n, n) * 0.1;
    let eig = SymmetricEigen::new(p.clone()).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    let step = 1.0 / hi;
    FixtureMap::ForwardBackward {
        p,
        q: gaussian_vector(&mut rng, n),
        step,
        modulus: 1.0 - step * lo,
    }
}

/// The fixture families; matrix fixtures are drawn from `seed`.
pub fn fixtures(seed: u64) -> Vec<Fixture> {
    let n = FIXTURE_DIM;
    vec![
        Fixture {
            name: "affine".into(),
            class: FixtureClass::AffineContraction,
            map: random_affine(n, 0.9, seed),
        },
        Fixture {
            name: "contraction09".into(),
            class: FixtureClass::AffineContraction,
            map: symmetric_affine(n, 0.9, seed),
        },
        Fixture {
            name: "forward_backward".into(),
            class: FixtureClass::ForwardBackward,
            map: forward_backward(n, seed),
        },
        Fixture {
            name: "piecewise".into(),
            class: FixtureClass::Piecewise,
            map: FixtureMap::Piecewise,
        },
        Fixture {
            name: "halving".into(),
            class: FixtureClass::AffineContraction,
            map: FixtureMap::Halving,
        },
        Fixture {
            name: "shift".into(),
            class: FixtureClass::NoFixedPoint,
            map: FixtureMap::Shift,
        },
    ]
}

/// Seeded Gaussian starting point.
pub fn random_start(dim: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gaussian_vector(&mut rng, dim)
}

pub fn fixture_names() -> Vec<String> {
    fixtures(0).into_iter().map(|f| f.name).collect()
}

pub fn fixture_by_name(name: &str, seed: u64) -> Result<Fixture> {
    fixtures(seed)
        .into_iter()
        .find(|f| f.name == name)
        .ok_or_else(|| {
            Error::InvalidProblem(format!(
                "unknown fixture '{name}', expected one of: {}",
                fixture_names().join(", ")
            ))
        })
}
