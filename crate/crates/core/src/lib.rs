//! Anderson acceleration for fixed-point iterations, globalized by an adaptive
//! quadratic regularization and a nonmonotone trust-region acceptance test.
//!
//! The entry points are [`run_lm_aa`] for the accelerated solver and
//! [`run_plain`] for the unaccelerated iteration `x <- g(x)`. Problems are
//! supplied through the [`FixedPointMap`] trait; a few ready-made maps live in
//! [`problems`].
//!
//! ```
//! use lmaa::{run_lm_aa, FnMap, SolverConfig, Status};
//! use nalgebra::DVector;
//!
//! // g(x) = 0.5 x + 1 has the fixed point x* = 2.
//! let map = FnMap::new(1, |x: &DVector<f64>| x.map(|v| 0.5 * v + 1.0));
//! let cfg = SolverConfig { m: 1, eps_f: 1e-12, ..SolverConfig::default() };
//! let result = run_lm_aa(&map, &DVector::zeros(1), &cfg).unwrap();
//! assert_eq!(result.status, Status::Converged);
//! assert!((result.x_final[0] - 2.0).abs() < 1e-10);
//! ```

pub mod batch;
pub mod error;
pub mod fixed_point;
pub mod globalization;
pub mod history;
pub mod problems;
pub mod regularization;
pub mod stats;
pub mod trace;

pub use error::{Error, Result};
pub use fixed_point::{residual, run_plain, FixedPointMap, FnMap, Residual};
pub use globalization::{
    run_lm_aa, IterationRecord, LambdaExponent, LmAa, RunResult, SolverConfig, Status,
    StepDiagnostics, Variant,
};
pub use history::{HistoryWindow, Permutation};
pub use regularization::Coefficients;
