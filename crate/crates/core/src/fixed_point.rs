//! The fixed-point map abstraction and the unaccelerated iteration.

use std::time::Instant;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::globalization::{IterationRecord, RunResult, Status, DIVERGENCE_FACTOR};

/// A map `g: R^n -> R^n` whose fixed points are sought.
///
/// Implementations must be deterministic and return a vector of length
/// [`dim`](FixedPointMap::dim). They are shared read-only between threads when
/// several solves run at once, hence the `Send + Sync` bound.
pub trait FixedPointMap: Send + Sync {
    fn dim(&self) -> usize;

    fn apply(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Estimate of the Lipschitz modulus of `g`, if one is known and lies in (0, 1).
    fn kappa_hint(&self) -> Option<f64> {
        None
    }
}

impl<T: FixedPointMap + ?Sized> FixedPointMap for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        (**self).apply(x)
    }
    fn kappa_hint(&self) -> Option<f64> {
        (**self).kappa_hint()
    }
}

impl<T: FixedPointMap + ?Sized> FixedPointMap for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        (**self).apply(x)
    }
    fn kappa_hint(&self) -> Option<f64> {
        (**self).kappa_hint()
    }
}

impl<T: FixedPointMap + ?Sized> FixedPointMap for std::sync::Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        (**self).apply(x)
    }
    fn kappa_hint(&self) -> Option<f64> {
        (**self).kappa_hint()
    }
}

/// Adapts a closure into a [`FixedPointMap`].
pub struct FnMap<F> {
    dim: usize,
    kappa: Option<f64>,
    f: F,
}

impl<F> FnMap<F>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self {
            dim,
            kappa: None,
            f,
        }
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = Some(kappa);
        self
    }
}

impl<F> FixedPointMap for FnMap<F>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.f)(x)
    }
    fn kappa_hint(&self) -> Option<f64> {
        self.kappa
    }
}

/// `f(x) = g(x) - x` together with its Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub value: DVector<f64>,
    pub norm: f64,
}

/// One evaluation of the map: the image `g(x)` and the residual `g(x) - x`.
#[derive(Debug, Clone)]
pub(crate) struct Evaluation {
    pub g: DVector<f64>,
    pub f: DVector<f64>,
    pub f_norm: f64,
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Evaluates `g` at `x` and forms the residual; `iteration` is only used to
/// label a non-finite result.
pub(crate) fn evaluate<M: FixedPointMap + ?Sized>(
    map: &M,
    x: &DVector<f64>,
    iteration: usize,
) -> Result<Evaluation> {
    let g = map.apply(x);
    check_dim(map.dim(), g.len())?;
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { iteration });
    }
    let f = &g - x;
    let f_norm = f.norm();
    if !f_norm.is_finite() {
        return Err(Error::NonFinite { iteration });
    }
    Ok(Evaluation { g, f, f_norm })
}

pub fn residual<M: FixedPointMap + ?Sized>(map: &M, x: &DVector<f64>) -> Result<Residual> {
    check_dim(map.dim(), x.len())?;
    let eval = evaluate(map, x, 0)?;
    Ok(Residual {
        value: eval.f,
        norm: eval.f_norm,
    })
}

/// Runs `x <- g(x)` until `||f(x)|| <= tol` or `max_iter` evaluations have
/// been made.
///
/// On convergence the returned point is `g(x^k)`, one step past the last
/// iterate whose residual was measured.
pub fn run_plain<M: FixedPointMap + ?Sized>(
    map: &M,
    x0: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<RunResult> {
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "tolerance must be >= 0, got {tol}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
    }
    check_dim(map.dim(), x0.len())?;

    let start = Instant::now();
    let mut trace = Vec::new();
    let mut x = x0.clone();
    let mut f0_norm = None;
    let mut last = None;

    for k in 0..max_iter {
        let eval = evaluate(map, &x, k)?;
        let f0 = *f0_norm.get_or_insert(eval.f_norm);
        trace.push(IterationRecord {
            k,
            f_norm: eval.f_norm,
            rho: None,
            mu: None,
            lambda: None,
            accepted: false,
            wall_ns: start.elapsed().as_nanos() as u64,
        });
        if eval.f_norm <= tol {
            return Ok(RunResult {
                x_final: eval.g,
                f_norm_final: eval.f_norm,
                status: Status::Converged,
                trace,
                evaluations: k + 1,
                accepted_steps: 0,
            });
        }
        if eval.f_norm > DIVERGENCE_FACTOR * f0 {
            return Ok(RunResult {
                x_final: eval.g,
                f_norm_final: eval.f_norm,
                status: Status::Diverged,
                trace,
                evaluations: k + 1,
                accepted_steps: 0,
            });
        }
        x = eval.g.clone();
        last = Some(eval);
    }

    let last = last.expect("max_iter >= 1");
    Ok(RunResult {
        x_final: last.g,
        f_norm_final: last.f_norm,
        status: Status::MaxIter,
        trace,
        evaluations: max_iter,
        accepted_steps: 0,
    })
}
