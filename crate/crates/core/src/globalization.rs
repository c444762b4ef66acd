//! Nonmonotone trust-region acceptance for Anderson steps and the solver loop.
//!
//! Each iteration forms a regularized Anderson trial point from the window,
//! compares the actual residual at that point against a prediction from the
//! linearized residual, and either accepts the trial or falls back to the
//! fixed-point step with the smallest residual in the window. The ratio of
//! actual to predicted reduction also drives the regularization factor `μ`.

use std::fmt;
use std::time::Instant;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::fixed_point::{check_dim, evaluate, Evaluation, FixedPointMap};
use crate::history::{HistoryWindow, Permutation};
use crate::regularization::{compute_lambda, solve_coefficients, trial_step, Coefficients};

/// A run is abandoned once the residual exceeds this multiple of the initial one.
pub const DIVERGENCE_FACTOR: f64 = 1e8;

/// Lower limit for `μ`. Repeated shrinking would otherwise underflow to zero,
/// after which no increase could restore regularization.
pub const MU_FLOOR: f64 = f64::MIN_POSITIVE;

/// Used for the prediction discount when neither the config nor the map provides one.
pub const DEFAULT_C: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LambdaExponent {
    /// `λ = μ ||f^{k0}||²`
    #[default]
    Two,
    /// `λ = μ ||f^{k0}||⁴`
    Four,
}

impl LambdaExponent {
    pub fn power(self) -> u32 {
        match self {
            LambdaExponent::Two => 2,
            LambdaExponent::Four => 4,
        }
    }

    pub fn from_power(p: u32) -> Option<Self> {
        match p {
            2 => Some(LambdaExponent::Two),
            4 => Some(LambdaExponent::Four),
            _ => None,
        }
    }
}

/// Which flavour of Anderson step the loop takes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Variant {
    /// Adaptive `λ = μ ||f^{k0}||^p` with trust-region acceptance.
    #[default]
    LmAa,
    /// Unregularized Anderson acceleration; every trial step is taken.
    Classic,
    /// Constant `λ` with trust-region acceptance; `μ` is never updated.
    FixedLambda(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Window length; up to `m + 1` iterates are combined.
    pub m: usize,
    pub p1: f64,
    pub p2: f64,
    /// Multiplier for `μ` after an unsuccessful step.
    pub eta1: f64,
    /// Multiplier for `μ` after a very successful step.
    pub eta2: f64,
    pub gamma: f64,
    /// Prediction discount. `None` takes the map's `kappa_hint`, else [`DEFAULT_C`].
    pub c: Option<f64>,
    pub mu0: f64,
    pub lambda_exponent: LambdaExponent,
    pub eps_f: f64,
    pub max_iter: usize,
    pub variant: Variant,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            m: 10,
            p1: 0.01,
            p2: 0.25,
            eta1: 2.0,
            eta2: 0.25,
            gamma: 1e-4,
            c: None,
            mu0: 1.0,
            lambda_exponent: LambdaExponent::Two,
            eps_f: 1e-10,
            max_iter: 1000,
            variant: Variant::LmAa,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.m < 1 {
            return bad("m must be at least 1".into());
        }
        if !(self.p1 > 0.0 && self.p1 < self.p2 && self.p2 < 1.0) {
            return bad(format!(
                "need 0 < p1 < p2 < 1, got p1 = {}, p2 = {}",
                self.p1, self.p2
            ));
        }
        if !(self.eta1 > 1.0 && self.eta1.is_finite()) {
            return bad(format!("eta1 must be > 1, got {}", self.eta1));
        }
        if !(self.eta2 > 0.0 && self.eta2 < 1.0) {
            return bad(format!("eta2 must lie in (0, 1), got {}", self.eta2));
        }
        if !(self.gamma > 0.0 && self.gamma * (self.m as f64 + 1.0) < 1.0) {
            return bad(format!(
                "gamma must lie in (0, 1/(m+1)) = (0, {}), got {}",
                1.0 / (self.m as f64 + 1.0),
                self.gamma
            ));
        }
        if let Some(c) = self.c {
            if !(c > 0.0 && c < 1.0) {
                return bad(format!("c must lie in (0, 1), got {c}"));
            }
        }
        if !(self.mu0 > 0.0 && self.mu0.is_finite()) {
            return bad(format!("mu0 must be positive, got {}", self.mu0));
        }
        if self.eps_f.is_nan() || self.eps_f < 0.0 {
            return bad(format!("eps_f must be >= 0, got {}", self.eps_f));
        }
        if self.max_iter < 1 {
            return bad("max_iter must be at least 1".into());
        }
        if let Variant::FixedLambda(l) = self.variant {
            if !(l >= 0.0 && l.is_finite()) {
                return bad(format!("fixed lambda must be finite and >= 0, got {l}"));
            }
        }
        Ok(())
    }

    /// The prediction discount used for `map`.
    pub fn resolve_c<M: FixedPointMap + ?Sized>(&self, map: &M) -> f64 {
        self.c
            .or_else(|| map.kappa_hint().filter(|k| *k > 0.0 && *k < 1.0))
            .unwrap_or(DEFAULT_C)
    }
}

/// One row of a convergence trace.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// `||f(x^k)||`
    pub f_norm: f64,
    pub rho: Option<f64>,
    pub mu: Option<f64>,
    pub lambda: Option<f64>,
    pub accepted: bool,
    /// Nanoseconds since the start of the run.
    pub wall_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIter,
    Diverged,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Converged => "converged",
            Status::MaxIter => "max_iter",
            Status::Diverged => "diverged",
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub x_final: DVector<f64>,
    pub f_norm_final: f64,
    pub status: Status,
    pub trace: Vec<IterationRecord>,
    /// Number of calls to `g`.
    pub evaluations: usize,
    /// Iterations whose trial step became the next iterate.
    pub accepted_steps: usize,
}

impl RunResult {
    /// Index of the last iteration whose residual was measured.
    pub fn iterations(&self) -> usize {
        self.trace.last().map_or(0, |r| r.k)
    }
}

/// `r_k = (1 - m̂γ) ||f^{k0}|| + γ Σ ||f^{ki}||`.
pub fn combined_residual(h: &HistoryWindow, p: &Permutation, gamma: f64) -> f64 {
    let m = p.m() as f64;
    let pivot = h.pivot_entry(p).f_norm;
    let others: f64 = h.rest_entries(p).map(|e| e.f_norm).sum();
    (1.0 - m * gamma) * pivot + gamma * others
}

/// Returns `(ared, pred, ρ)`.
pub fn reduction_ratio(
    r_k: f64,
    f_trial_norm: f64,
    predicted_norm: f64,
    c: f64,
) -> Result<(f64, f64, f64)> {
    let ared = r_k - f_trial_norm;
    let pred = r_k - c * predicted_norm;
    if pred.is_nan() || pred <= 0.0 {
        return Err(Error::InvariantViolation(format!(
            "predicted reduction {pred:e} is not positive (r_k = {r_k:e}, predicted norm = {predicted_norm:e}, c = {c})"
        )));
    }
    Ok((ared, pred, ared / pred))
}

pub fn update_mu(mu: f64, rho: f64, cfg: &SolverConfig) -> f64 {
    if rho < cfg.p1 {
        cfg.eta1 * mu
    } else if rho > cfg.p2 {
        (cfg.eta2 * mu).max(MU_FLOOR)
    } else {
        mu
    }
}

/// Quantities computed during one non-terminal iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub k: usize,
    pub pivot: usize,
    pub m_hat: usize,
    pub f_norm: f64,
    pub pivot_norm: f64,
    pub r_k: f64,
    pub predicted_norm: f64,
    pub trial_norm: f64,
    pub ared: f64,
    pub pred: f64,
    pub rho: Option<f64>,
    pub lambda: f64,
    pub mu: f64,
    pub mu_next: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Continue(StepDiagnostics),
    Finished(Status),
}

/// Solver state, advanced one iteration at a time by [`LmAa::step`].
pub struct LmAa<'a, M: FixedPointMap + ?Sized> {
    map: &'a M,
    cfg: SolverConfig,
    c: f64,
    history: HistoryWindow,
    k: usize,
    x: DVector<f64>,
    /// `(g, f)` at `x`, when already known from the previous acceptance test.
    cached: Option<Evaluation>,
    mu: f64,
    f0_norm: Option<f64>,
    trace: Vec<IterationRecord>,
    evaluations: usize,
    accepted_steps: usize,
    start: Instant,
    finished: Option<(Status, DVector<f64>, f64)>,
}

impl<'a, M: FixedPointMap + ?Sized> LmAa<'a, M> {
    pub fn new(map: &'a M, x0: &DVector<f64>, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        check_dim(map.dim(), x0.len())?;
        Ok(Self {
            map,
            c: cfg.resolve_c(map),
            cfg: cfg.clone(),
            history: HistoryWindow::new(cfg.m + 1, map.dim()),
            k: 0,
            x: x0.clone(),
            cached: None,
            mu: cfg.mu0,
            f0_norm: None,
            trace: Vec::new(),
            evaluations: 0,
            accepted_steps: 0,
            start: Instant::now(),
            finished: None,
        })
    }

    /// The current iterate `x^k`.
    pub fn x(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn history(&self) -> &HistoryWindow {
        &self.history
    }

    pub fn trace(&self) -> &[IterationRecord] {
        &self.trace
    }

    pub fn status(&self) -> Option<Status> {
        self.finished.as_ref().map(|f| f.0)
    }

    fn elapsed_ns(&self) -> u64 {
        self.start.elapsed().as_nanos() as u64
    }

    fn finish(&mut self, status: Status, x_final: DVector<f64>, f_norm: f64) -> StepOutcome {
        self.finished = Some((status, x_final, f_norm));
        StepOutcome::Finished(status)
    }

    /// Performs one iteration, or reports how the run ended.
    pub fn step(&mut self) -> Result<StepOutcome> {
        if let Some((status, _, _)) = &self.finished {
            return Ok(StepOutcome::Finished(*status));
        }
        let k = self.k;

        if k == self.cfg.max_iter {
            let last = self.history.newest().expect("max_iter >= 1");
            let (g, f_norm) = (last.g.clone(), last.f_norm);
            return Ok(self.finish(Status::MaxIter, g, f_norm));
        }

        let eval = match self.cached.take() {
            Some(e) => e,
            None => {
                self.evaluations += 1;
                evaluate(self.map, &self.x, k)?
            }
        };
        let f_norm = eval.f_norm;
        let f0 = *self.f0_norm.get_or_insert(f_norm);

        let terminal = if f_norm <= self.cfg.eps_f {
            Some(Status::Converged)
        } else if f_norm > DIVERGENCE_FACTOR * f0 {
            Some(Status::Diverged)
        } else {
            None
        };
        if let Some(status) = terminal {
            self.trace.push(IterationRecord {
                k,
                f_norm,
                rho: None,
                mu: Some(self.mu),
                lambda: None,
                accepted: false,
                wall_ns: self.elapsed_ns(),
            });
            return Ok(self.finish(status, eval.g, f_norm));
        }

        let Evaluation { g, f, .. } = eval;
        let x = std::mem::replace(&mut self.x, DVector::zeros(0));
        self.history.push(k, x, g, f)?;

        let perm = self.history.permute();
        let pivot_norm = self.history.pivot_entry(&perm).f_norm;
        let lambda = match self.cfg.variant {
            Variant::LmAa => compute_lambda(self.mu, pivot_norm, self.cfg.lambda_exponent.power())?,
            Variant::Classic => 0.0,
            Variant::FixedLambda(l) => l,
        };
        let coeffs = if perm.m() == 0 {
            Coefficients {
                alpha: DVector::zeros(0),
                predicted_norm: pivot_norm,
                lambda,
            }
        } else {
            let (jtj, jtf, f0sq) = self.history.difference_gram(&perm);
            solve_coefficients(&jtj, &jtf, lambda, f0sq)?
        };
        let trial = trial_step(&self.history, &perm, &coeffs.alpha);
        self.evaluations += 1;
        let trial_eval = evaluate(self.map, &trial, k)?;

        let r_k = combined_residual(&self.history, &perm, self.cfg.gamma);
        let (ared, pred, ratio) =
            reduction_ratio(r_k, trial_eval.f_norm, coeffs.predicted_norm, self.c)?;
        let (rho, accepted) = match self.cfg.variant {
            Variant::Classic => (None, true),
            _ => (Some(ratio), ratio >= self.cfg.p1),
        };
        let mu = self.mu;
        if self.cfg.variant == Variant::LmAa {
            self.mu = update_mu(mu, ratio, &self.cfg);
        }

        self.trace.push(IterationRecord {
            k,
            f_norm,
            rho,
            mu: Some(mu),
            lambda: Some(lambda),
            accepted,
            wall_ns: self.elapsed_ns(),
        });

        let diagnostics = StepDiagnostics {
            k,
            pivot: perm.pivot(),
            m_hat: perm.m(),
            f_norm,
            pivot_norm,
            r_k,
            predicted_norm: coeffs.predicted_norm,
            trial_norm: trial_eval.f_norm,
            ared,
            pred,
            rho,
            lambda,
            mu,
            mu_next: self.mu,
            accepted,
        };

        if accepted {
            self.accepted_steps += 1;
            self.x = trial;
            self.cached = Some(trial_eval);
        } else {
            let fallback = &self.history.pivot_entry(&perm).g;
            // With α = 0 the trial point is the fallback itself and its evaluation stays valid.
            if bitwise_eq(&trial, fallback) {
                self.cached = Some(trial_eval);
            }
            self.x = fallback.clone();
        }
        self.k += 1;
        Ok(StepOutcome::Continue(diagnostics))
    }

    /// Steps until termination and returns the result.
    pub fn run(mut self) -> Result<RunResult> {
        loop {
            if let StepOutcome::Finished(_) = self.step()? {
                return Ok(self.into_result());
            }
        }
    }

    /// Consumes the solver; must only be called once it has finished.
    pub fn into_result(self) -> RunResult {
        let (status, x_final, f_norm_final) = self.finished.expect("solver has not finished");
        RunResult {
            x_final,
            f_norm_final,
            status,
            trace: self.trace,
            evaluations: self.evaluations,
            accepted_steps: self.accepted_steps,
        }
    }
}

fn bitwise_eq(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b.iter())
            .all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Runs the globalized Anderson solver from `x0` to completion.
pub fn run_lm_aa<M: FixedPointMap + ?Sized>(
    map: &M,
    x0: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<RunResult> {
    LmAa::new(map, x0, cfg)?.run()
}
