//! Fixed-step integration schemes in normalized time.
//!
//! Schemes are written against [`StateAlgebra`], so the same code integrates
//! plain vectors, eagerly evaluated tensors, and values recorded on a
//! gradient tape (where implicit iterations are differentiated through
//! exactly as many times as they ran).

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::neural::{Backend, NeuralError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("non-finite derivative at tau = {tau}")]
    NonFinite { tau: f64 },
    #[error("integration diverged at step {step} (tau = {tau})")]
    Diverged { step: usize, tau: f64 },
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("derivative evaluation failed: {0}")]
    Model(#[from] NeuralError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Forward Euler.
    Fe,
    /// Trapezoidal rule with fixed-point corrector.
    Tr,
    /// Classical fourth-order Runge-Kutta.
    Rk4,
    /// Implicit Adams-Bashforth-Moulton predictor-corrector.
    Abm,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Fe => "fe",
            Scheme::Tr => "tr",
            Scheme::Rk4 => "rk4",
            Scheme::Abm => "abm",
        }
    }

    pub fn is_implicit(self) -> bool {
        matches!(self, Scheme::Tr | Scheme::Abm)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fe" => Ok(Scheme::Fe),
            "tr" => Ok(Scheme::Tr),
            "rk4" => Ok(Scheme::Rk4),
            "abm" | "ia" => Ok(Scheme::Abm),
            other => Err(format!("unknown solver scheme '{other}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub scheme: Scheme,
    /// Normalized step Δτ.
    pub step: f64,
    pub implicit_max_iters: usize,
    pub implicit_tol: f64,
    pub abm_order: usize,
    /// Any state component beyond this magnitude counts as divergence.
    pub divergence_bound: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Fe,
            step: 1.0,
            implicit_max_iters: 10,
            implicit_tol: 1e-9,
            abm_order: 2,
            divergence_bound: 1e4,
        }
    }
}

impl SolverConfig {
    pub fn new(scheme: Scheme, step: f64) -> Self {
        Self {
            scheme,
            step,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(SolverError::Config(format!("step must be positive, got {}", self.step)));
        }
        if self.implicit_max_iters == 0 {
            return Err(SolverError::Config("implicit_max_iters must be at least 1".into()));
        }
        if !(self.implicit_tol > 0.0) {
            return Err(SolverError::Config("implicit_tol must be positive".into()));
        }
        if !(1..=4).contains(&self.abm_order) {
            return Err(SolverError::Config(format!(
                "abm_order must be in 1..=4, got {}",
                self.abm_order
            )));
        }
        Ok(())
    }
}

/// Vector-space operations a scheme needs on its state type.
pub trait StateAlgebra {
    type State: Clone;

    /// `base + Σ cᵢ·termᵢ`.
    fn combine(
        &mut self,
        base: &Self::State,
        terms: &[(f64, &Self::State)],
    ) -> Result<Self::State, SolverError>;
    fn max_abs(&self, s: &Self::State) -> f64;
    fn max_abs_diff(&self, a: &Self::State, b: &Self::State) -> f64;
}

impl<B: Backend> StateAlgebra for B {
    type State = B::Value;

    fn combine(
        &mut self,
        base: &B::Value,
        terms: &[(f64, &B::Value)],
    ) -> Result<B::Value, SolverError> {
        Ok(self.lin_comb(base, terms)?)
    }

    fn max_abs(&self, s: &B::Value) -> f64 {
        let t = self.value(s);
        if t.is_finite() {
            t.max_abs()
        } else {
            f64::INFINITY
        }
    }

    fn max_abs_diff(&self, a: &B::Value, b: &B::Value) -> f64 {
        self.value(a).max_abs_diff(self.value(b))
    }
}

/// Plain `Vec<f64>` states.
#[derive(Clone, Copy, Debug, Default)]
pub struct Plain;

impl StateAlgebra for Plain {
    type State = Vec<f64>;

    fn combine(&mut self, base: &Vec<f64>, terms: &[(f64, &Vec<f64>)]) -> Result<Vec<f64>, SolverError> {
        let mut out = base.clone();
        for (c, t) in terms {
            if t.len() != out.len() {
                return Err(SolverError::Config("state dimension changed".into()));
            }
            for (o, v) in out.iter_mut().zip(t.iter()) {
                *o += c * v;
            }
        }
        Ok(out)
    }

    fn max_abs(&self, s: &Vec<f64>) -> f64 {
        s.iter().fold(0.0_f64, |m, v| if v.is_finite() { m.max(v.abs()) } else { f64::INFINITY })
    }

    fn max_abs_diff(&self, a: &Vec<f64>, b: &Vec<f64>) -> f64 {
        a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
    }
}

/// Right-hand side `dy/dτ = f(τ, y)`.
pub trait DerivativeFn<A: StateAlgebra> {
    fn eval(&mut self, alg: &mut A, tau: f64, y: &A::State) -> Result<A::State, SolverError>;
}

impl<A, F> DerivativeFn<A> for F
where
    A: StateAlgebra,
    F: FnMut(&mut A, f64, &A::State) -> Result<A::State, SolverError>,
{
    fn eval(&mut self, alg: &mut A, tau: f64, y: &A::State) -> Result<A::State, SolverError> {
        self(alg, tau, y)
    }
}

fn eval_checked<A: StateAlgebra, F: DerivativeFn<A>>(
    alg: &mut A,
    f: &mut F,
    tau: f64,
    y: &A::State,
) -> Result<A::State, SolverError> {
    let k = f.eval(alg, tau, y)?;
    if !alg.max_abs(&k).is_finite() {
        return Err(SolverError::NonFinite { tau });
    }
    Ok(k)
}

/// Outcome of one implicit solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ImplicitInfo {
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub steps: usize,
    pub derivative_evals: usize,
    /// Implicit steps that hit `implicit_max_iters` without meeting `implicit_tol`.
    pub nonconverged: usize,
}

pub fn fe_step<A: StateAlgebra, F: DerivativeFn<A>>(
    alg: &mut A,
    f: &mut F,
    tau: f64,
    y: &A::State,
    h: f64,
) -> Result<A::State, SolverError> {
    let k = eval_checked(alg, f, tau, y)?;
    alg.combine(y, &[(h, &k)])
}

/// Trapezoidal step solved by fixed-point iteration from a forward-Euler predictor.
///
/// A step that does not meet the tolerance returns its last iterate with
/// `converged == false`.
pub fn tr_step<A: StateAlgebra, F: DerivativeFn<A>>(
    alg: &mut A,
    f: &mut F,
    tau: f64,
    y: &A::State,
    h: f64,
    cfg: &SolverConfig,
) -> Result<(A::State, ImplicitInfo), SolverError> {
    let k0 = eval_checked(alg, f, tau, y)?;
    // y + h·k0 + (h/2)(k1 − k0) keeps constant fields bit-exact
    let predictor = alg.combine(y, &[(h, &k0)])?;
    let mut cur = predictor.clone();
    for it in 1..=cfg.implicit_max_iters {
        let k1 = eval_checked(alg, f, tau + h, &cur)?;
        let dk = alg.combine(&k1, &[(-1.0, &k0)])?;
        let next = alg.combine(&predictor, &[(0.5 * h, &dk)])?;
        let delta = alg.max_abs_diff(&next, &cur);
        cur = next;
        if delta <= cfg.implicit_tol {
            return Ok((
                cur,
                ImplicitInfo {
                    iterations: it,
                    converged: true,
                },
            ));
        }
    }
    Ok((
        cur,
        ImplicitInfo {
            iterations: cfg.implicit_max_iters,
            converged: false,
        },
    ))
}

pub fn rk4_step<A: StateAlgebra, F: DerivativeFn<A>>(
    alg: &mut A,
    f: &mut F,
    tau: f64,
    y: &A::State,
    h: f64,
) -> Result<A::State, SolverError> {
    let k1 = eval_checked(alg, f, tau, y)?;
    let y2 = alg.combine(y, &[(0.5 * h, &k1)])?;
    let k2 = eval_checked(alg, f, tau + 0.5 * h, &y2)?;
    let y3 = alg.combine(y, &[(0.5 * h, &k2)])?;
    let k3 = eval_checked(alg, f, tau + 0.5 * h, &y3)?;
    let y4 = alg.combine(y, &[(h, &k3)])?;
    let k4 = eval_checked(alg, f, tau + h, &y4)?;
    // weights rewritten around k1 so a constant field reproduces y + h·k1 exactly
    let d2 = alg.combine(&k2, &[(-1.0, &k1)])?;
    let d3 = alg.combine(&k3, &[(-1.0, &k1)])?;
    let d4 = alg.combine(&k4, &[(-1.0, &k1)])?;
    alg.combine(
        y,
        &[(h, &k1), (h / 3.0, &d2), (h / 3.0, &d3), (h / 6.0, &d4)],
    )
}

/// Adams-Bashforth predictor weights for `f_n, f_{n-1}, …`.
fn ab_coefficients(order: usize) -> &'static [f64] {
    match order {
        1 => &[1.0],
        2 => &[1.5, -0.5],
        3 => &[23.0 / 12.0, -16.0 / 12.0, 5.0 / 12.0],
        _ => &[55.0 / 24.0, -59.0 / 24.0, 37.0 / 24.0, -9.0 / 24.0],
    }
}

/// Adams-Moulton corrector weights for `f_{n+1}, f_n, f_{n-1}, …`.
fn am_coefficients(order: usize) -> &'static [f64] {
    match order {
        1 => &[1.0],
        2 => &[0.5, 0.5],
        3 => &[5.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0],
        _ => &[9.0 / 24.0, 19.0 / 24.0, -5.0 / 24.0, 1.0 / 24.0],
    }
}

fn check_state<A: StateAlgebra>(
    alg: &A,
    y: &A::State,
    step: usize,
    tau: f64,
    bound: f64,
) -> Result<(), SolverError> {
    let m = alg.max_abs(y);
    if !m.is_finite() || m > bound {
        return Err(SolverError::Diverged { step, tau });
    }
    Ok(())
}

/// Predictor-corrector Adams integration of order `cfg.abm_order`.
///
/// The first `order - 1` steps are taken with RK4 to fill the history.
/// `emit` receives every state, starting with `y0` at index 0.
pub fn abm_integrate<A, F, E>(
    alg: &mut A,
    f: &mut F,
    y0: A::State,
    n_steps: usize,
    cfg: &SolverConfig,
    mut emit: E,
) -> Result<IntegrationStats, SolverError>
where
    A: StateAlgebra,
    F: DerivativeFn<A>,
    E: FnMut(&A, usize, &A::State),
{
    cfg.validate()?;
    let order = cfg.abm_order;
    let h = cfg.step;
    let ab = ab_coefficients(order);
    let am = am_coefficients(order);
    let mut stats = IntegrationStats::default();
    // most recent derivative first
    let mut history: VecDeque<A::State> = VecDeque::with_capacity(order + 1);
    let mut y = y0;
    emit(alg, 0, &y);
    for n in 0..n_steps {
        let tau = n as f64 * h;
        let fn_ = eval_checked(alg, f, tau, &y)?;
        stats.derivative_evals += 1;
        history.push_front(fn_);
        history.truncate(order);

        let next = if history.len() < order {
            stats.derivative_evals += 4;
            rk4_step(alg, f, tau, &y, h)?
        } else {
            // Both formulas are expanded around f_n as y + h·f_n + Σ h·c·(f_j − f_n),
            // which is exact for constant fields since the weights sum to one.
            let f_now = &history[0];
            let diffs = history
                .iter()
                .skip(1)
                .map(|k| alg.combine(k, &[(-1.0, f_now)]))
                .collect::<Result<Vec<_>, _>>()?;
            let mut pred_terms = vec![(h, f_now)];
            pred_terms.extend(ab[1..].iter().zip(diffs.iter()).map(|(c, d)| (h * c, d)));
            let mut cur = alg.combine(&y, &pred_terms)?;
            let mut base_terms = vec![(h, f_now)];
            base_terms.extend(am.iter().skip(2).zip(diffs.iter()).map(|(c, d)| (h * c, d)));
            let base = alg.combine(&y, &base_terms)?;
            let mut converged = false;
            for _ in 0..cfg.implicit_max_iters {
                let k = eval_checked(alg, f, tau + h, &cur)?;
                stats.derivative_evals += 1;
                let dk = alg.combine(&k, &[(-1.0, f_now)])?;
                let updated = alg.combine(&base, &[(h * am[0], &dk)])?;
                let delta = alg.max_abs_diff(&updated, &cur);
                cur = updated;
                if delta <= cfg.implicit_tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                stats.nonconverged += 1;
            }
            cur
        };
        check_state(alg, &next, n + 1, tau + h, cfg.divergence_bound)?;
        y = next;
        stats.steps += 1;
        emit(alg, n + 1, &y);
    }
    Ok(stats)
}

/// Integrates `n_steps` steps of the configured scheme from `τ = 0`.
///
/// `emit` is called with every state (index 0 is `y0`), so callers decide
/// what to keep; the trajectory has `n_steps + 1` entries.
pub fn integrate<A, F, E>(
    alg: &mut A,
    f: &mut F,
    y0: A::State,
    n_steps: usize,
    cfg: &SolverConfig,
    mut emit: E,
) -> Result<IntegrationStats, SolverError>
where
    A: StateAlgebra,
    F: DerivativeFn<A>,
    E: FnMut(&A, usize, &A::State),
{
    cfg.validate()?;
    if cfg.scheme == Scheme::Abm {
        return abm_integrate(alg, f, y0, n_steps, cfg, emit);
    }
    let h = cfg.step;
    let mut stats = IntegrationStats::default();
    let mut y = y0;
    emit(alg, 0, &y);
    for n in 0..n_steps {
        let tau = n as f64 * h;
        let next = match cfg.scheme {
            Scheme::Fe => {
                stats.derivative_evals += 1;
                fe_step(alg, f, tau, &y, h)?
            }
            Scheme::Rk4 => {
                stats.derivative_evals += 4;
                rk4_step(alg, f, tau, &y, h)?
            }
            Scheme::Tr => {
                let (next, info) = tr_step(alg, f, tau, &y, h, cfg)?;
                stats.derivative_evals += 1 + info.iterations;
                if !info.converged {
                    stats.nonconverged += 1;
                }
                next
            }
            Scheme::Abm => unreachable!(),
        };
        check_state(alg, &next, n + 1, tau + h, cfg.divergence_bound)?;
        y = next;
        stats.steps += 1;
        emit(alg, n + 1, &y);
    }
    Ok(stats)
}

/// [`integrate`] collecting the whole trajectory.
pub fn integrate_collect<A, F>(
    alg: &mut A,
    f: &mut F,
    y0: A::State,
    n_steps: usize,
    cfg: &SolverConfig,
) -> Result<(Vec<A::State>, IntegrationStats), SolverError>
where
    A: StateAlgebra,
    F: DerivativeFn<A>,
{
    let mut out = Vec::with_capacity(n_steps + 1);
    let stats = integrate(alg, f, y0, n_steps, cfg, |_, _, s| out.push(s.clone()))?;
    Ok((out, stats))
}

/// Convenience wrapper for plain closures `f(τ, y) -> dy/dτ`.
pub fn solve<F>(
    mut f: F,
    y0: &[f64],
    n_steps: usize,
    cfg: &SolverConfig,
) -> Result<(Vec<Vec<f64>>, IntegrationStats), SolverError>
where
    F: FnMut(f64, &[f64]) -> Vec<f64>,
{
    let mut rhs = |_: &mut Plain, tau: f64, y: &Vec<f64>| Ok(f(tau, y));
    integrate_collect(&mut Plain, &mut rhs, y0.to_vec(), n_steps, cfg)
}
