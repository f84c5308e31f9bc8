//! Steppers and the iteration driver.
//!
//! Every stepper maps a point `x` to `R_x(-s·d)` for some direction `d` and
//! multiplier `s`, keeping `‖s·d‖ < r(x)/2` whenever `r(x)` is finite:
//!
//! * Backtracking GD picks `s = β^j δ₀` by Armijo's condition.
//! * Local Backtracking GD picks `s = β^j δ₀ < α/L(x)` without evaluating `f`.
//! * New Q-Newton regularizes the Hessian, reflects the Newton direction
//!   across the negative eigenspace and caps the step with the γ-sequence.
//! * Newton and Random Newton are the unregularized baselines (same cap).
//! * Standard GD uses a fixed learning rate.

mod driver;
mod linesearch;
mod newton;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use driver::{run, StepRecord};
pub use linesearch::{
    armijo_delta, backtracking_gd_step, local_bgd_delta, local_bgd_step, standard_gd_step,
    MAX_BACKTRACKS, STALL_FACTOR,
};
pub use newton::{
    gamma_step_factor, new_q_newton_direction, new_q_newton_step, newton_direction, newton_step,
    random_newton_step, NqnDirection,
};

use crate::error::{Error, Result};

/// Hyperparameters shared by Backtracking GD and Local Backtracking GD.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BacktrackingParams {
    pub alpha: f64,
    pub beta: f64,
    pub delta0: f64,
}

impl Default for BacktrackingParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.7,
            delta0: 1.0,
        }
    }
}

impl BacktrackingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0,1), got {}",
                self.alpha
            )));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must lie in (0,1), got {}",
                self.beta
            )));
        }
        if !(self.delta0 > 0.0 && self.delta0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "delta0 must be positive, got {}",
                self.delta0
            )));
        }
        Ok(())
    }
}

/// Strictly increasing step-cap sequence with `γ₀ = 0`, `γ₁ = 1`, `γ_j → ∞`.
#[derive(Clone, Default)]
pub enum Gamma {
    /// `γ_j = j`
    #[default]
    Linear,
    Custom(Arc<dyn Fn(usize) -> f64 + Send + Sync>),
}

impl fmt::Debug for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Linear => f.write_str("Linear"),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Gamma {
    pub fn value(&self, j: usize) -> f64 {
        match self {
            Self::Linear => j as f64,
            Self::Custom(g) => g(j),
        }
    }

    /// Checks `γ₀ = 0`, `γ₁ = 1` and strict increase over a finite prefix.
    pub fn validate(&self) -> Result<()> {
        if self.value(0) != 0.0 || self.value(1) != 1.0 {
            return Err(Error::InvalidParameter("gamma must start 0, 1".into()));
        }
        for j in 1..256 {
            if !(self.value(j + 1) > self.value(j)) {
                return Err(Error::InvalidParameter(format!(
                    "gamma must be strictly increasing (fails at j = {j})"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct NewQNewtonParams {
    /// Exponent `a > 1` in `δ_j ‖grad f‖^a`.
    pub exponent_a: f64,
    /// Regularizers `δ_0, …, δ_m`, tried in order.
    pub deltas: Vec<f64>,
    pub gamma: Gamma,
    /// Use `min{‖grad f‖^a, 1}` instead of `‖grad f‖^a`.
    pub clamp_grad_power: bool,
    /// Replace `deltas` by `dim + 1` draws from `uniform(0, 1]` at the start
    /// of each run.
    pub random_deltas: bool,
}

impl Default for NewQNewtonParams {
    fn default() -> Self {
        Self {
            exponent_a: 2.0,
            deltas: vec![0.0, 1.0],
            gamma: Gamma::Linear,
            clamp_grad_power: true,
            random_deltas: false,
        }
    }
}

impl NewQNewtonParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.exponent_a > 1.0 && self.exponent_a.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "exponent_a must exceed 1, got {}",
                self.exponent_a
            )));
        }
        if !self.random_deltas {
            if self.deltas.is_empty() || self.deltas.iter().any(|d| !d.is_finite()) {
                return Err(Error::InvalidParameter(
                    "deltas must be non-empty and finite".into(),
                ));
            }
            for (i, a) in self.deltas.iter().enumerate() {
                if self.deltas[..i].contains(a) {
                    return Err(Error::InvalidParameter(
                        "deltas must be pairwise distinct".into(),
                    ));
                }
            }
        }
        self.gamma.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopCriteria {
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Stop once `‖x_k‖` exceeds this.
    pub divergence_norm: f64,
    /// Stop once `‖x_{k+1} - x_k‖ <= step_tol`.
    pub step_tol: f64,
}

impl Default for StopCriteria {
    fn default() -> Self {
        Self {
            grad_tol: 1e-10,
            max_iters: 500,
            divergence_norm: 1e12,
            step_tol: 0.0,
        }
    }
}

impl StopCriteria {
    pub fn validate(&self) -> Result<()> {
        if self.grad_tol < 0.0 || self.step_tol < 0.0 || !(self.divergence_norm > 0.0) {
            return Err(Error::InvalidParameter(
                "stop criteria must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub enum Method {
    Backtracking(BacktrackingParams),
    LocalBacktracking(BacktrackingParams),
    NewQNewton(NewQNewtonParams),
    Newton,
    /// Newton step damped by `κ ~ uniform(0, 2)` drawn each iteration.
    RandomNewton,
    StandardGd {
        lr: f64,
    },
}

impl Method {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Backtracking(p) | Self::LocalBacktracking(p) => p.validate(),
            Self::NewQNewton(p) => p.validate(),
            Self::StandardGd { lr } if !(*lr >= 0.0 && lr.is_finite()) => Err(
                Error::InvalidParameter(format!("learning rate must be nonnegative, got {lr}")),
            ),
            _ => Ok(()),
        }
    }

    /// Methods whose traces must satisfy Armijo's condition at every step.
    pub fn is_armijo_descent(&self) -> bool {
        matches!(self, Self::Backtracking(_) | Self::LocalBacktracking(_))
    }
}

/// Result of one stepper call.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub point: Vec<f64>,
    /// Multiplier applied to the search direction (δ, λ, κλ or the rate).
    pub step_size: f64,
    /// Norm of the tangent vector handed to the retraction.
    pub step_norm: f64,
    /// The step was shortened to fit the retraction ball.
    pub clamped: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Termination {
    StoppedAtCriticalPoint,
    MaxIterations,
    Diverged,
    StepTolerance,
    LineSearchExhausted,
    /// The decrease a step guarantees fell below what `f` can resolve.
    Stalled,
    SingularMatrix,
    NoInvertibleRegularizer,
    LeftDomain,
    NumericalFailure,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::StoppedAtCriticalPoint => "StoppedAtCriticalPoint",
            Self::MaxIterations => "MaxIterations",
            Self::Diverged => "Diverged",
            Self::StepTolerance => "StepTolerance",
            Self::LineSearchExhausted => "LineSearchExhausted",
            Self::Stalled => "Stalled",
            Self::SingularMatrix => "SingularMatrix",
            Self::NoInvertibleRegularizer => "NoInvertibleRegularizer",
            Self::LeftDomain => "LeftDomain",
            Self::NumericalFailure => "NumericalFailure",
        }
    }

    /// Stepper errors that end a run rather than abort it.
    pub(crate) fn from_step_error(e: &Error) -> Option<Self> {
        Some(match e {
            Error::LineSearchExhausted(_) => Self::LineSearchExhausted,
            Error::Stalled(_) => Self::Stalled,
            Error::SingularMatrix => Self::SingularMatrix,
            Error::NoInvertibleRegularizer => Self::NoInvertibleRegularizer,
            Error::LeftDomain
            | Error::StepTooLarge { .. }
            | Error::NotTangent(_)
            | Error::NotOnManifold => Self::LeftDomain,
            Error::NonFinite(_) => Self::NumericalFailure,
            _ => return None,
        })
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct IterateTrace {
    pub records: Vec<StepRecord>,
    pub termination: Termination,
}

impl IterateTrace {
    pub fn last(&self) -> &StepRecord {
        self.records
            .last()
            .expect("a trace always holds the initial point")
    }

    /// Number of accepted steps.
    pub fn steps(&self) -> usize {
        self.records.len() - 1
    }

    pub fn any_clamped(&self) -> bool {
        self.records.iter().any(|r| r.clamped)
    }
}
