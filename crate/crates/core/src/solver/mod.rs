//! Time integration, steady-state search and dense linear algebra.

mod linalg;
mod rk45;
mod steady;

pub use linalg::{solve_linear, LinearSolution, Lu, Matrix};
pub use rk45::{integrate, integrate_sampled, DormandPrince, IntegrationStats, Trajectory};
pub use steady::{find_steady_state, newton_polish, ConvergenceReport, SteadyState};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-hand side of an autonomous or time-dependent real ODE system.
pub trait OdeRhs: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, y: &[f64], dydt: &mut [f64]);
}

/// Adapter turning a closure into an [`OdeRhs`].
pub struct FnRhs<F> {
    dim: usize,
    f: F,
}

impl<F> FnRhs<F>
where
    F: Fn(f64, &[f64], &mut [f64]) + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> OdeRhs for FnRhs<F>
where
    F: Fn(f64, &[f64], &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, y: &[f64], dydt: &mut [f64]) {
        (self.f)(t, y, dydt)
    }
}

/// Integrator and steady-state settings. Times are in units of 1/κ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_time: f64,
    /// Trailing window over which the scaled residual must stay below
    /// `stall_threshold` before integration stops.
    pub stall_window: f64,
    /// Threshold on `‖f(y)‖∞ / ‖y‖∞`.
    pub stall_threshold: f64,
    /// Run damped Newton iterations after the stall is detected.
    pub newton_polish: bool,
    /// Skip the Newton polish above this state dimension.
    pub polish_max_dim: usize,
    /// Residual below which an early Newton polish is attempted.
    pub polish_trigger: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_step: 10.0,
            max_time: 2e6,
            stall_window: 50.0,
            stall_threshold: 1e-9,
            newton_polish: true,
            polish_max_dim: 4000,
            polish_trigger: 1e-6,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
            ("max_time", self.max_time),
            ("stall_window", self.stall_window),
            ("stall_threshold", self.stall_threshold),
            ("polish_trigger", self.polish_trigger),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        if self.rel_tol > 1e-2 || self.abs_tol > 1e-2 {
            return Err(Error::InvalidParameter(
                "rel_tol and abs_tol must not exceed 1e-2".into(),
            ));
        }
        Ok(())
    }

    /// Tight tolerances for oracle comparisons.
    pub fn precise() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-15,
            ..Self::default()
        }
    }
}

pub(crate) fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}
