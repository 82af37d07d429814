//! Steady-state search: integrate until the residual stalls, then polish with
//! damped Newton iterations on `f(y) = 0`.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{max_norm, DormandPrince, IntegratorConfig, Lu, Matrix, OdeRhs};
use crate::error::{Error, Result};

/// Outcome of a steady-state search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub converged: bool,
    /// Integration time at which the stall window closed.
    pub time: f64,
    pub steps: usize,
    pub rejected_steps: usize,
    pub rhs_evals: usize,
    /// Scaled residual `‖f(y)‖∞ / ‖y‖∞` when integration stopped.
    pub integration_residual: f64,
    pub newton_iterations: usize,
    pub polished: bool,
    /// Scaled residual of the returned state.
    pub final_residual: f64,
    pub wall_time_s: f64,
}

impl ConvergenceReport {
    /// `key = value` lines.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "converged = {}", self.converged);
        let _ = writeln!(out, "time = {:e}", self.time);
        let _ = writeln!(out, "steps = {}", self.steps);
        let _ = writeln!(out, "rejected_steps = {}", self.rejected_steps);
        let _ = writeln!(out, "rhs_evals = {}", self.rhs_evals);
        let _ = writeln!(
            out,
            "integration_residual = {:e}",
            self.integration_residual
        );
        let _ = writeln!(out, "newton_iterations = {}", self.newton_iterations);
        let _ = writeln!(out, "polished = {}", self.polished);
        let _ = writeln!(out, "final_residual = {:e}", self.final_residual);
        let _ = writeln!(out, "wall_time_s = {:.6}", self.wall_time_s);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub state: Vec<f64>,
    pub report: ConvergenceReport,
}

fn scaled_residual(f: &[f64], y: &[f64]) -> f64 {
    let fy = max_norm(f);
    let ny = max_norm(y);
    if fy == 0.0 {
        0.0
    } else {
        fy / ny.max(f64::MIN_POSITIVE)
    }
}

/// Integrates from `y0` until `‖f(y)‖∞ / ‖y‖∞ < stall_threshold` holds over a
/// trailing `stall_window`, then optionally Newton-polishes the result.
///
/// Near the stability limit of the explicit integrator the residual can
/// plateau just above the threshold. Once the residual has stayed below
/// `polish_trigger` for a full window, a Newton polish is attempted from the
/// current state (again at doubling times); it is accepted when it reaches
/// `stall_threshold` with a relative state change of at most `1e-3`.
pub fn find_steady_state<R: OdeRhs + ?Sized>(
    rhs: &R,
    y0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<SteadyState> {
    cfg.validate()?;
    let start = Instant::now();
    let mut dp = DormandPrince::new(rhs, 0.0, y0, cfg)?;
    let can_polish = cfg.newton_polish && y0.len() <= cfg.polish_max_dim;
    let mut stall_since: Option<f64> = None;
    let mut near_since: Option<f64> = None;
    let mut next_attempt = 0.0;
    let mut residual = scaled_residual(dp.dydt(), dp.y());
    let mut early: Option<(Vec<f64>, usize, f64)> = None;
    loop {
        if residual < cfg.stall_threshold {
            let since = *stall_since.get_or_insert(dp.t());
            if dp.t() - since >= cfg.stall_window {
                break;
            }
        } else {
            stall_since = None;
        }
        if residual < cfg.polish_trigger {
            let since = *near_since.get_or_insert(dp.t());
            if can_polish && dp.t() - since >= cfg.stall_window && dp.t() >= next_attempt {
                next_attempt = 2.0 * dp.t();
                if let Ok((y, iters, res)) = newton_polish(rhs, dp.y(), 30) {
                    let shift = dp
                        .y()
                        .iter()
                        .zip(&y)
                        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
                    if res < cfg.stall_threshold && shift <= 1e-3 * max_norm(&y) {
                        early = Some((y, iters, res));
                        break;
                    }
                }
            }
        } else {
            near_since = None;
        }
        if dp.t() >= cfg.max_time {
            return Err(Error::NotConverged {
                t: dp.t(),
                residual,
                last_state: dp.into_state(),
            });
        }
        dp.step(cfg.max_time)?;
        residual = scaled_residual(dp.dydt(), dp.y());
    }
    let stats = dp.stats();
    let time = dp.t();
    let integration_residual = residual;
    let mut state = dp.into_state();
    let mut report = ConvergenceReport {
        converged: true,
        time,
        steps: stats.accepted,
        rejected_steps: stats.rejected,
        rhs_evals: stats.rhs_evals,
        integration_residual,
        newton_iterations: 0,
        polished: false,
        final_residual: integration_residual,
        wall_time_s: 0.0,
    };
    if let Some((polished, iterations, res)) = early {
        state = polished;
        report.newton_iterations = iterations;
        report.polished = true;
        report.final_residual = res;
    } else if can_polish {
        if let Ok((polished, iterations, res)) = newton_polish(rhs, &state, 30) {
            report.newton_iterations = iterations;
            if res <= integration_residual {
                state = polished;
                report.polished = true;
                report.final_residual = res;
            }
        }
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(SteadyState { state, report })
}

/// Central-difference Jacobian with step `1e-6 · max(|y_k|, 1)`.
fn jacobian<R: OdeRhs + ?Sized>(rhs: &R, y: &[f64]) -> Matrix<f64> {
    let n = y.len();
    let mut jac = Matrix::zeros(n);
    let mut yp = y.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for k in 0..n {
        let h = 1e-6 * y[k].abs().max(1.0);
        yp[k] = y[k] + h;
        rhs.eval(0.0, &yp, &mut fp);
        yp[k] = y[k] - h;
        rhs.eval(0.0, &yp, &mut fm);
        yp[k] = y[k];
        for i in 0..n {
            jac[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

/// Damped Newton iteration on `f(y) = 0` starting at `y0`.
///
/// Returns the best iterate, the number of iterations taken and its scaled
/// residual. Stops when the residual no longer decreases.
pub fn newton_polish<R: OdeRhs + ?Sized>(
    rhs: &R,
    y0: &[f64],
    max_iter: usize,
) -> Result<(Vec<f64>, usize, f64)> {
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut f = vec![0.0; n];
    rhs.eval(0.0, &y, &mut f);
    let mut fnorm = max_norm(&f);
    let mut trial = vec![0.0; n];
    let mut ftrial = vec![0.0; n];
    let mut iterations = 0;
    while iterations < max_iter {
        if fnorm <= 4.0 * f64::EPSILON * max_norm(&y) {
            break;
        }
        iterations += 1;
        let lu = Lu::factor(jacobian(rhs, &y))?;
        let neg_f: Vec<f64> = f.iter().map(|v| -v).collect();
        let delta = lu.solve(&neg_f)?;
        let mut lambda = 1.0;
        let mut improved = false;
        while lambda >= 1.0 / 64.0 {
            for i in 0..n {
                trial[i] = y[i] + lambda * delta[i];
            }
            rhs.eval(0.0, &trial, &mut ftrial);
            let tn = max_norm(&ftrial);
            if tn.is_finite() && tn < fnorm {
                std::mem::swap(&mut y, &mut trial);
                std::mem::swap(&mut f, &mut ftrial);
                fnorm = tn;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let res = scaled_residual(&f, &y);
    Ok((y, iterations, res))
}
