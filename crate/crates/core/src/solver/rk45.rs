//! Dormand–Prince 5(4) with local extrapolation and FSAL.

use super::{IntegratorConfig, OdeRhs};
use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the 5th- and 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Sampled solution of an initial value problem.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: IntegrationStats,
}

impl Trajectory {
    pub fn last(&self) -> (f64, &[f64]) {
        (
            *self.times.last().expect("trajectory is never empty"),
            self.states.last().expect("trajectory is never empty"),
        )
    }
}

/// Adaptive stepper. Holds the current state and the derivative at it.
pub struct DormandPrince<'a, R: OdeRhs + ?Sized> {
    rhs: &'a R,
    rel_tol: f64,
    abs_tol: f64,
    max_step: f64,
    t: f64,
    h: f64,
    y: Vec<f64>,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    k5: Vec<f64>,
    k6: Vec<f64>,
    k7: Vec<f64>,
    y_new: Vec<f64>,
    tmp: Vec<f64>,
    stats: IntegrationStats,
}

impl<'a, R: OdeRhs + ?Sized> DormandPrince<'a, R> {
    pub fn new(rhs: &'a R, t0: f64, y0: &[f64], cfg: &IntegratorConfig) -> Result<Self> {
        let n = rhs.dim();
        if y0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: y0.len(),
            });
        }
        if let Some(index) = y0.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t: t0, index });
        }
        let mut s = Self {
            rhs,
            rel_tol: cfg.rel_tol,
            abs_tol: cfg.abs_tol,
            max_step: cfg.max_step,
            t: t0,
            h: 0.0,
            y: y0.to_vec(),
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            k5: vec![0.0; n],
            k6: vec![0.0; n],
            k7: vec![0.0; n],
            y_new: vec![0.0; n],
            tmp: vec![0.0; n],
            stats: IntegrationStats::default(),
        };
        rhs.eval(t0, &s.y, &mut s.k1);
        s.stats.rhs_evals += 1;
        s.h = s.initial_step();
        Ok(s)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Derivative at the current state.
    pub fn dydt(&self) -> &[f64] {
        &self.k1
    }

    pub fn stats(&self) -> IntegrationStats {
        self.stats
    }

    pub fn into_state(self) -> Vec<f64> {
        self.y
    }

    fn scale(&self, i: usize, y_new: f64) -> f64 {
        self.abs_tol + self.rel_tol * self.y[i].abs().max(y_new.abs())
    }

    fn initial_step(&mut self) -> f64 {
        let n = self.y.len();
        if n == 0 {
            return self.max_step;
        }
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..n {
            let sc = self.abs_tol + self.rel_tol * self.y[i].abs();
            d0 += (self.y[i] / sc).powi(2);
            d1 += (self.k1[i] / sc).powi(2);
        }
        let d0 = (d0 / n as f64).sqrt();
        let d1 = (d1 / n as f64).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let h0 = h0.min(self.max_step);
        for i in 0..n {
            self.tmp[i] = self.y[i] + h0 * self.k1[i];
        }
        self.rhs.eval(self.t + h0, &self.tmp, &mut self.k2);
        self.stats.rhs_evals += 1;
        let mut d2 = 0.0;
        for i in 0..n {
            let sc = self.abs_tol + self.rel_tol * self.y[i].abs();
            d2 += ((self.k2[i] - self.k1[i]) / sc).powi(2);
        }
        let d2 = (d2 / n as f64).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.max_step)
    }

    /// One Dormand–Prince trial step of size `h` from the current state.
    /// Fills `y_new`, `k7` and returns the scaled RMS error estimate.
    fn trial(&mut self, h: f64) -> f64 {
        let n = self.y.len();
        let t = self.t;
        let (y, tmp) = (&self.y, &mut self.tmp);
        for i in 0..n {
            tmp[i] = y[i] + h * A21 * self.k1[i];
        }
        self.rhs.eval(t + C2 * h, tmp, &mut self.k2);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * self.k1[i] + A32 * self.k2[i]);
        }
        self.rhs.eval(t + C3 * h, tmp, &mut self.k3);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * self.k1[i] + A42 * self.k2[i] + A43 * self.k3[i]);
        }
        self.rhs.eval(t + C4 * h, tmp, &mut self.k4);
        for i in 0..n {
            tmp[i] = y[i]
                + h * (A51 * self.k1[i] + A52 * self.k2[i] + A53 * self.k3[i] + A54 * self.k4[i]);
        }
        self.rhs.eval(t + C5 * h, tmp, &mut self.k5);
        for i in 0..n {
            tmp[i] = y[i]
                + h * (A61 * self.k1[i]
                    + A62 * self.k2[i]
                    + A63 * self.k3[i]
                    + A64 * self.k4[i]
                    + A65 * self.k5[i]);
        }
        self.rhs.eval(t + h, tmp, &mut self.k6);
        for i in 0..n {
            self.y_new[i] = y[i]
                + h * (A71 * self.k1[i]
                    + A73 * self.k3[i]
                    + A74 * self.k4[i]
                    + A75 * self.k5[i]
                    + A76 * self.k6[i]);
        }
        self.rhs.eval(t + h, &self.y_new, &mut self.k7);
        self.stats.rhs_evals += 6;

        let mut err = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * self.k1[i]
                    + E3 * self.k3[i]
                    + E4 * self.k4[i]
                    + E5 * self.k5[i]
                    + E6 * self.k6[i]
                    + E7 * self.k7[i]);
            let sc = self.scale(i, self.y_new[i]);
            err += (e / sc).powi(2);
        }
        if n == 0 {
            0.0
        } else {
            (err / n as f64).sqrt()
        }
    }

    fn accept(&mut self, h: f64) -> Result<()> {
        self.t += h;
        std::mem::swap(&mut self.y, &mut self.y_new);
        std::mem::swap(&mut self.k1, &mut self.k7);
        self.stats.accepted += 1;
        if let Some(index) = self.y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t: self.t, index });
        }
        Ok(())
    }

    /// Takes one accepted adaptive step, never stepping past `t_limit`.
    pub fn step(&mut self, t_limit: f64) -> Result<()> {
        let mut rejected_last = false;
        loop {
            let remaining = t_limit - self.t;
            let mut h = self.h.min(self.max_step);
            let clipped = h >= remaining;
            if clipped {
                h = remaining;
            }
            let min_step = 1e-14 * self.t.abs().max(1.0);
            if h < min_step && !clipped {
                return Err(Error::StepUnderflow { t: self.t, h });
            }
            let err = self.trial(h);
            if err.is_finite() && err <= 1.0 {
                self.accept(h)?;
                let fac = if err == 0.0 {
                    FAC_MAX
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
                };
                let fac = if rejected_last { fac.min(1.0) } else { fac };
                // A clipped step says nothing about the natural step size.
                if !clipped || fac < 1.0 {
                    self.h = (h * fac).min(self.max_step);
                }
                return Ok(());
            }
            self.stats.rejected += 1;
            rejected_last = true;
            let fac = if err.is_finite() {
                (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0)
            } else {
                FAC_MIN
            };
            self.h = h * fac;
            if self.h < min_step {
                return Err(Error::StepUnderflow {
                    t: self.t,
                    h: self.h,
                });
            }
        }
    }

    /// Single non-adaptive step of size `h` (for order measurements).
    pub fn step_fixed(&mut self, h: f64) -> Result<()> {
        self.trial(h);
        self.accept(h)
    }
}

/// Integrates from `t = 0` to `t_end`, recording every accepted step.
pub fn integrate<R: OdeRhs + ?Sized>(
    rhs: &R,
    y0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    if !(t_end >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "t_end must be >= 0, got {t_end}"
        )));
    }
    let mut dp = DormandPrince::new(rhs, 0.0, y0, cfg)?;
    let mut times = vec![0.0];
    let mut states = vec![y0.to_vec()];
    while dp.t() < t_end {
        dp.step(t_end)?;
        times.push(dp.t());
        states.push(dp.y().to_vec());
    }
    Ok(Trajectory {
        times,
        states,
        stats: dp.stats(),
    })
}

/// Integrates from `t = 0` and records the state exactly at each sample time.
/// Steps are clipped to land on the samples.
pub fn integrate_sampled<R: OdeRhs + ?Sized>(
    rhs: &R,
    y0: &[f64],
    sample_times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    if sample_times.windows(2).any(|w| w[1] < w[0])
        || sample_times.first().is_some_and(|&t| t < 0.0)
    {
        return Err(Error::InvalidParameter(
            "sample times must be non-negative and non-decreasing".into(),
        ));
    }
    let mut dp = DormandPrince::new(rhs, 0.0, y0, cfg)?;
    let mut times = Vec::with_capacity(sample_times.len());
    let mut states = Vec::with_capacity(sample_times.len());
    for &ts in sample_times {
        while dp.t() < ts {
            dp.step(ts)?;
        }
        times.push(dp.t());
        states.push(dp.y().to_vec());
    }
    Ok(Trajectory {
        times,
        states,
        stats: dp.stats(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::FnRhs;

    fn decay() -> FnRhs<impl Fn(f64, &[f64], &mut [f64]) + Sync> {
        FnRhs::new(1, |_t, y: &[f64], dy: &mut [f64]| dy[0] = -y[0])
    }

    #[test]
    fn exponential_decay() {
        let cfg = IntegratorConfig {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            ..Default::default()
        };
        let tr = integrate(&decay(), &[1.0], 1.0, &cfg).unwrap();
        let (t, y) = tr.last();
        assert_eq!(t, 1.0);
        let exact = (-1.0f64).exp();
        assert!(((y[0] - exact) / exact).abs() < cfg.rel_tol);
    }

    #[test]
    fn fixed_step_convergence_order() {
        let run = |steps: usize| {
            let rhs = decay();
            let cfg = IntegratorConfig::default();
            let mut dp = DormandPrince::new(&rhs, 0.0, &[1.0], &cfg).unwrap();
            let h = 1.0 / steps as f64;
            for _ in 0..steps {
                dp.step_fixed(h).unwrap();
            }
            (dp.y()[0] - (-1.0f64).exp()).abs()
        };
        let coarse = run(4);
        let fine = run(8);
        // Fifth order: halving h should gain about 32x; require at least 4x.
        assert!(coarse / fine >= 4.0, "{coarse} / {fine}");
        assert!(coarse / fine > 20.0, "{coarse} / {fine}");
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        let err = |tol: f64| {
            let cfg = IntegratorConfig {
                rel_tol: tol,
                abs_tol: tol * 1e-3,
                ..Default::default()
            };
            let tr = integrate(&decay(), &[1.0], 1.0, &cfg).unwrap();
            (tr.last().1[0] - (-1.0f64).exp()).abs()
        };
        assert!(err(1e-9) < err(1e-6));
    }

    #[test]
    fn harmonic_oscillator_energy() {
        let rhs = FnRhs::new(2, |_t, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        });
        let cfg = IntegratorConfig {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: 1.0,
            ..Default::default()
        };
        let t_end = 100.0 * 2.0 * std::f64::consts::PI;
        let tr = integrate(&rhs, &[1.0, 0.0], t_end, &cfg).unwrap();
        let (_, y) = tr.last();
        let energy = 0.5 * (y[0] * y[0] + y[1] * y[1]);
        // Per-step error control: the drift grows linearly with the number of
        // periods (relative drift about 160 rel_tol after 100 periods).
        assert!(
            (energy - 0.5).abs() / 0.5 < 200.0 * cfg.rel_tol,
            "drift {}",
            energy - 0.5
        );
    }

    #[test]
    fn sampled_times_are_exact() {
        let times = [0.0, 0.25, 0.5, 2.0];
        let tr = integrate_sampled(&decay(), &[1.0], &times, &IntegratorConfig::precise()).unwrap();
        assert_eq!(tr.times, times);
        for (t, y) in tr.times.iter().zip(&tr.states) {
            assert!((y[0] - (-t).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_state_aborts() {
        let rhs = FnRhs::new(1, |_t, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0]);
        // Blows up at t = 1.
        let res = integrate(&rhs, &[1.0], 2.0, &IntegratorConfig::default());
        assert!(matches!(
            res,
            Err(Error::StepUnderflow { .. }) | Err(Error::NonFinite { .. })
        ));
        let res = integrate(&rhs, &[f64::NAN], 1.0, &IntegratorConfig::default());
        assert!(matches!(res, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn deterministic() {
        let rhs = FnRhs::new(2, |_t, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0] - 0.1 * y[1] * y[0].abs();
        });
        let a = integrate(&rhs, &[1.0, 0.3], 50.0, &IntegratorConfig::default()).unwrap();
        let b = integrate(&rhs, &[1.0, 0.3], 50.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(a.states, b.states);
    }
}
