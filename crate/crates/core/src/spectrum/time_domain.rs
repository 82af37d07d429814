use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use super::{RegressionSystem, SpectrumOptions, SpectrumResult};
use crate::error::{Error, Result};

/// Spectrum from the sampled correlation `v_0(τ)` on `τ_k = k·t_max/(n−1)`.
///
/// The samples come from repeated application of the exact one-step
/// propagator `exp(A Δτ)`; the transform is the trapezoid sum
/// `2 Re Σ' e^{−iωτ_k} v_0(τ_k) Δτ` evaluated directly at each `ω`.
/// The residual `|v(t_max)| / |v(0)|` is logged when it exceeds `1e-3`.
pub fn time_domain_spectrum(
    sys: &RegressionSystem,
    omegas: &[f64],
    t_max: f64,
    n_samples: usize,
) -> Result<SpectrumResult> {
    if !(t_max > 0.0 && t_max.is_finite()) || n_samples < 2 {
        return Err(Error::InvalidParameter(format!(
            "time-domain transform needs t_max > 0 and at least 2 samples (got {t_max}, {n_samples})"
        )));
    }
    let n = sys.dim();
    let dt = t_max / (n_samples - 1) as f64;
    let a = DMatrix::from_fn(n, n, |r, c| sys.matrix[(r, c)]);
    let prop = (a * Complex64::new(dt, 0.0)).exp();
    let mut v = DVector::from_column_slice(&sys.initial_vector);
    let v0_norm = v.norm();
    let mut g = Vec::with_capacity(n_samples);
    g.push(v[0]);
    for _ in 1..n_samples {
        v = &prop * v;
        g.push(v[0]);
    }
    if v0_norm > 0.0 {
        let tail = v.norm() / v0_norm;
        if tail > 1e-3 {
            log::warn!(
                "time-domain spectrum: correlation retains {tail:.2e} of its initial norm at t_max = {t_max:.3e}"
            );
        }
    }
    let values: Vec<f64> = omegas
        .par_iter()
        .map(|&w| {
            let rot = Complex64::from_polar(1.0, -w * dt);
            let mut phase = Complex64::new(1.0, 0.0);
            let mut acc = Complex64::default();
            for (k, gk) in g.iter().enumerate() {
                let wk = if k == 0 || k + 1 == g.len() { 0.5 } else { 1.0 };
                acc += wk * phase * gk;
                phase *= rot;
                if k % 256 == 255 {
                    phase = Complex64::from_polar(1.0, -w * dt * (k + 1) as f64);
                }
            }
            2.0 * (acc * dt).re
        })
        .collect();
    let weight = g[0].re;
    Ok(SpectrumResult::from_samples(
        omegas.to_vec(),
        values,
        weight,
        &SpectrumOptions::default(),
    ))
}

/// Time-domain spectrum with `t_max` covering 25 e-folds of the slowest decay
/// and a step resolving both the fastest eigenfrequency and `max |ω|`.
pub fn time_domain_auto(sys: &RegressionSystem, omegas: &[f64]) -> Result<SpectrumResult> {
    let eigs = sys.eigenvalues();
    let slowest = eigs
        .iter()
        .map(|l| l.re.abs())
        .fold(f64::INFINITY, f64::min);
    if !(slowest > 0.0) {
        return Err(Error::InvalidParameter(
            "regression matrix has an undamped mode".into(),
        ));
    }
    let fastest = eigs.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let wmax = omegas.iter().map(|w| w.abs()).fold(0.0, f64::max);
    let t_max = 25.0 / slowest;
    let dt = 0.1 / (fastest + wmax).max(1e-12);
    let n = ((t_max / dt).ceil() as usize + 1).clamp(2, 50_000_000);
    time_domain_spectrum(sys, omegas, t_max, n)
}
