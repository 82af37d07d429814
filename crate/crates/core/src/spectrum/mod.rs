//! Emission spectrum from the quantum-regression matrix.
//!
//! The field correlation `g(τ) = ⟨a†(τ) a(0)⟩` is the first component of
//! `v(τ) = e^{Aτ} v(0)`. Its one-sided Fourier transform gives
//! `S(ω) = 2 Re[(iω − A)⁻¹ v(0)]_0`, evaluated here by one dense solve per
//! frequency. A time-domain path serves as an independent check.

mod peaks;
mod regression;
mod resolvent;
mod time_domain;

pub use peaks::{dominant_peak, find_peaks, half_max_crossings, significant_peaks, width_at, Peak};
pub use regression::{assemble_regression, RegressionSystem};
pub use resolvent::{default_grid, evaluate_spectrum, spectral_weight, spectrum_values};
pub use time_domain::{time_domain_auto, time_domain_spectrum};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `max Re λ` for the decaying-correlation check.
pub const EIGENVALUE_TOLERANCE: f64 = 1e-8;

/// Frequency grid and refinement settings. Frequencies are in units of κ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumOptions {
    /// Base grid size.
    pub points: usize,
    /// Half-width of the base grid. `None` uses `1.5·max|Δ| + 10Γ`.
    pub half_span: Option<f64>,
    /// Relative midpoint error above which an interval is split.
    pub refine_tol: f64,
    /// Relative FWHM change at which refinement stops.
    pub fwhm_tol: f64,
    pub max_passes: usize,
    /// Hard cap on the refined grid size.
    pub max_points: usize,
    /// Minimum prominence, relative to `max S`, of a counted peak.
    pub prominence_frac: f64,
    /// A peak is dominant when its height is at least this many times the
    /// prominence of every other local maximum.
    pub dominance: f64,
    /// Seed grid points around the poles of the resolvent.
    pub pole_seeding: bool,
    /// Widen the grid when the dominant half-maximum falls outside it.
    pub max_extensions: usize,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            points: 2001,
            half_span: None,
            refine_tol: 1e-3,
            fwhm_tol: 0.01,
            max_passes: 40,
            max_points: 400_000,
            prominence_frac: 1e-3,
            dominance: 10.0,
            pole_seeding: true,
            max_extensions: 8,
        }
    }
}

impl SpectrumOptions {
    pub fn validate(&self) -> Result<()> {
        if self.points < 3 {
            return Err(Error::InvalidParameter(
                "spectrum points must be >= 3".into(),
            ));
        }
        if let Some(h) = self.half_span {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "half_span must be > 0, got {h}"
                )));
            }
        }
        if !(self.prominence_frac > 0.0 && self.prominence_frac < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "prominence_frac must lie in (0, 1), got {}",
                self.prominence_frac
            )));
        }
        for (name, v) in [
            ("refine_tol", self.refine_tol),
            ("fwhm_tol", self.fwhm_tol),
            ("dominance", self.dominance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        if self.max_points < self.points {
            return Err(Error::InvalidParameter(
                "max_points must be >= points".into(),
            ));
        }
        Ok(())
    }

    /// Base grid only, no refinement or extension.
    pub fn fixed(points: usize, half_span: f64) -> Self {
        Self {
            points,
            half_span: Some(half_span),
            max_passes: 0,
            pole_seeding: false,
            max_extensions: 0,
            ..Self::default()
        }
    }
}

/// Sampled spectrum and derived observables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    /// Angular frequencies in the frame rotating with the cavity.
    pub frequencies: Vec<f64>,
    pub values: Vec<f64>,
    /// Peaks with prominence above the configured fraction of `max S`.
    pub peaks: Vec<Peak>,
    pub fwhm: Option<f64>,
    pub lineshift: Option<f64>,
    /// `(1/2π) ∫ S dω` including the analytic-tail quadrature.
    pub weight: f64,
}

impl SpectrumResult {
    /// Builds the result from samples and fills in the derived fields.
    pub fn from_samples(
        frequencies: Vec<f64>,
        values: Vec<f64>,
        weight: f64,
        opts: &SpectrumOptions,
    ) -> Self {
        let peaks = significant_peaks(&frequencies, &values, opts.prominence_frac);
        let mut s = Self {
            frequencies,
            values,
            peaks,
            fwhm: None,
            lineshift: None,
            weight,
        };
        if let Ok(p) = dominant_peak(&find_peaks(&s.frequencies, &s.values), opts.dominance) {
            s.lineshift = Some(p.position);
            s.fwhm = width_at(&s.frequencies, &s.values, p.index).ok();
        }
        s
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Copy scaled so that `max S = 1`.
    pub fn normalized(&self) -> Self {
        let m = self.max_value();
        let mut s = self.clone();
        if m > 0.0 {
            s.values.iter_mut().for_each(|v| *v /= m);
            s.peaks.iter_mut().for_each(|p| {
                p.height /= m;
                p.prominence /= m;
            });
            s.weight /= m;
        }
        s
    }

    /// Two-column CSV with header `omega_over_kappa,S`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega_over_kappa,S\n");
        for (w, s) in self.frequencies.iter().zip(&self.values) {
            let _ = writeln!(out, "{w:.17e},{s:.17e}");
        }
        out
    }

    /// JSON summary without the sampled curve.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "fwhm": self.fwhm,
            "lineshift": self.lineshift,
            "weight": self.weight,
            "peak_count": self.peaks.len(),
            "peaks": self.peaks,
            "points": self.frequencies.len(),
        })
    }
}

/// Linewidth of the dominant peak.
pub fn fwhm(s: &SpectrumResult, dominance: f64) -> Result<f64> {
    let p = dominant_peak(&find_peaks(&s.frequencies, &s.values), dominance)?;
    width_at(&s.frequencies, &s.values, p.index)
}

/// Number of local maxima with prominence at least `prominence_frac · max S`.
pub fn count_peaks(s: &SpectrumResult, prominence_frac: f64) -> usize {
    significant_peaks(&s.frequencies, &s.values, prominence_frac).len()
}

/// Position of the dominant peak relative to the cavity resonance.
pub fn lineshift(s: &SpectrumResult, dominance: f64) -> Result<f64> {
    Ok(dominant_peak(&find_peaks(&s.frequencies, &s.values), dominance)?.position)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lorentz_result(centres: &[(f64, f64, f64)]) -> SpectrumResult {
        let x: Vec<f64> = (0..20001)
            .map(|k| -1.0 + 2.0 * k as f64 / 20000.0)
            .collect();
        let y = x
            .iter()
            .map(|&w| {
                centres
                    .iter()
                    .map(|&(c, hw, a)| a * hw * hw / ((w - c).powi(2) + hw * hw))
                    .sum()
            })
            .collect();
        SpectrumResult::from_samples(x, y, 0.0, &SpectrumOptions::default())
    }

    #[test]
    fn derived_fields() {
        let s = lorentz_result(&[(0.2, 0.01, 1.0)]);
        assert_eq!(count_peaks(&s, 1e-3), 1);
        assert!((s.fwhm.unwrap() - 0.02).abs() < 1e-4);
        assert!((s.lineshift.unwrap() - 0.2).abs() < 1e-4);
        assert_eq!(fwhm(&s, 10.0).unwrap(), s.fwhm.unwrap());
    }

    #[test]
    fn multimodal_has_no_width() {
        let s = lorentz_result(&[(-0.5, 0.01, 1.0), (0.5, 0.01, 0.5)]);
        assert_eq!(count_peaks(&s, 1e-3), 2);
        assert_eq!(s.fwhm, None);
        assert!(matches!(lineshift(&s, 10.0), Err(Error::Multimodal { .. })));
    }

    #[test]
    fn csv_layout() {
        let s = SpectrumResult::from_samples(
            vec![-1.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0],
            0.0,
            &SpectrumOptions::default(),
        );
        let csv = s.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "omega_over_kappa,S");
        assert_eq!(lines.len(), 4);
        assert_eq!(s.normalized().max_value(), 1.0);
    }

    #[test]
    fn options_validation() {
        assert!(SpectrumOptions::default().validate().is_ok());
        let bad = SpectrumOptions {
            prominence_frac: 1.5,
            ..SpectrumOptions::default()
        };
        assert!(bad.validate().is_err());
    }
}
