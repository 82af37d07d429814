use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate_point, Scenario};
use crate::error::{Error, Result};
use crate::spectrum::count_peaks;

/// How the critical pump was located.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalSearch {
    /// The spectrum is unimodal already at `R_min`.
    BelowRange,
    Bisection,
    /// The pre-scan found non-monotone merging; a uniform scan was used.
    LinearScan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPump {
    pub critical_pump: f64,
    pub method: CriticalSearch,
    /// Every `(R, peak count)` evaluated, in ascending `R`.
    pub evaluations: Vec<(f64, usize)>,
}

impl CriticalPump {
    pub fn below_range(&self) -> bool {
        self.method == CriticalSearch::BelowRange
    }
}

const PRESCAN_POINTS: usize = 8;

/// Smallest pump at which the spectrum has a single significant peak.
///
/// A log-spaced pre-scan over `[r_min, r_max]` brackets the transition. If the
/// unimodal points form an upper set, the bracket is bisected in `R` until its
/// width is at most `tol_r` and the midpoint is returned. Otherwise the range
/// up to the first unimodal pre-scan point is scanned with step `tol_r`.
pub fn critical_pump(
    template: &Scenario,
    r_min: f64,
    r_max: f64,
    tol_r: f64,
) -> Result<CriticalPump> {
    if !(r_min > 0.0 && r_max > r_min && r_max.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < R_min < R_max, got [{r_min}, {r_max}]"
        )));
    }
    if !(tol_r > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tol_R must be > 0, got {tol_r}"
        )));
    }
    template.validate()?;
    let e = template.ensemble.build()?;
    let peaks_at = |r: f64| -> Result<usize> {
        let mut rates = template.rates;
        rates.pump = r;
        let o = evaluate_point(&e, &rates, &template.solver, &template.spectrum)?;
        Ok(count_peaks(&o.spectrum, template.spectrum.prominence_frac))
    };

    let (a, b) = (r_min.ln(), r_max.ln());
    let mut grid: Vec<f64> = (0..PRESCAN_POINTS)
        .map(|k| (a + (b - a) * k as f64 / (PRESCAN_POINTS - 1) as f64).exp())
        .collect();
    grid[0] = r_min;
    grid[PRESCAN_POINTS - 1] = r_max;
    let counts: Vec<usize> = grid
        .par_iter()
        .map(|&r| peaks_at(r))
        .collect::<Result<_>>()?;
    let mut evaluations: Vec<(f64, usize)> =
        grid.iter().cloned().zip(counts.iter().cloned()).collect();

    if counts[0] <= 1 {
        return Ok(CriticalPump {
            critical_pump: r_min,
            method: CriticalSearch::BelowRange,
            evaluations,
        });
    }
    if counts[PRESCAN_POINTS - 1] > 1 {
        return Err(Error::AboveRange { r_max });
    }
    let first_uni = counts
        .iter()
        .position(|&c| c == 1)
        .expect("last point is unimodal");
    let monotone = counts[first_uni..].iter().all(|&c| c == 1);

    if monotone {
        let (mut lo, mut hi) = (grid[first_uni - 1], grid[first_uni]);
        while hi - lo > tol_r {
            let mid = 0.5 * (lo + hi);
            let c = peaks_at(mid)?;
            evaluations.push((mid, c));
            if c == 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        evaluations.sort_by(|x, y| x.0.total_cmp(&y.0));
        return Ok(CriticalPump {
            critical_pump: 0.5 * (lo + hi),
            method: CriticalSearch::Bisection,
            evaluations,
        });
    }

    let hi = grid[first_uni];
    let steps = ((hi - r_min) / tol_r).ceil() as usize;
    let scan: Vec<f64> = (0..=steps)
        .map(|k| (r_min + k as f64 * tol_r).min(hi))
        .collect();
    let scan_counts: Vec<usize> = scan
        .par_iter()
        .map(|&r| peaks_at(r))
        .collect::<Result<_>>()?;
    let k = scan_counts
        .iter()
        .position(|&c| c == 1)
        .unwrap_or(scan.len() - 1);
    evaluations.extend(scan.iter().cloned().zip(scan_counts));
    evaluations.sort_by(|x, y| x.0.total_cmp(&y.0));
    let critical = if k == 0 {
        scan[0]
    } else {
        0.5 * (scan[k - 1] + scan[k])
    };
    Ok(CriticalPump {
        critical_pump: critical,
        method: CriticalSearch::LinearScan,
        evaluations,
    })
}
