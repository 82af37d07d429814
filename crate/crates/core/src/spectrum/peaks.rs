//! Local maxima, topographic prominence and half-maximum widths on sampled
//! curves with non-uniform abscissae.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub position: f64,
    pub height: f64,
    pub prominence: f64,
    /// Grid index of the maximum.
    #[serde(skip)]
    pub index: usize,
}

/// All strict local maxima with their prominences. Flat tops are reported at
/// the middle sample of the plateau.
pub fn find_peaks(x: &[f64], y: &[f64]) -> Vec<Peak> {
    let n = y.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if y[i] > y[i - 1] {
            let mut ahead = i + 1;
            while ahead + 1 < n && y[ahead] == y[i] {
                ahead += 1;
            }
            if y[ahead] < y[i] {
                let left_edge = i;
                let right_edge = ahead - 1;
                let mid = (left_edge + right_edge) / 2;
                peaks.push(Peak {
                    position: x[mid],
                    height: y[mid],
                    prominence: prominence(y, left_edge, right_edge),
                    index: mid,
                });
                i = ahead;
                continue;
            }
        }
        i += 1;
    }
    peaks
}

fn prominence(y: &[f64], left_edge: usize, right_edge: usize) -> f64 {
    let h = y[left_edge];
    let mut left_min = h;
    let mut k = left_edge;
    while k > 0 {
        k -= 1;
        if y[k] > h {
            break;
        }
        left_min = left_min.min(y[k]);
    }
    let mut right_min = h;
    let mut k = right_edge;
    while k + 1 < y.len() {
        k += 1;
        if y[k] > h {
            break;
        }
        right_min = right_min.min(y[k]);
    }
    h - left_min.max(right_min)
}

/// Peaks whose prominence is at least `prominence_frac · max(y)`.
pub fn significant_peaks(x: &[f64], y: &[f64], prominence_frac: f64) -> Vec<Peak> {
    let ymax = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    find_peaks(x, y)
        .into_iter()
        .filter(|p| p.prominence >= prominence_frac * ymax)
        .collect()
}

/// Highest peak if its height is at least `dominance` times the prominence of
/// every other local maximum.
pub fn dominant_peak(peaks: &[Peak], dominance: f64) -> Result<Peak> {
    let best = peaks
        .iter()
        .copied()
        .max_by(|a, b| a.height.total_cmp(&b.height))
        .ok_or(Error::NoPeak)?;
    let rivals = peaks
        .iter()
        .filter(|p| p.index != best.index && best.height < dominance * p.prominence)
        .count();
    if rivals > 0 {
        return Err(Error::Multimodal { peaks: rivals + 1 });
    }
    Ok(best)
}

/// Half-maximum crossings around the sample `index`, by linear interpolation
/// between the bracketing samples.
pub fn half_max_crossings(x: &[f64], y: &[f64], index: usize) -> Result<(f64, f64)> {
    let half = 0.5 * y[index];
    let mut l = index;
    while l > 0 && y[l] > half {
        l -= 1;
    }
    if y[l] > half {
        return Err(Error::UnresolvedWidth);
    }
    let mut r = index;
    while r + 1 < y.len() && y[r] > half {
        r += 1;
    }
    if y[r] > half {
        return Err(Error::UnresolvedWidth);
    }
    let cross = |a: usize, b: usize| x[a] + (half - y[a]) * (x[b] - x[a]) / (y[b] - y[a]);
    Ok((cross(l, l + 1), cross(r - 1, r)))
}

/// Full width at half maximum of the peak at `index`.
pub fn width_at(x: &[f64], y: &[f64], index: usize) -> Result<f64> {
    let (lo, hi) = half_max_crossings(x, y, index)?;
    Ok(hi - lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lorentzian(x: f64, x0: f64, hwhm: f64) -> f64 {
        hwhm * hwhm / ((x - x0).powi(2) + hwhm * hwhm)
    }

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn lorentzian_width() {
        let gamma = 0.02;
        let x = grid(-1.0, 1.0, 200_001);
        let y: Vec<f64> = x.iter().map(|&v| lorentzian(v, 0.1, gamma / 2.0)).collect();
        let peaks = find_peaks(&x, &y);
        assert_eq!(peaks.len(), 1);
        let w = width_at(&x, &y, peaks[0].index).unwrap();
        assert!((w - gamma).abs() / gamma < 0.005);
        assert!((peaks[0].position - 0.1).abs() < 1e-5);
    }

    #[test]
    fn two_separated_lorentzians() {
        let x = grid(-2.0, 2.0, 4001);
        let y: Vec<f64> = x
            .iter()
            .map(|&v| lorentzian(v, -0.5, 0.01) + 0.3 * lorentzian(v, 0.5, 0.02))
            .collect();
        assert_eq!(significant_peaks(&x, &y, 1e-3).len(), 2);
        assert!(matches!(
            dominant_peak(&find_peaks(&x, &y), 10.0),
            Err(Error::Multimodal { .. })
        ));
    }

    #[test]
    fn plateau_and_prominence() {
        let x: Vec<f64> = (0..9).map(|k| k as f64).collect();
        let y = [0.0, 1.0, 3.0, 3.0, 3.0, 1.0, 2.0, 0.5, 0.0];
        let peaks = find_peaks(&x, &y);
        assert_eq!(peaks.len(), 2);
        assert_eq!(peaks[0].index, 3);
        assert_eq!(peaks[0].prominence, 3.0);
        assert_eq!(peaks[1].index, 6);
        assert_eq!(peaks[1].prominence, 1.0);
    }

    #[test]
    fn width_outside_grid() {
        let x = grid(-0.1, 0.1, 101);
        let y: Vec<f64> = x.iter().map(|&v| lorentzian(v, 0.0, 1.0)).collect();
        assert_eq!(width_at(&x, &y, 50), Err(Error::UnresolvedWidth));
    }
}
