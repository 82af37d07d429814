use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{
    dominant_peak, find_peaks, half_max_crossings, RegressionSystem, SpectrumOptions,
    SpectrumResult,
};
use crate::error::{Error, Result};
use crate::solver::{Lu, Matrix};

/// Evenly spaced grid over `±(1.5·max|Δ| + 10Γ)` unless `half_span` is set.
pub fn default_grid(opts: &SpectrumOptions, max_abs_detuning: f64, gamma: f64) -> Vec<f64> {
    let half = opts
        .half_span
        .unwrap_or(1.5 * max_abs_detuning + 10.0 * gamma);
    linspace(-half, half, opts.points)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    let mut v: Vec<f64> = (0..n).map(|k| lo + step * k as f64).collect();
    v[n - 1] = hi;
    v
}

fn resolvent_at(sys: &RegressionSystem, omega: f64) -> Result<f64> {
    let n = sys.dim();
    let mut m = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = -sys.matrix[(i, j)];
        }
        m[(i, i)] += Complex64::new(0.0, omega);
    }
    let lu = Lu::factor(m).map_err(|_| Error::SingularResolvent { omega })?;
    let x = lu
        .solve(&sys.initial_vector)
        .map_err(|_| Error::SingularResolvent { omega })?;
    let s = 2.0 * x[0].re;
    if !s.is_finite() {
        return Err(Error::SingularResolvent { omega });
    }
    Ok(s)
}

/// `S(ω)` at each frequency, one dense solve per point. Runs in parallel with
/// results in input order.
pub fn spectrum_values(sys: &RegressionSystem, omegas: &[f64]) -> Result<Vec<f64>> {
    if sys
        .initial_vector
        .iter()
        .all(|v| *v == Complex64::default())
    {
        return Ok(vec![0.0; omegas.len()]);
    }
    omegas.par_iter().map(|&w| resolvent_at(sys, w)).collect()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// `∫_{edge}^{±∞} S dω` through `ω = edge ± L t/(1−t)`, on panels that
/// cluster towards both ends of `t ∈ [0, 1)`.
fn tail_integral(sys: &RegressionSystem, edge: f64, dir: f64, scale: f64) -> Result<f64> {
    const BREAKS: [f64; 12] = [
        0.0, 1e-5, 1e-4, 1e-3, 1e-2, 0.05, 0.2, 0.5, 0.8, 0.95, 0.99, 1.0,
    ];
    let gl = gauss_legendre(16);
    let mut omegas = Vec::new();
    let mut weights = Vec::new();
    for w in BREAKS.windows(2) {
        let (a, b) = (w[0], w[1]);
        for &(x, wt) in &gl {
            let t = 0.5 * (a + b) + 0.5 * (b - a) * x;
            let jac = scale / (1.0 - t).powi(2);
            omegas.push(edge + dir * scale * t / (1.0 - t));
            weights.push(0.5 * (b - a) * wt * jac);
        }
    }
    let vals = spectrum_values(sys, &omegas)?;
    Ok(vals.iter().zip(&weights).map(|(v, w)| v * w).sum())
}

/// `(1/2π) ∫ S dω`: trapezoid over the samples plus quadrature of both tails.
pub fn spectral_weight(sys: &RegressionSystem, omegas: &[f64], values: &[f64]) -> Result<f64> {
    let mut inner = 0.0;
    for k in 1..omegas.len() {
        inner += 0.5 * (values[k] + values[k - 1]) * (omegas[k] - omegas[k - 1]);
    }
    let lo = omegas[0];
    let hi = omegas[omegas.len() - 1];
    let scale = (hi - lo).max(sys.matrix[(0, 0)].re.abs());
    let tails = tail_integral(sys, lo, -1.0, scale)? + tail_integral(sys, hi, 1.0, scale)?;
    Ok((inner + tails) / (2.0 * PI))
}

/// Sorted, deduplicated merge of `extra` into `grid`, keeping only points in
/// `[lo, hi]`.
fn merge_points(grid: &[f64], extra: &mut Vec<f64>) -> Vec<f64> {
    let lo = grid[0];
    let hi = grid[grid.len() - 1];
    extra.retain(|w| *w > lo && *w < hi && w.is_finite());
    let mut all: Vec<f64> = grid.iter().cloned().chain(extra.drain(..)).collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1e-300));
    all
}

/// Points at and around every resolvent pole whose frequency lies on the grid.
fn pole_points(eigs: &[Complex64], spacing: f64) -> Vec<f64> {
    const OFFSETS: [f64; 11] = [0.0, 0.25, -0.25, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 4.0, -4.0];
    let mut pts = Vec::new();
    for l in eigs {
        let half_width = l.re.abs();
        if half_width < 10.0 * spacing {
            pts.extend(OFFSETS.iter().map(|o| l.im + o * half_width));
        }
    }
    pts
}

fn strictly_increasing(grid: &[f64]) -> bool {
    grid.windows(2).all(|w| w[0] < w[1]) && grid.iter().all(|w| w.is_finite())
}

/// Midpoint refinement: splits intervals whose midpoint deviates from the
/// linear interpolant by more than `tol · max(|S_mid|, 1e-6 · max S)`.
fn refine(
    sys: &RegressionSystem,
    xs: &mut Vec<f64>,
    ys: &mut Vec<f64>,
    mut candidates: Vec<usize>,
    opts: &SpectrumOptions,
) -> Result<()> {
    let mut passes = 0;
    while !candidates.is_empty() && passes < opts.max_passes && xs.len() < opts.max_points {
        passes += 1;
        let budget = opts.max_points - xs.len();
        candidates.truncate(budget);
        let mids: Vec<f64> = candidates
            .iter()
            .map(|&i| 0.5 * (xs[i] + xs[i + 1]))
            .collect();
        let vals = spectrum_values(sys, &mids)?;
        let floor = 1e-6 * ys.iter().cloned().fold(0.0, f64::max);
        let mut split = vec![None; xs.len()];
        for (k, &i) in candidates.iter().enumerate() {
            if mids[k] <= xs[i] || mids[k] >= xs[i + 1] {
                continue;
            }
            let interp = 0.5 * (ys[i] + ys[i + 1]);
            let err = (vals[k] - interp).abs();
            split[i] = Some((
                mids[k],
                vals[k],
                err > opts.refine_tol * vals[k].abs().max(floor),
            ));
        }
        let mut nx = Vec::with_capacity(xs.len() + candidates.len());
        let mut ny = Vec::with_capacity(xs.len() + candidates.len());
        let mut next = Vec::new();
        for i in 0..xs.len() {
            nx.push(xs[i]);
            ny.push(ys[i]);
            if let Some((x, y, bad)) = split[i] {
                if bad {
                    next.push(nx.len() - 1);
                    next.push(nx.len());
                }
                nx.push(x);
                ny.push(y);
            }
        }
        *xs = nx;
        *ys = ny;
        candidates = next;
    }
    Ok(())
}

fn dominant_width(xs: &[f64], ys: &[f64], opts: &SpectrumOptions) -> Option<(f64, f64)> {
    let p = dominant_peak(&find_peaks(xs, ys), opts.dominance).ok()?;
    half_max_crossings(xs, ys, p.index).ok()
}

/// Extends the grid on both sides by its current half-width.
fn extend(
    sys: &RegressionSystem,
    xs: &mut Vec<f64>,
    ys: &mut Vec<f64>,
    points: usize,
) -> Result<()> {
    let lo = xs[0];
    let hi = xs[xs.len() - 1];
    let width = hi - lo;
    let n_side = points / 2 + 1;
    let left: Vec<f64> = linspace(lo - width / 2.0, lo, n_side)[..n_side - 1].to_vec();
    let right: Vec<f64> = linspace(hi, hi + width / 2.0, n_side)[1..].to_vec();
    let yl = spectrum_values(sys, &left)?;
    let yr = spectrum_values(sys, &right)?;
    let mut nx = left;
    nx.extend_from_slice(xs);
    nx.extend(right);
    let mut ny = yl;
    ny.extend_from_slice(ys);
    ny.extend(yr);
    *xs = nx;
    *ys = ny;
    Ok(())
}

/// Emission spectrum on `grid`, adaptively refined around narrow features.
///
/// The grid is seeded with points around each resolvent pole, refined until
/// the piecewise-linear interpolant meets `refine_tol`, widened when the
/// dominant line's half-maximum falls outside it, and further bisected around
/// the dominant line until its FWHM changes by less than `fwhm_tol`.
pub fn evaluate_spectrum(
    sys: &RegressionSystem,
    grid: &[f64],
    opts: &SpectrumOptions,
) -> Result<SpectrumResult> {
    opts.validate()?;
    if grid.is_empty() || !strictly_increasing(grid) {
        return Err(Error::InvalidParameter(
            "frequency grid must be nonempty and strictly increasing".into(),
        ));
    }
    let eigs = sys.eigenvalues();
    let max_re = eigs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    if max_re > super::EIGENVALUE_TOLERANCE {
        log::warn!("regression matrix has a growing mode: max Re λ = {max_re:.3e}");
    }
    let mut xs = grid.to_vec();
    if opts.pole_seeding && xs.len() > 1 {
        let spacing = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
        xs = merge_points(&xs, &mut pole_points(&eigs, spacing));
    }
    let mut ys = spectrum_values(sys, &xs)?;
    if xs.len() < 2 || opts.max_passes == 0 {
        let weight = spectral_weight(sys, &xs, &ys)?;
        return Ok(SpectrumResult::from_samples(xs, ys, weight, opts));
    }

    let mut extensions = 0;
    loop {
        let all: Vec<usize> = (0..xs.len() - 1).collect();
        refine(sys, &mut xs, &mut ys, all, opts)?;
        let peak_at_edge = {
            let imax = ys
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            imax == 0 || imax == ys.len() - 1
        };
        let unresolved = match dominant_peak(&find_peaks(&xs, &ys), opts.dominance) {
            Ok(p) => half_max_crossings(&xs, &ys, p.index).is_err(),
            Err(_) => false,
        };
        if (peak_at_edge || unresolved) && extensions < opts.max_extensions {
            extensions += 1;
            extend(sys, &mut xs, &mut ys, opts.points)?;
            continue;
        }
        break;
    }

    let mut previous = dominant_width(&xs, &ys, opts);
    let mut passes = 0;
    while let Some((lo, hi)) = previous {
        if passes >= opts.max_passes || xs.len() >= opts.max_points {
            break;
        }
        passes += 1;
        let w = hi - lo;
        let inside: Vec<usize> = (0..xs.len() - 1)
            .filter(|&i| xs[i + 1] >= lo - w && xs[i] <= hi + w)
            .collect();
        let mids: Vec<f64> = inside.iter().map(|&i| 0.5 * (xs[i] + xs[i + 1])).collect();
        let vals = spectrum_values(sys, &mids)?;
        let mut pairs: Vec<(f64, f64)> = xs.iter().cloned().zip(ys.iter().cloned()).collect();
        pairs.extend(mids.into_iter().zip(vals));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.dedup_by(|a, b| a.0 == b.0);
        xs = pairs.iter().map(|p| p.0).collect();
        ys = pairs.iter().map(|p| p.1).collect();
        let current = dominant_width(&xs, &ys, opts);
        match current {
            Some((l2, h2)) => {
                let change = ((h2 - l2) - w).abs() / w;
                previous = current;
                if change < opts.fwhm_tol {
                    break;
                }
            }
            None => break,
        }
    }

    let weight = spectral_weight(sys, &xs, &ys)?;
    Ok(SpectrumResult::from_samples(xs, ys, weight, opts))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay_system(gamma: f64, dim: usize) -> RegressionSystem {
        let mut a = Matrix::zeros(dim);
        for k in 0..dim {
            a[(k, k)] = Complex64::new(-gamma, 0.0);
        }
        let mut v = vec![Complex64::default(); dim];
        v[0] = Complex64::new(1.0, 0.0);
        RegressionSystem {
            matrix: a,
            initial_vector: v,
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let gl = gauss_legendre(16);
        let s: f64 = gl.iter().map(|(x, w)| w * x.powi(30)).sum();
        assert!((s - 2.0 / 31.0).abs() < 1e-13);
        let total: f64 = gl.iter().map(|(_, w)| w).sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn pure_decay_lorentzian() {
        let gamma = 0.01;
        let sys = decay_system(gamma, 3);
        let grid = linspace(-0.1, 0.1, 201);
        let s = evaluate_spectrum(&sys, &grid, &SpectrumOptions::default()).unwrap();
        let fwhm = s.fwhm.unwrap();
        assert!((fwhm - 2.0 * gamma).abs() / (2.0 * gamma) < 1e-3, "{fwhm}");
        assert!(s.lineshift.unwrap().abs() < 1e-6);
        assert!((s.weight - 1.0).abs() < 1e-4, "{}", s.weight);
        for (w, v) in s.frequencies.iter().zip(&s.values) {
            let exact = 2.0 * gamma / (w * w + gamma * gamma);
            assert!((v - exact).abs() <= 1e-12 * exact);
        }
    }

    #[test]
    fn zero_initial_vector() {
        let mut sys = decay_system(0.1, 2);
        sys.initial_vector[0] = Complex64::default();
        let s =
            evaluate_spectrum(&sys, &linspace(-1.0, 1.0, 11), &SpectrumOptions::default()).unwrap();
        assert!(s.values.iter().all(|v| *v == 0.0));
        assert_eq!(s.weight, 0.0);
        assert!(s.peaks.is_empty());
    }

    #[test]
    fn undamped_mode_is_singular() {
        let sys = decay_system(0.0, 2);
        let err = spectrum_values(&sys, &[0.5, 0.0]).unwrap_err();
        assert_eq!(err, Error::SingularResolvent { omega: 0.0 });
    }

    #[test]
    fn grid_extends_for_wide_line() {
        let sys = decay_system(0.5, 2);
        let s = evaluate_spectrum(&sys, &linspace(-0.1, 0.1, 101), &SpectrumOptions::default())
            .unwrap();
        assert!((s.fwhm.unwrap() - 1.0).abs() < 1e-2);
    }

    #[test]
    fn rejects_bad_grid() {
        let sys = decay_system(0.1, 2);
        assert!(evaluate_spectrum(&sys, &[0.0, 0.0], &SpectrumOptions::default()).is_err());
        assert!(evaluate_spectrum(&sys, &[], &SpectrumOptions::default()).is_err());
    }
}
