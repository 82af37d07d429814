use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate_point, EnsembleMode, Scenario};
use crate::error::{Error, Result};
use crate::spectrum::{count_peaks, fwhm, lineshift};

/// Sweepable parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Param {
    /// Total atom number.
    #[serde(rename = "N")]
    N,
    /// Pump rate.
    #[serde(rename = "R")]
    R,
    /// Coupling (`g` in uniform mode, `g0` in composite mode).
    #[serde(rename = "g")]
    G,
    /// Cavity dephasing.
    #[serde(rename = "xi")]
    Xi,
    /// Atomic dephasing.
    #[serde(rename = "nu")]
    Nu,
    /// Width of the detuning distribution.
    #[serde(rename = "sigma")]
    Sigma,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::N => "N",
            Param::R => "R",
            Param::G => "g",
            Param::Xi => "xi",
            Param::Nu => "nu",
            Param::Sigma => "sigma",
        }
    }

    /// Returns a copy of `s` with this parameter set to `v`.
    pub fn apply(self, s: &Scenario, v: f64) -> Result<Scenario> {
        if !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "{} value must be finite",
                self.name()
            )));
        }
        let mut out = s.clone();
        match self {
            Param::N => {
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "N must be a positive integer, got {v}"
                    )));
                }
                out.ensemble.total_atoms = v as u64;
            }
            Param::R => out.rates.pump = v,
            Param::G => match out.ensemble.mode {
                EnsembleMode::Composite => out.ensemble.g0 = v,
                _ => out.ensemble.g = v,
            },
            Param::Xi => out.rates.cav_dephasing = v,
            Param::Nu => out.rates.atom_dephasing = v,
            Param::Sigma => out.ensemble.sigma = v,
        }
        Ok(out)
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "N" | "n" => Ok(Param::N),
            "R" | "pump" => Ok(Param::R),
            "g" | "g0" => Ok(Param::G),
            "xi" => Ok(Param::Xi),
            "nu" => Ok(Param::Nu),
            "sigma" => Ok(Param::Sigma),
            other => Err(Error::Parse(format!("unknown sweep parameter `{other}`"))),
        }
    }
}

/// One named parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub param: Param,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(param: Param, values: Vec<f64>) -> Self {
        Self { param, values }
    }

    /// `n` log-spaced values from `lo` to `hi` inclusive.
    pub fn log(param: Param, lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo) || n < 2 {
            return Err(Error::InvalidParameter(
                "log axis needs 0 < lo < hi and at least 2 points".into(),
            ));
        }
        let (a, b) = (lo.ln(), hi.ln());
        let mut values: Vec<f64> = (0..n)
            .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
            .collect();
        values[0] = lo;
        values[n - 1] = hi;
        if param == Param::N {
            values.iter_mut().for_each(|v| *v = v.round());
        }
        Ok(Self { param, values })
    }
}

/// Observables of one grid point. Failed points keep their parameters and
/// carry the error message instead of observables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub params: BTreeMap<String, f64>,
    pub photon_number: Option<f64>,
    pub fwhm: Option<f64>,
    pub multimodal: bool,
    pub lineshift: Option<f64>,
    pub peak_count: Option<usize>,
    pub weight: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axes: Vec<Axis>,
    /// Row-major over the axes, last axis fastest.
    pub records: Vec<SweepRecord>,
    /// Atom number at the steepest linewidth drop, for atom-number sweeps.
    pub threshold_n: Option<f64>,
}

/// Hard cap on the number of grid points in one sweep.
pub const MAX_SWEEP_POINTS: usize = 100_000;

fn grid_points(axes: &[Axis]) -> Vec<Vec<f64>> {
    let mut points = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(points.len() * axis.values.len());
        for p in &points {
            for &v in &axis.values {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        points = next;
    }
    points
}

fn evaluate_record(s: &Scenario, params: BTreeMap<String, f64>) -> SweepRecord {
    let mut rec = SweepRecord {
        params,
        photon_number: None,
        fwhm: None,
        multimodal: false,
        lineshift: None,
        peak_count: None,
        weight: None,
        converged: false,
        error: None,
    };
    let outcome = s
        .ensemble
        .build()
        .and_then(|e| evaluate_point(&e, &s.rates, &s.solver, &s.spectrum));
    match outcome {
        Ok(o) => {
            let sp = &o.spectrum;
            rec.converged = o.steady.report.converged;
            rec.photon_number = Some(o.steady.state.photon_number);
            rec.peak_count = Some(count_peaks(sp, s.spectrum.prominence_frac));
            rec.weight = Some(sp.weight);
            match fwhm(sp, s.spectrum.dominance) {
                Ok(w) => rec.fwhm = Some(w),
                Err(Error::Multimodal { .. }) => rec.multimodal = true,
                Err(e) => rec.error = Some(e.to_string()),
            }
            rec.lineshift = lineshift(sp, s.spectrum.dominance).ok();
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

/// Evaluates every point of the Cartesian product of `axes`.
///
/// All points are built and validated before any computation; a bad value
/// anywhere rejects the whole sweep. Per-point numerical failures are recorded
/// and do not stop the sweep. Results are ordered by grid index regardless of
/// scheduling.
pub fn sweep(base: &Scenario, axes: &[Axis]) -> Result<SweepResult> {
    base.validate()?;
    let mut seen = Vec::new();
    for a in axes {
        if a.values.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "axis {} is empty",
                a.param.name()
            )));
        }
        if seen.contains(&a.param) {
            return Err(Error::InvalidParameter(format!(
                "axis {} listed twice",
                a.param.name()
            )));
        }
        seen.push(a.param);
    }
    let total: usize = axes.iter().map(|a| a.values.len()).product();
    if total > MAX_SWEEP_POINTS {
        return Err(Error::InvalidParameter(format!(
            "sweep has {total} points (limit {MAX_SWEEP_POINTS})"
        )));
    }
    let mut jobs = Vec::with_capacity(total);
    for point in grid_points(axes) {
        let mut s = base.clone();
        let mut params = BTreeMap::new();
        for (axis, &v) in axes.iter().zip(&point) {
            s = axis.param.apply(&s, v)?;
            params.insert(axis.param.name().to_string(), v);
        }
        s.validate()?;
        jobs.push((s, params));
    }
    let records = jobs
        .into_par_iter()
        .map(|(s, params)| evaluate_record(&s, params))
        .collect();
    Ok(SweepResult {
        axes: axes.to_vec(),
        records,
        threshold_n: None,
    })
}

impl SweepResult {
    /// Long-format CSV: axis columns, then observables.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = self
            .axes
            .iter()
            .map(|a| a.param.name().to_string())
            .collect();
        header.extend(
            [
                "photon_number",
                "fwhm",
                "multimodal",
                "lineshift",
                "peak_count",
                "weight",
                "converged",
                "error",
            ]
            .iter()
            .map(|s| s.to_string()),
        );
        w.write_record(&header).map_err(csv_err)?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
        for r in &self.records {
            let mut row: Vec<String> = self
                .axes
                .iter()
                .map(|a| format!("{:.17e}", r.params[a.param.name()]))
                .collect();
            row.push(opt(r.photon_number));
            row.push(opt(r.fwhm));
            row.push(r.multimodal.to_string());
            row.push(opt(r.lineshift));
            row.push(r.peak_count.map(|c| c.to_string()).unwrap_or_default());
            row.push(opt(r.weight));
            row.push(r.converged.to_string());
            row.push(r.error.clone().unwrap_or_default());
            w.write_record(&row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    /// Plain-text table for terminals.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            for (k, v) in &r.params {
                let _ = write!(out, "{k}={v:<12.4e} ");
            }
            let _ = writeln!(
                out,
                "n={:<12.4e} fwhm={:<12} peaks={}",
                r.photon_number.unwrap_or(f64::NAN),
                r.fwhm
                    .map(|w| format!("{w:.4e}"))
                    .unwrap_or_else(|| if r.multimodal {
                        "multimodal".into()
                    } else {
                        "-".into()
                    }),
                r.peak_count
                    .map(|c| c.to_string())
                    .unwrap_or_else(|| "-".into())
            );
        }
        out
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Coupling model for [`linewidth_vs_n`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum CouplingSpec {
    Uniform {
        g: f64,
    },
    /// `K` coupling clusters `g0·cos(πk/2K)` per frequency cluster.
    Clusters {
        k: usize,
        g0: f64,
    },
}

/// Linewidth and photon number versus total atom number at fixed pump and
/// dephasing. The threshold is the grid value at which the FWHM falls the
/// most relative to the previous point while the photon number rises.
pub fn linewidth_vs_n(
    base: &Scenario,
    sigma: f64,
    n_grid: &[f64],
    coupling: CouplingSpec,
    dephasing: (f64, f64),
    pump: f64,
) -> Result<SweepResult> {
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("N grid must be increasing".into()));
    }
    let mut s = base.clone();
    s.ensemble.sigma = sigma;
    s.rates.pump = pump;
    s.rates.cav_dephasing = dephasing.0;
    s.rates.atom_dephasing = dephasing.1;
    match coupling {
        CouplingSpec::Uniform { g } => {
            s.ensemble.mode = EnsembleMode::Gaussian;
            s.ensemble.g = g;
        }
        CouplingSpec::Clusters { k, g0 } => {
            s.ensemble.mode = EnsembleMode::Composite;
            s.ensemble.coupling_clusters = k;
            s.ensemble.g0 = g0;
        }
    }
    let mut result = sweep(&s, &[Axis::new(Param::N, n_grid.to_vec())])?;
    result.threshold_n = threshold(&result.records);
    Ok(result)
}

fn threshold(records: &[SweepRecord]) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for w in records.windows(2) {
        let (Some(f0), Some(f1)) = (w[0].fwhm, w[1].fwhm) else {
            continue;
        };
        let (Some(n0), Some(n1)) = (w[0].photon_number, w[1].photon_number) else {
            continue;
        };
        if n1 <= n0 || f1 >= f0 {
            continue;
        }
        let ratio = f1 / f0;
        if best.is_none_or(|(r, _)| ratio < r) {
            best = Some((ratio, w[1].params["N"]));
        }
    }
    best.map(|(_, n)| n)
}
