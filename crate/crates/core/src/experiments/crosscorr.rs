use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{ClusterEnsemble, SystemRates};
use crate::error::{Error, Result};
use crate::moments::steady_moments;
use crate::solver::IntegratorConfig;

/// Steady-state inter-cluster coherences `⟨σ⁺_m σ⁻_j⟩` along a pump grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCorrelationScan {
    pub pumps: Vec<f64>,
    pub clusters: usize,
    /// Indices of the traced pair: the first and the central cluster.
    pub pair: (usize, usize),
    /// Row-major `M×M` matrices; the diagonal holds the coherence between two
    /// distinct atoms of the same cluster. `None` where the steady state failed.
    pub matrices: Vec<Option<Vec<Complex64>>>,
    pub errors: Vec<Option<String>>,
}

impl CrossCorrelationScan {
    pub fn entry(&self, point: usize, m: usize, j: usize) -> Option<Complex64> {
        self.matrices[point]
            .as_ref()
            .map(|mat| mat[m * self.clusters + j])
    }

    /// `|⟨σ⁺_first σ⁻_centre⟩|` at every pump value.
    pub fn pair_trace(&self) -> Vec<Option<f64>> {
        (0..self.pumps.len())
            .map(|k| self.entry(k, self.pair.0, self.pair.1).map(|c| c.norm()))
            .collect()
    }

    /// Long format: `R, m, j, re, im, abs, arg`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["R", "m", "j", "re", "im", "abs", "arg"])
            .map_err(io)?;
        for (k, r) in self.pumps.iter().enumerate() {
            let Some(mat) = &self.matrices[k] else {
                continue;
            };
            for m in 0..self.clusters {
                for j in 0..self.clusters {
                    let c = mat[m * self.clusters + j];
                    w.write_record([
                        format!("{r:.17e}"),
                        m.to_string(),
                        j.to_string(),
                        format!("{:.17e}", c.re),
                        format!("{:.17e}", c.im),
                        format!("{:.17e}", c.norm()),
                        format!("{:.17e}", c.arg()),
                    ])
                    .map_err(io)?;
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }
}

/// Solves for the steady state at each pump value and records the full
/// coherence matrix.
pub fn cross_correlation_scan(
    e: &ClusterEnsemble,
    rates: &SystemRates,
    pumps: &[f64],
    solver: &IntegratorConfig,
) -> Result<CrossCorrelationScan> {
    if pumps.is_empty() || pumps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "pump grid must be nonempty and increasing".into(),
        ));
    }
    let mut probe = *rates;
    for &r in pumps {
        probe.pump = r;
        probe.validate()?;
    }
    solver.validate()?;
    let m = e.len();
    let results: Vec<Result<Vec<Complex64>>> = pumps
        .par_iter()
        .map(|&r| {
            let mut rr = *rates;
            rr.pump = r;
            let st = steady_moments(e, &rr, solver)?.state;
            let mut mat = vec![Complex64::default(); m * m];
            for a in 0..m {
                for b in 0..m {
                    mat[a * m + b] = if a == b {
                        st.intra_coherence[a]
                    } else {
                        st.coherence(a, b)
                    };
                }
            }
            Ok(mat)
        })
        .collect();
    let (matrices, errors) = results
        .into_iter()
        .map(|r| match r {
            Ok(mat) => (Some(mat), None),
            Err(err) => (None, Some(err.to_string())),
        })
        .unzip();
    Ok(CrossCorrelationScan {
        pumps: pumps.to_vec(),
        clusters: m,
        pair: (0, m / 2),
        matrices,
        errors,
    })
}
