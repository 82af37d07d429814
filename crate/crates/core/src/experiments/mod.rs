//! Studies built on the steady-state and spectrum pipeline: parameter sweeps,
//! the critical pump of the synchronization transition, linewidth versus atom
//! number, and inter-cluster correlation scans.

mod critical;
mod crosscorr;
mod sweep;

pub use critical::{critical_pump, CriticalPump, CriticalSearch};
pub use crosscorr::{cross_correlation_scan, CrossCorrelationScan};
pub use sweep::{linewidth_vs_n, sweep, Axis, CouplingSpec, Param, SweepRecord, SweepResult};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ensemble::{
    apply_fluctuations, apply_imbalance, build_coupling_clusters, build_gaussian_clusters, compose,
    Cluster, ClusterEnsemble, SystemRates,
};
use crate::error::{Error, Result};
use crate::moments::{steady_moments, SteadyMoments};
use crate::solver::IntegratorConfig;
use crate::spectrum::{
    assemble_regression, default_grid, evaluate_spectrum, SpectrumOptions, SpectrumResult,
};

/// How the cluster ensemble is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleMode {
    /// `M` equidistant frequency clusters with Gaussian populations and a
    /// uniform coupling `g`.
    Gaussian,
    /// Clusters listed verbatim.
    ExplicitClusters,
    /// Gaussian frequency clusters, each split over `K` coupling clusters
    /// `g0·cos(πk/2K)`.
    Composite,
}

/// Extra atoms placed in the cluster nearest to a given detuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Imbalance {
    pub at_detuning: f64,
    pub fraction: f64,
}

/// Recipe for a [`ClusterEnsemble`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSpec {
    pub mode: EnsembleMode,
    /// Frequency cluster count `M` (odd).
    pub clusters: usize,
    /// Coupling cluster count `K` for the composite mode.
    pub coupling_clusters: usize,
    pub total_atoms: u64,
    pub sigma: f64,
    /// Half-width of the detuning span. `None` means `span_sigmas · σ`.
    pub span: Option<f64>,
    pub span_sigmas: f64,
    pub imbalance: Option<Imbalance>,
    /// Relative amplitude of random population deviations; 0 disables them.
    pub fluctuation: f64,
    pub seed: u64,
    /// Uniform coupling for the Gaussian mode.
    pub g: f64,
    /// Antinode coupling for the composite mode.
    pub g0: f64,
    /// Cluster list for the explicit mode.
    pub explicit: Vec<Cluster>,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            mode: EnsembleMode::Gaussian,
            clusters: 31,
            coupling_clusters: 5,
            total_atoms: 10_000,
            sigma: 0.1,
            span: None,
            span_sigmas: 3.0,
            imbalance: None,
            fluctuation: 0.0,
            seed: 0,
            g: 0.002,
            g0: 0.0013,
            explicit: Vec::new(),
        }
    }
}

impl EnsembleSpec {
    pub fn span_halfwidth(&self) -> f64 {
        self.span.unwrap_or(self.span_sigmas * self.sigma)
    }

    /// `M` clusters with a uniform coupling; `M = 1` or `σ = 0` gives a single
    /// resonant cluster.
    pub fn build(&self) -> Result<ClusterEnsemble> {
        let freq = match self.mode {
            EnsembleMode::ExplicitClusters => {
                return ClusterEnsemble::new(self.explicit.clone(), self.seed);
            }
            EnsembleMode::Gaussian | EnsembleMode::Composite => {
                if self.clusters == 1 || self.sigma == 0.0 {
                    build_gaussian_clusters(1, self.total_atoms, 0.0, 1.0)?
                } else {
                    build_gaussian_clusters(
                        self.clusters,
                        self.total_atoms,
                        self.sigma,
                        self.span_halfwidth(),
                    )?
                }
            }
        };
        let freq = match self.imbalance {
            Some(im) => apply_imbalance(&freq, im.at_detuning, im.fraction)?,
            None => freq,
        };
        let freq = if self.fluctuation > 0.0 {
            apply_fluctuations(&freq, self.fluctuation, self.seed)?
        } else {
            freq
        };
        match self.mode {
            EnsembleMode::Composite => compose(
                &freq,
                &build_coupling_clusters(self.coupling_clusters, self.g0)?,
            ),
            _ => {
                if !(self.g >= 0.0) || !self.g.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "g must be >= 0, got {}",
                        self.g
                    )));
                }
                freq.with_uniform_coupling(self.g)
            }
        }
    }
}

/// Everything needed to evaluate one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub rates: SystemRates,
    pub ensemble: EnsembleSpec,
    pub solver: IntegratorConfig,
    pub spectrum: SpectrumOptions,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.rates.validate()?;
        self.solver.validate()?;
        self.spectrum.validate()?;
        self.ensemble.build().map(|_| ())
    }
}

/// Steady state and spectrum of one operating point.
#[derive(Debug, Clone)]
pub struct PointOutcome {
    pub ensemble: ClusterEnsemble,
    pub steady: SteadyMoments,
    pub spectrum: SpectrumResult,
}

/// Steady state and spectrum for a prebuilt ensemble.
pub fn evaluate_point(
    e: &ClusterEnsemble,
    r: &SystemRates,
    solver: &IntegratorConfig,
    opts: &SpectrumOptions,
) -> Result<PointOutcome> {
    let steady = steady_moments(e, r, solver)?;
    let sys = assemble_regression(&steady, e, r)?;
    let grid = default_grid(opts, e.max_abs_detuning(), r.gamma);
    let spectrum = evaluate_spectrum(&sys, &grid, opts)?;
    Ok(PointOutcome {
        ensemble: e.clone(),
        steady,
        spectrum,
    })
}

/// Builds the scenario's ensemble and evaluates it.
pub fn run_scenario(s: &Scenario) -> Result<PointOutcome> {
    s.validate()?;
    let e = s.ensemble.build()?;
    evaluate_point(&e, &s.rates, &s.solver, &s.spectrum)
}

/// Runs `f` on a dedicated pool of `workers` threads (`None`: one per core).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(Error::InvalidParameter("worker count must be >= 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// SHA-256 of the compact JSON serialization of `config`.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config).map_err(|e| Error::Parse(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Provenance record written next to every result table.
pub fn manifest<T: Serialize>(
    config: &T,
    seed: u64,
    extra: serde_json::Value,
) -> Result<serde_json::Value> {
    Ok(serde_json::json!({
        "software": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": config_hash(config)?,
        "seed": seed,
        "details": extra,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::effective_coupling;

    #[test]
    fn gaussian_spec_builds_uniform_coupling() {
        let spec = EnsembleSpec {
            total_atoms: 1000,
            clusters: 11,
            ..EnsembleSpec::default()
        };
        let e = spec.build().unwrap();
        assert_eq!(e.len(), 11);
        assert_eq!(e.total_atoms(), 1000);
        assert!(e.couplings().iter().all(|&g| g == 0.002));
        assert!((e.max_abs_detuning() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn composite_spec_matches_effective_coupling() {
        let spec = EnsembleSpec {
            mode: EnsembleMode::Composite,
            clusters: 11,
            total_atoms: 10_000,
            sigma: 1.0 / 30.0,
            ..EnsembleSpec::default()
        };
        let e = spec.build().unwrap();
        assert_eq!(e.len(), 55);
        assert!((effective_coupling(&e) - 0.0013 * 0.6f64.sqrt()).abs() < 2e-6);
    }

    #[test]
    fn identical_atom_limit() {
        let spec = EnsembleSpec {
            sigma: 0.0,
            total_atoms: 500,
            ..EnsembleSpec::default()
        };
        let e = spec.build().unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e.populations(), vec![500]);
    }

    #[test]
    fn hash_is_stable() {
        let s = Scenario::default();
        assert_eq!(config_hash(&s).unwrap(), config_hash(&s.clone()).unwrap());
        let mut t = s.clone();
        t.rates.pump = 0.02;
        assert_ne!(config_hash(&s).unwrap(), config_hash(&t).unwrap());
    }

    #[test]
    fn zero_workers_rejected() {
        assert!(with_workers(Some(0), || ()).is_err());
        assert_eq!(
            with_workers(Some(2), rayon::current_num_threads).unwrap(),
            2
        );
    }
}
