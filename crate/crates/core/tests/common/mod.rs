#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srlaser::ensemble::{Cluster, ClusterEnsemble, SystemRates};
use srlaser::moments::MomentState;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random ensemble with at most `max_clusters` clusters and `max_atoms` atoms,
/// detunings in `[-κ, κ]` and couplings in `[5e-4, 5e-3]κ`.
pub fn random_ensemble(r: &mut ChaCha8Rng, max_clusters: usize, max_atoms: u64) -> ClusterEnsemble {
    let m = r.random_range(1..=max_clusters);
    let mut budget = max_atoms - m as u64;
    let clusters = (0..m)
        .map(|_| {
            let extra = if budget > 0 {
                r.random_range(0..=budget.min(max_atoms / m as u64))
            } else {
                0
            };
            budget -= extra;
            Cluster::new(
                r.random_range(-1.0..1.0),
                r.random_range(5e-4..5e-3),
                1 + extra,
            )
        })
        .collect();
    ClusterEnsemble::new(clusters, 0).unwrap()
}

/// Rates drawn from the ranges used across the figures.
pub fn random_rates(r: &mut ChaCha8Rng) -> SystemRates {
    SystemRates::new(r.random_range(1e-3..1e-2), r.random_range(1e-3..0.2))
        .with_dephasing(r.random_range(0.0..1.0), r.random_range(0.0..1e-2))
}

fn small_complex(r: &mut ChaCha8Rng, scale: f64) -> Complex64 {
    Complex64::new(r.random_range(-scale..scale), r.random_range(-scale..scale))
}

/// Exchange-symmetric random state: real intra-cluster coherences, zero where
/// a cluster holds a single atom.
pub fn random_state(r: &mut ChaCha8Rng, e: &ClusterEnsemble) -> MomentState {
    let m = e.len();
    let mut s = MomentState::zeros(m);
    s.photon_number = r.random_range(0.0..2.0);
    for k in 0..m {
        s.field_atom[k] = small_complex(r, 0.05);
        s.population[k] = r.random_range(0.0..1.0);
        if e.clusters()[k].population >= 2 {
            s.intra_coherence[k] = Complex64::new(r.random_range(-0.05..0.05), 0.0);
        }
    }
    for v in &mut s.inter_coherence {
        *v = small_complex(r, 0.05);
    }
    s
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}
