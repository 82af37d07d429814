//! Cluster ensembles.
//!
//! An ensemble of `N` atoms is sampled by `M` clusters. Every atom inside a
//! cluster shares the cluster's detuning `Δ_m = ω_c − ω_m` and coupling `g_m`.
//! All rates and frequencies are stored in units of the cavity decay rate κ.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decay, pump and dephasing rates in units of κ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemRates {
    /// Cavity field decay rate. Fixed to 1 by convention.
    pub kappa: f64,
    /// Single-atom spontaneous emission rate Γ.
    pub gamma: f64,
    /// Incoherent pump rate R.
    pub pump: f64,
    /// Cavity dephasing rate ξ.
    pub cav_dephasing: f64,
    /// Atomic dephasing rate ν.
    pub atom_dephasing: f64,
}

impl Default for SystemRates {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            gamma: 0.001,
            pump: 0.01,
            cav_dephasing: 0.0,
            atom_dephasing: 0.0,
        }
    }
}

impl SystemRates {
    pub fn new(gamma: f64, pump: f64) -> Self {
        Self {
            gamma,
            pump,
            ..Self::default()
        }
    }

    pub fn with_dephasing(mut self, cav_dephasing: f64, atom_dephasing: f64) -> Self {
        self.cav_dephasing = cav_dephasing;
        self.atom_dephasing = atom_dephasing;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("kappa", self.kappa),
            ("gamma", self.gamma),
            ("pump", self.pump),
            ("cav_dephasing", self.cav_dephasing),
            ("atom_dephasing", self.atom_dephasing),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "rate {name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if self.kappa <= 0.0 {
            return Err(Error::InvalidParameter("kappa must be > 0".into()));
        }
        Ok(())
    }

    /// Population of an uncoupled atom at steady state, `R / (R + Γ)`.
    pub fn free_population(&self) -> f64 {
        let total = self.gamma + self.pump;
        if total > 0.0 {
            self.pump / total
        } else {
            0.0
        }
    }
}

/// A group of identical atoms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub detuning: f64,
    pub coupling: f64,
    pub population: u64,
}

impl Cluster {
    pub fn new(detuning: f64, coupling: f64, population: u64) -> Self {
        Self {
            detuning,
            coupling,
            population,
        }
    }
}

/// Ordered list of clusters with a seed for stochastic transforms.
///
/// Clusters are kept in canonical order: ascending detuning, then ascending
/// coupling. The `(detuning, coupling)` keys are strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterEnsemble {
    clusters: Vec<Cluster>,
    total_atoms: u64,
    seed: u64,
}

impl ClusterEnsemble {
    pub fn new(mut clusters: Vec<Cluster>, seed: u64) -> Result<Self> {
        if clusters.is_empty() {
            return Err(Error::InvalidParameter("ensemble has no clusters".into()));
        }
        for c in &clusters {
            if !c.detuning.is_finite() || !c.coupling.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "non-finite cluster parameters {c:?}"
                )));
            }
            if c.coupling < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "coupling must be >= 0, got {}",
                    c.coupling
                )));
            }
            if c.population == 0 {
                return Err(Error::InvalidParameter(
                    "cluster population must be >= 1".into(),
                ));
            }
        }
        clusters.sort_by(|a, b| {
            a.detuning
                .total_cmp(&b.detuning)
                .then(a.coupling.total_cmp(&b.coupling))
        });
        for w in clusters.windows(2) {
            if w[0].detuning == w[1].detuning && w[0].coupling == w[1].coupling {
                return Err(Error::InvalidParameter(format!(
                    "duplicate cluster at detuning {} coupling {}",
                    w[0].detuning, w[0].coupling
                )));
            }
        }
        let total_atoms = clusters.iter().map(|c| c.population).sum();
        Ok(Self {
            clusters,
            total_atoms,
            seed,
        })
    }

    /// Identical atoms: one cluster.
    pub fn single(detuning: f64, coupling: f64, population: u64) -> Result<Self> {
        Self::new(vec![Cluster::new(detuning, coupling, population)], 0)
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn total_atoms(&self) -> u64 {
        self.total_atoms
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn detunings(&self) -> Vec<f64> {
        self.clusters.iter().map(|c| c.detuning).collect()
    }

    pub fn couplings(&self) -> Vec<f64> {
        self.clusters.iter().map(|c| c.coupling).collect()
    }

    pub fn populations(&self) -> Vec<u64> {
        self.clusters.iter().map(|c| c.population).collect()
    }

    pub fn max_abs_detuning(&self) -> f64 {
        self.clusters
            .iter()
            .map(|c| c.detuning.abs())
            .fold(0.0, f64::max)
    }

    /// Same clusters with every coupling replaced by `g`.
    pub fn with_uniform_coupling(&self, g: f64) -> Result<Self> {
        let clusters = self
            .clusters
            .iter()
            .map(|c| Cluster::new(c.detuning, g, c.population))
            .collect();
        Self::new(clusters, self.seed)
    }

    /// Same clusters with detunings negated.
    pub fn reflected(&self) -> Result<Self> {
        let clusters = self
            .clusters
            .iter()
            .map(|c| Cluster::new(-c.detuning, c.coupling, c.population))
            .collect();
        Self::new(clusters, self.seed)
    }

    /// Plain-text table with columns `detuning coupling population`.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# seed {}", self.seed);
        let _ = writeln!(out, "detuning coupling population");
        for c in &self.clusters {
            let _ = writeln!(out, "{:e} {:e} {}", c.detuning, c.coupling, c.population);
        }
        out
    }

    pub fn from_table(text: &str) -> Result<Self> {
        let mut seed = 0;
        let mut clusters = Vec::new();
        let mut header_seen = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let mut it = rest.split_whitespace();
                if it.next() == Some("seed") {
                    seed = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| Error::Parse(format!("line {}: bad seed", lineno + 1)))?;
                }
                continue;
            }
            if !header_seen {
                if line.split_whitespace().collect::<Vec<_>>()
                    != ["detuning", "coupling", "population"]
                {
                    return Err(Error::Parse(format!(
                        "line {}: expected header 'detuning coupling population'",
                        lineno + 1
                    )));
                }
                header_seen = true;
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 3 {
                return Err(Error::Parse(format!(
                    "line {}: expected 3 columns, got {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            let bad = |what: &str| Error::Parse(format!("line {}: bad {what}", lineno + 1));
            let detuning: f64 = cols[0].parse().map_err(|_| bad("detuning"))?;
            let coupling: f64 = cols[1].parse().map_err(|_| bad("coupling"))?;
            let population: u64 = cols[2].parse().map_err(|_| bad("population"))?;
            clusters.push(Cluster::new(detuning, coupling, population));
        }
        Self::new(clusters, seed)
    }
}

/// Equidistant detuning of cluster `index` out of `m` spanning `[-span, span]`.
///
/// Computed from the signed integer offset so mirror clusters get exactly
/// negated values.
fn equidistant_detuning(index: usize, m: usize, span: f64) -> f64 {
    if m == 1 {
        return 0.0;
    }
    let offset = 2 * index as i64 - (m as i64 - 1);
    span * offset as f64 / (m as f64 - 1.0)
}

/// Largest-remainder apportionment of `total` units over mirror-symmetric
/// weights (`weights[i] == weights[len-1-i]`, odd length).
///
/// Mirror pairs always receive extra units together; the centre takes the odd
/// unit when the leftover is odd. The result is therefore symmetric.
fn apportion_symmetric(weights: &[f64], total: u64) -> Vec<u64> {
    let m = weights.len();
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut leftover = total.saturating_sub(assigned);
    let centre = m / 2;
    if leftover % 2 == 1 {
        counts[centre] += 1;
        leftover -= 1;
    }
    let mut pairs: Vec<(usize, f64)> = (0..centre)
        .map(|i| (i, quotas[i] - quotas[i].floor()))
        .collect();
    // Larger remainder first; among ties the pair closer to the centre wins.
    pairs.sort_by(|a, b| b.1.total_cmp(&a.1).then(b.0.cmp(&a.0)));
    for (i, _) in pairs {
        if leftover < 2 {
            break;
        }
        counts[i] += 1;
        counts[m - 1 - i] += 1;
        leftover -= 2;
    }
    // Only reachable through floating-point slop in the quotas.
    counts[centre] += leftover;
    counts
}

/// Largest-remainder split of `total` over `parts` equal shares; earlier
/// shares take the leftover units.
fn apportion_equal(total: u64, parts: usize) -> Vec<u64> {
    let parts_u = parts as u64;
    let base = total / parts_u;
    let extra = (total % parts_u) as usize;
    (0..parts).map(|k| base + u64::from(k < extra)).collect()
}

/// `M` equidistant clusters over `[-span_halfwidth, span_halfwidth]` with
/// Gaussian populations of standard deviation `sigma`.
///
/// Couplings are left at zero; assign them with [`compose`] or
/// [`ClusterEnsemble::with_uniform_coupling`].
pub fn build_gaussian_clusters(
    m: usize,
    n_total: u64,
    sigma: f64,
    span_halfwidth: f64,
) -> Result<ClusterEnsemble> {
    if m == 0 || m % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "cluster count must be odd and >= 1, got {m}"
        )));
    }
    if n_total < m as u64 {
        return Err(Error::InvalidParameter(format!(
            "total atoms {n_total} below cluster count {m}"
        )));
    }
    if m == 1 {
        return ClusterEnsemble::new(vec![Cluster::new(0.0, 0.0, n_total)], 0);
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sigma must be >= 0, got {sigma}"
        )));
    }
    if !(span_halfwidth > 0.0) || !span_halfwidth.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "span half-width must be > 0, got {span_halfwidth}"
        )));
    }
    let detunings: Vec<f64> = (0..m)
        .map(|i| equidistant_detuning(i, m, span_halfwidth))
        .collect();
    let weights: Vec<f64> = detunings
        .iter()
        .map(|&d| {
            if sigma == 0.0 {
                if d == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (-d * d / (2.0 * sigma * sigma)).exp()
            }
        })
        .collect();
    // Clusters whose proportional share falls below one atom are pinned at one;
    // the remaining atoms are re-apportioned over the other clusters in
    // proportion to their weights. Weights fall off monotonically from the
    // centre, so the unpinned clusters form a symmetric block around it.
    let centre = m / 2;
    let mut pinned = 0usize;
    loop {
        let free_atoms = (n_total - 2 * pinned as u64) as f64;
        let free_weight: f64 = weights[pinned..m - pinned].iter().sum();
        if pinned < centre && free_atoms * weights[pinned] / free_weight < 1.0 {
            pinned += 1;
        } else {
            break;
        }
    }
    let mut counts = vec![1u64; m];
    let inner = apportion_symmetric(&weights[pinned..m - pinned], n_total - 2 * pinned as u64);
    counts[pinned..m - pinned].copy_from_slice(&inner);
    let clusters = detunings
        .into_iter()
        .zip(counts)
        .map(|(d, n)| Cluster::new(d, 0.0, n))
        .collect();
    ClusterEnsemble::new(clusters, 0)
}

/// Adds `round(extra_fraction · N_total)` atoms to the cluster nearest to
/// `at_detuning`.
pub fn apply_imbalance(
    e: &ClusterEnsemble,
    at_detuning: f64,
    extra_fraction: f64,
) -> Result<ClusterEnsemble> {
    if e.is_empty() {
        return Err(Error::InvalidParameter("empty ensemble".into()));
    }
    if !(extra_fraction >= 0.0) || !extra_fraction.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "imbalance fraction must be >= 0, got {extra_fraction}"
        )));
    }
    let extra = (extra_fraction * e.total_atoms() as f64).round() as u64;
    let nearest = e
        .clusters
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (a.1.detuning - at_detuning)
                .abs()
                .total_cmp(&(b.1.detuning - at_detuning).abs())
        })
        .map(|(i, _)| i)
        .expect("non-empty");
    let mut clusters = e.clusters.clone();
    clusters[nearest].population += extra;
    ClusterEnsemble::new(clusters, e.seed)
}

/// Random relative deviations `N_m → max(1, round(N_m (1 + a·u_m)))` with
/// `u_m ~ U[-1, 1]` drawn from a ChaCha8 stream seeded by `seed`.
pub fn apply_fluctuations(
    e: &ClusterEnsemble,
    amplitude: f64,
    seed: u64,
) -> Result<ClusterEnsemble> {
    if !(0.0..1.0).contains(&amplitude) {
        return Err(Error::InvalidParameter(format!(
            "fluctuation amplitude must lie in [0, 1), got {amplitude}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clusters = e
        .clusters
        .iter()
        .map(|c| {
            let u: f64 = rng.random_range(-1.0..=1.0);
            let n = (c.population as f64 * (1.0 + amplitude * u))
                .round()
                .max(1.0) as u64;
            Cluster::new(c.detuning, c.coupling, n)
        })
        .collect();
    ClusterEnsemble::new(clusters, seed)
}

/// Couplings `g_k = g0·cos(π k / 2K)` for `k = 0..K`: equidistant positions
/// over a quarter wavelength of a standing-wave mode, antinode included.
pub fn build_coupling_clusters(k: usize, g0: f64) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "coupling cluster count must be >= 1".into(),
        ));
    }
    if !(g0 > 0.0) || !g0.is_finite() {
        return Err(Error::InvalidParameter(format!("g0 must be > 0, got {g0}")));
    }
    Ok((0..k)
        .map(|i| g0 * (std::f64::consts::PI * i as f64 / (2.0 * k as f64)).cos())
        .collect())
}

/// Cartesian product of frequency clusters and coupling values.
///
/// Each frequency cluster's atoms are split across the couplings by
/// largest-remainder apportionment. Sub-clusters that end up empty are dropped,
/// so the total atom number is preserved.
pub fn compose(freq_e: &ClusterEnsemble, couplings: &[f64]) -> Result<ClusterEnsemble> {
    if freq_e.is_empty() || couplings.is_empty() {
        return Err(Error::InvalidParameter(
            "compose needs non-empty inputs".into(),
        ));
    }
    let mut clusters = Vec::with_capacity(freq_e.len() * couplings.len());
    for c in freq_e.clusters() {
        for (g, n) in couplings
            .iter()
            .zip(apportion_equal(c.population, couplings.len()))
        {
            if n > 0 {
                clusters.push(Cluster::new(c.detuning, *g, n));
            }
        }
    }
    ClusterEnsemble::new(clusters, freq_e.seed())
}

/// Population-weighted RMS coupling `√(Σ N_m g_m² / Σ N_m)`.
pub fn effective_coupling(e: &ClusterEnsemble) -> f64 {
    let (num, den) = e.clusters().iter().fold((0.0, 0.0), |(num, den), c| {
        let n = c.population as f64;
        (num + n * c.coupling * c.coupling, den + n)
    });
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_cluster_is_degenerate() {
        let e = build_gaussian_clusters(1, 100, 0.37, 5.0).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e.clusters()[0].detuning, 0.0);
        assert_eq!(e.total_atoms(), 100);
    }

    #[test]
    fn even_cluster_count_rejected() {
        assert!(build_gaussian_clusters(4, 100, 1.0, 1.0).is_err());
        assert!(build_gaussian_clusters(0, 100, 1.0, 1.0).is_err());
    }

    #[test]
    fn too_few_atoms_rejected() {
        assert!(build_gaussian_clusters(31, 30, 0.1, 0.1).is_err());
        assert!(build_gaussian_clusters(31, 31, 0.1, 0.1).is_ok());
    }

    #[test]
    fn thirty_one_cluster_shape() {
        let e = build_gaussian_clusters(31, 10_000, 0.1, 0.1).unwrap();
        assert_eq!(e.len(), 31);
        assert_eq!(e.total_atoms(), 10_000);
        assert_eq!(e.clusters()[0].detuning, -0.1);
        assert_eq!(e.clusters()[30].detuning, 0.1);
        assert_eq!(e.clusters()[15].detuning, 0.0);
    }

    #[test]
    fn minimum_population_floor() {
        // Narrow distribution: only the centre has weight.
        let e = build_gaussian_clusters(5, 20, 0.0, 1.0).unwrap();
        assert_eq!(e.populations(), vec![1, 1, 16, 1, 1]);
        let e = build_gaussian_clusters(31, 100, 0.05, 0.15).unwrap();
        let p = e.populations();
        assert!(p.iter().all(|&n| n >= 1));
        assert_eq!(e.total_atoms(), 100);
        // The floor keeps the profile unimodal.
        assert!(p[..16].windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(p, p.iter().rev().cloned().collect::<Vec<_>>());
    }

    #[test]
    fn zero_imbalance_is_identity() {
        let e = build_gaussian_clusters(31, 10_000, 0.1, 0.1).unwrap();
        assert_eq!(apply_imbalance(&e, 0.027, 0.0).unwrap(), e);
    }

    #[test]
    fn imbalance_hits_nearest_cluster() {
        let e = build_gaussian_clusters(31, 10_000, 0.1, 0.1).unwrap();
        let im = apply_imbalance(&e, 0.027, 0.01).unwrap();
        // Cluster spacing is 0.2/30; 0.027 is nearest to 4 steps = 0.02667.
        let idx = 15 + 4;
        assert_eq!(
            im.clusters()[idx].population,
            e.clusters()[idx].population + 100
        );
        assert_eq!(im.total_atoms(), 10_100);
    }

    #[test]
    fn imbalance_at_exact_cluster() {
        let e = build_gaussian_clusters(31, 10_000, 0.1, 0.1).unwrap();
        let target = e.clusters()[7].detuning;
        let im = apply_imbalance(&e, target, 0.05).unwrap();
        let mut expected = e.populations();
        expected[7] += 500;
        assert_eq!(im.populations(), expected);
    }

    #[test]
    fn fluctuations_deterministic_and_bounded() {
        let e = build_gaussian_clusters(31, 10_000, 0.1, 0.1).unwrap();
        assert_eq!(
            apply_fluctuations(&e, 0.0, 9).unwrap().populations(),
            e.populations()
        );
        let a = apply_fluctuations(&e, 0.1, 42).unwrap();
        let b = apply_fluctuations(&e, 0.1, 42).unwrap();
        assert_eq!(a, b);
        assert!(apply_fluctuations(&e, 1.0, 1).is_err());
        for (x, y) in a.populations().iter().zip(e.populations()) {
            let lo = ((y as f64) * 0.9).round().max(1.0) as u64;
            let hi = ((y as f64) * 1.1).round() as u64;
            assert!(*x >= lo && *x <= hi);
        }
    }

    #[test]
    fn fluctuation_mean_matches_original() {
        let e = build_gaussian_clusters(31, 10_000, 0.1, 0.1).unwrap();
        let mut sums = vec![0.0; e.len()];
        let seeds = 1000;
        for seed in 0..seeds {
            let f = apply_fluctuations(&e, 0.1, seed).unwrap();
            for (s, n) in sums.iter_mut().zip(f.populations()) {
                *s += n as f64;
            }
        }
        for (s, n) in sums.iter().zip(e.populations()) {
            let mean = s / seeds as f64;
            // Rounding bias of a single atom dominates for tiny clusters.
            assert!(
                (mean - n as f64).abs() <= 0.02 * n as f64 + 0.5,
                "{mean} vs {n}"
            );
        }
    }

    #[test]
    fn coupling_cluster_reference_values() {
        let g = build_coupling_clusters(5, 0.0013).unwrap();
        assert_eq!(g.len(), 5);
        assert!(g.iter().all(|&x| x > 0.0));
        assert_eq!(g[0], 0.0013);
        let g_eff = (g.iter().map(|x| x * x).sum::<f64>() / 5.0).sqrt();
        assert!((g_eff - 0.001).abs() / 0.001 < 0.01, "{g_eff}");

        let unit = build_coupling_clusters(5, 1.0).unwrap();
        let mean_sq = unit.iter().map(|x| x * x).sum::<f64>() / 5.0;
        assert_relative_eq!(mean_sq, 0.6, epsilon = 1e-14);

        assert_eq!(build_coupling_clusters(1, 0.002).unwrap(), vec![0.002]);
        assert!(build_coupling_clusters(0, 1.0).is_err());
        assert!(build_coupling_clusters(3, 0.0).is_err());
    }

    #[test]
    fn compose_product_and_apportionment() {
        let e = ClusterEnsemble::new(
            vec![
                Cluster::new(-1.0, 0.0, 10),
                Cluster::new(0.0, 0.0, 20),
                Cluster::new(1.0, 0.0, 10),
            ],
            0,
        )
        .unwrap();
        let c = compose(&e, &[0.002, 0.001]).unwrap();
        assert_eq!(c.len(), 6);
        assert_eq!(c.populations(), vec![5, 5, 10, 10, 5, 5]);
        assert_eq!(c.total_atoms(), 40);

        let uniform = compose(&e, &[0.003]).unwrap();
        assert_eq!(uniform, e.with_uniform_coupling(0.003).unwrap());

        let f = build_gaussian_clusters(11, 10_000, 1.0 / 30.0, 0.1).unwrap();
        let g = build_coupling_clusters(5, 0.0013).unwrap();
        let fc = compose(&f, &g).unwrap();
        assert_eq!(fc.len(), 55);
        assert_eq!(fc.total_atoms(), 10_000);
        assert!((effective_coupling(&fc) - 0.001).abs() < 1e-5);
    }

    #[test]
    fn effective_coupling_uniform() {
        let e = build_gaussian_clusters(7, 700, 1.0, 1.0)
            .unwrap()
            .with_uniform_coupling(0.0042)
            .unwrap();
        assert_relative_eq!(effective_coupling(&e), 0.0042, max_relative = 1e-14);
    }

    #[test]
    fn table_round_trip() {
        let e = build_gaussian_clusters(31, 10_000, 0.1, 0.3).unwrap();
        let e = compose(&e, &build_coupling_clusters(3, 0.002).unwrap()).unwrap();
        let e = apply_fluctuations(&e, 0.05, 17).unwrap();
        let back = ClusterEnsemble::from_table(&e.to_table()).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn rates_validation() {
        assert!(SystemRates::default().validate().is_ok());
        let mut r = SystemRates::default();
        r.pump = -1.0;
        assert!(r.validate().is_err());
        r = SystemRates::default();
        r.kappa = 0.0;
        assert!(r.validate().is_err());
    }
}
