//! Closed second-order cumulant moment systems.
//!
//! Two equivalent formulations are provided:
//!
//! * [`ClusteredSystem`] evolves one set of moments per cluster plus one
//!   coherence per unordered cluster pair. This is the production path.
//! * [`PerAtomSystem`] evolves every atom and every atom pair separately. It
//!   scales as `O(N²)` and serves as the oracle for the clustered equations.
//!
//! Both act on flat real vectors. Complex entries are stored as adjacent
//! `(re, im)` pairs. The clustered layout is
//!
//! ```text
//! [ n | c_0 .. c_{M-1} | p_0 .. p_{M-1} | s_intra (clusters with N_m >= 2) | s_mj (m < j, row-major) ]
//! ```
//!
//! where `n = ⟨a†a⟩`, `c_m = ⟨a σ⁺_m⟩`, `p_m = ⟨σ⁺_m σ⁻_m⟩`,
//! `s_intra = ⟨σ⁺_{am} σ⁻_{bm}⟩` (a ≠ b) and `s_mj = ⟨σ⁺_m σ⁻_j⟩`.
//! The per-atom layout is the same with `N_m = 1` everywhere.

mod clustered;
mod per_atom;

pub use clustered::{rhs_clustered, ClusteredSystem};
pub use per_atom::{rhs_per_atom, PerAtomSystem};

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensemble::{ClusterEnsemble, SystemRates};
use crate::error::{Error, Result};
use crate::solver::{find_steady_state, ConvergenceReport, IntegratorConfig};

/// Largest total atom number that [`expand`] accepts.
pub const EXPAND_LIMIT: u64 = 200;

/// Index of the unordered pair `(m, j)`, `m < j`, among `n` items in
/// row-major order.
#[inline]
pub fn pair_index(m: usize, j: usize, n: usize) -> usize {
    debug_assert!(m < j && j < n);
    m * (2 * n - m - 1) / 2 + (j - m - 1)
}

#[inline]
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Offsets of the clustered state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentLayout {
    clusters: usize,
    /// Slot of each cluster's intra-coherence in the intra block, if stored.
    intra_slot: Vec<Option<usize>>,
    intra_count: usize,
}

impl MomentLayout {
    pub fn new(populations: &[u64]) -> Self {
        let mut intra_count = 0;
        let intra_slot = populations
            .iter()
            .map(|&n| {
                if n >= 2 {
                    intra_count += 1;
                    Some(intra_count - 1)
                } else {
                    None
                }
            })
            .collect();
        Self {
            clusters: populations.len(),
            intra_slot,
            intra_count,
        }
    }

    pub fn for_ensemble(e: &ClusterEnsemble) -> Self {
        Self::new(&e.populations())
    }

    pub fn clusters(&self) -> usize {
        self.clusters
    }

    pub fn field_offset(&self) -> usize {
        1
    }

    pub fn population_offset(&self) -> usize {
        1 + 2 * self.clusters
    }

    pub fn intra_offset(&self) -> usize {
        1 + 3 * self.clusters
    }

    pub fn inter_offset(&self) -> usize {
        self.intra_offset() + 2 * self.intra_count
    }

    pub fn intra_slot(&self, m: usize) -> Option<usize> {
        self.intra_slot[m]
    }

    pub fn dim(&self) -> usize {
        self.inter_offset() + 2 * pair_count(self.clusters)
    }
}

/// All first- and second-order moments of a clustered ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentState {
    /// `⟨a†a⟩`
    pub photon_number: f64,
    /// `⟨a σ⁺_m⟩` per cluster
    pub field_atom: Vec<Complex64>,
    /// `⟨σ⁺_{am} σ⁻_{am}⟩` per cluster
    pub population: Vec<f64>,
    /// `⟨σ⁺_{am} σ⁻_{bm}⟩`, a ≠ b, per cluster; zero and unused when `N_m = 1`
    pub intra_coherence: Vec<Complex64>,
    /// `⟨σ⁺_m σ⁻_j⟩` for `m < j`, indexed by [`pair_index`]
    pub inter_coherence: Vec<Complex64>,
}

impl MomentState {
    pub fn zeros(clusters: usize) -> Self {
        Self {
            photon_number: 0.0,
            field_atom: vec![Complex64::default(); clusters],
            population: vec![0.0; clusters],
            intra_coherence: vec![Complex64::default(); clusters],
            inter_coherence: vec![Complex64::default(); pair_count(clusters)],
        }
    }

    /// Incoherent start: every moment zero except the populations, which sit at
    /// the uncoupled fixed point `R / (R + Γ)`.
    pub fn initial(e: &ClusterEnsemble, r: &SystemRates) -> Self {
        let mut s = Self::zeros(e.len());
        s.population.fill(r.free_population());
        s
    }

    pub fn clusters(&self) -> usize {
        self.field_atom.len()
    }

    /// `⟨σᶻ_m⟩ = 2 p_m − 1`.
    pub fn sigma_z(&self, m: usize) -> f64 {
        2.0 * self.population[m] - 1.0
    }

    /// `⟨σ⁺_m σ⁻_j⟩` for any ordered pair of distinct clusters.
    pub fn coherence(&self, m: usize, j: usize) -> Complex64 {
        let n = self.clusters();
        match m.cmp(&j) {
            std::cmp::Ordering::Less => self.inter_coherence[pair_index(m, j, n)],
            std::cmp::Ordering::Greater => self.inter_coherence[pair_index(j, m, n)].conj(),
            std::cmp::Ordering::Equal => self.intra_coherence[m],
        }
    }

    fn check_shape(&self) -> Result<()> {
        let m = self.clusters();
        for (len, expected) in [
            (self.population.len(), m),
            (self.intra_coherence.len(), m),
            (self.inter_coherence.len(), pair_count(m)),
        ] {
            if len != expected {
                return Err(Error::DimensionMismatch { expected, got: len });
            }
        }
        Ok(())
    }

    pub fn pack(&self, layout: &MomentLayout) -> Result<Vec<f64>> {
        self.check_shape()?;
        if self.clusters() != layout.clusters() {
            return Err(Error::DimensionMismatch {
                expected: layout.clusters(),
                got: self.clusters(),
            });
        }
        let m = self.clusters();
        let mut y = vec![0.0; layout.dim()];
        y[0] = self.photon_number;
        for k in 0..m {
            y[layout.field_offset() + 2 * k] = self.field_atom[k].re;
            y[layout.field_offset() + 2 * k + 1] = self.field_atom[k].im;
            y[layout.population_offset() + k] = self.population[k];
            if let Some(slot) = layout.intra_slot(k) {
                y[layout.intra_offset() + 2 * slot] = self.intra_coherence[k].re;
                y[layout.intra_offset() + 2 * slot + 1] = self.intra_coherence[k].im;
            }
        }
        let off = layout.inter_offset();
        for (p, s) in self.inter_coherence.iter().enumerate() {
            y[off + 2 * p] = s.re;
            y[off + 2 * p + 1] = s.im;
        }
        Ok(y)
    }

    pub fn unpack(y: &[f64], layout: &MomentLayout) -> Result<Self> {
        if y.len() != layout.dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.dim(),
                got: y.len(),
            });
        }
        let m = layout.clusters();
        let mut s = Self::zeros(m);
        s.photon_number = y[0];
        for k in 0..m {
            let f = layout.field_offset() + 2 * k;
            s.field_atom[k] = Complex64::new(y[f], y[f + 1]);
            s.population[k] = y[layout.population_offset() + k];
            if let Some(slot) = layout.intra_slot(k) {
                let i = layout.intra_offset() + 2 * slot;
                s.intra_coherence[k] = Complex64::new(y[i], y[i + 1]);
            }
        }
        let off = layout.inter_offset();
        for (p, v) in s.inter_coherence.iter_mut().enumerate() {
            *v = Complex64::new(y[off + 2 * p], y[off + 2 * p + 1]);
        }
        Ok(s)
    }

    /// Default physicality tolerance `1e-6 · max(1, ⟨a†a⟩)`.
    pub fn default_tolerance(&self) -> f64 {
        1e-6 * self.photon_number.abs().max(1.0)
    }

    /// Human-readable list of violated physicality bounds.
    pub fn physicality_violations(&self, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        if self.photon_number < -tol {
            out.push(format!("photon_number {} < 0", self.photon_number));
        }
        for (m, &p) in self.population.iter().enumerate() {
            if p < -tol || p > 1.0 + tol {
                out.push(format!("population[{m}] = {p} outside [0, 1]"));
            }
        }
        out
    }

    /// Labeled-column text: one `label re im` line per stored entry.
    pub fn to_text(&self, layout: &MomentLayout) -> String {
        let mut out = String::new();
        let m = self.clusters();
        let _ = writeln!(out, "# moment-state clusters {m}");
        let _ = writeln!(out, "label re im");
        let _ = writeln!(out, "photon_number {:e} 0", self.photon_number);
        for k in 0..m {
            let c = self.field_atom[k];
            let _ = writeln!(out, "field_atom[{k}] {:e} {:e}", c.re, c.im);
        }
        for k in 0..m {
            let _ = writeln!(out, "population[{k}] {:e} 0", self.population[k]);
        }
        for k in 0..m {
            if layout.intra_slot(k).is_some() {
                let c = self.intra_coherence[k];
                let _ = writeln!(out, "intra_coherence[{k}] {:e} {:e}", c.re, c.im);
            }
        }
        for a in 0..m {
            for b in a + 1..m {
                let c = self.inter_coherence[pair_index(a, b, m)];
                let _ = writeln!(out, "inter_coherence[{a},{b}] {:e} {:e}", c.re, c.im);
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut state: Option<Self> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let perr = |msg: &str| Error::Parse(format!("line {}: {msg}", lineno + 1));
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let toks: Vec<&str> = rest.split_whitespace().collect();
                if toks.len() == 3 && toks[0] == "moment-state" && toks[1] == "clusters" {
                    let m: usize = toks[2].parse().map_err(|_| perr("bad cluster count"))?;
                    state = Some(Self::zeros(m));
                }
                continue;
            }
            if line == "label re im" {
                continue;
            }
            let s = state
                .as_mut()
                .ok_or_else(|| perr("missing '# moment-state clusters M' header"))?;
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 3 {
                return Err(perr("expected 'label re im'"));
            }
            let re: f64 = cols[1].parse().map_err(|_| perr("bad real part"))?;
            let im: f64 = cols[2].parse().map_err(|_| perr("bad imaginary part"))?;
            let value = Complex64::new(re, im);
            let (name, idx) = match cols[0].split_once('[') {
                Some((name, rest)) => (
                    name,
                    rest.strip_suffix(']').ok_or_else(|| perr("bad index"))?,
                ),
                None => (cols[0], ""),
            };
            let m = s.clusters();
            let parse_idx = |t: &str| -> Result<usize> {
                let k: usize = t.parse().map_err(|_| perr("bad index"))?;
                if k >= m {
                    return Err(perr("index out of range"));
                }
                Ok(k)
            };
            match name {
                "photon_number" => s.photon_number = re,
                "field_atom" => s.field_atom[parse_idx(idx)?] = value,
                "population" => s.population[parse_idx(idx)?] = re,
                "intra_coherence" => s.intra_coherence[parse_idx(idx)?] = value,
                "inter_coherence" => {
                    let (a, b) = idx.split_once(',').ok_or_else(|| perr("bad pair index"))?;
                    let (a, b) = (parse_idx(a)?, parse_idx(b)?);
                    if a >= b {
                        return Err(perr("pair index must satisfy m < j"));
                    }
                    s.inter_coherence[pair_index(a, b, m)] = value;
                }
                other => return Err(perr(&format!("unknown label {other}"))),
            }
        }
        state.ok_or_else(|| Error::Parse("empty moment-state text".into()))
    }
}

/// Moments of an ensemble resolved atom by atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerAtomState {
    pub photon_number: f64,
    /// `⟨a σ⁺_i⟩`
    pub field_atom: Vec<Complex64>,
    /// `⟨σ⁺_i σ⁻_i⟩`
    pub population: Vec<f64>,
    /// `⟨σ⁺_i σ⁻_j⟩` for `i < j`, indexed by [`pair_index`]
    pub pair_coherence: Vec<Complex64>,
}

impl PerAtomState {
    pub fn zeros(atoms: usize) -> Self {
        Self {
            photon_number: 0.0,
            field_atom: vec![Complex64::default(); atoms],
            population: vec![0.0; atoms],
            pair_coherence: vec![Complex64::default(); pair_count(atoms)],
        }
    }

    pub fn atoms(&self) -> usize {
        self.field_atom.len()
    }

    pub fn dim(atoms: usize) -> usize {
        1 + 3 * atoms + 2 * pair_count(atoms)
    }

    pub fn coherence(&self, i: usize, j: usize) -> Complex64 {
        let n = self.atoms();
        if i < j {
            self.pair_coherence[pair_index(i, j, n)]
        } else {
            self.pair_coherence[pair_index(j, i, n)].conj()
        }
    }

    pub fn pack(&self) -> Vec<f64> {
        let n = self.atoms();
        let mut y = vec![0.0; Self::dim(n)];
        y[0] = self.photon_number;
        for i in 0..n {
            y[1 + 2 * i] = self.field_atom[i].re;
            y[2 + 2 * i] = self.field_atom[i].im;
            y[1 + 2 * n + i] = self.population[i];
        }
        let off = 1 + 3 * n;
        for (p, s) in self.pair_coherence.iter().enumerate() {
            y[off + 2 * p] = s.re;
            y[off + 2 * p + 1] = s.im;
        }
        y
    }

    pub fn unpack(y: &[f64], atoms: usize) -> Result<Self> {
        if y.len() != Self::dim(atoms) {
            return Err(Error::DimensionMismatch {
                expected: Self::dim(atoms),
                got: y.len(),
            });
        }
        let mut s = Self::zeros(atoms);
        s.photon_number = y[0];
        for i in 0..atoms {
            s.field_atom[i] = Complex64::new(y[1 + 2 * i], y[2 + 2 * i]);
            s.population[i] = y[1 + 2 * atoms + i];
        }
        let off = 1 + 3 * atoms;
        for (p, v) in s.pair_coherence.iter_mut().enumerate() {
            *v = Complex64::new(y[off + 2 * p], y[off + 2 * p + 1]);
        }
        Ok(s)
    }
}

/// Atom-resolved detunings and couplings, atoms ordered cluster by cluster.
pub fn expand_parameters(e: &ClusterEnsemble) -> (Vec<f64>, Vec<f64>) {
    let mut detunings = Vec::new();
    let mut couplings = Vec::new();
    for c in e.clusters() {
        for _ in 0..c.population {
            detunings.push(c.detuning);
            couplings.push(c.coupling);
        }
    }
    (detunings, couplings)
}

fn cluster_of_atoms(e: &ClusterEnsemble) -> Vec<usize> {
    e.clusters()
        .iter()
        .enumerate()
        .flat_map(|(m, c)| std::iter::repeat_n(m, c.population as usize))
        .collect()
}

/// Per-atom state in which each atom inherits its cluster's moments.
pub fn expand(e: &ClusterEnsemble, s: &MomentState) -> Result<PerAtomState> {
    if e.total_atoms() > EXPAND_LIMIT {
        return Err(Error::ExpansionTooLarge {
            atoms: e.total_atoms() as usize,
            limit: EXPAND_LIMIT as usize,
        });
    }
    if s.clusters() != e.len() {
        return Err(Error::DimensionMismatch {
            expected: e.len(),
            got: s.clusters(),
        });
    }
    s.check_shape()?;
    let owner = cluster_of_atoms(e);
    let n = owner.len();
    let mut out = PerAtomState::zeros(n);
    out.photon_number = s.photon_number;
    for (i, &m) in owner.iter().enumerate() {
        out.field_atom[i] = s.field_atom[m];
        out.population[i] = s.population[m];
    }
    for i in 0..n {
        for j in i + 1..n {
            out.pair_coherence[pair_index(i, j, n)] = s.coherence(owner[i], owner[j]);
        }
    }
    Ok(out)
}

/// Cluster averages of a per-atom state. Inverse of [`expand`] on
/// exchange-symmetric states.
pub fn contract(e: &ClusterEnsemble, p: &PerAtomState) -> Result<MomentState> {
    let owner = cluster_of_atoms(e);
    if owner.len() != p.atoms() {
        return Err(Error::DimensionMismatch {
            expected: owner.len(),
            got: p.atoms(),
        });
    }
    let m = e.len();
    let mut s = MomentState::zeros(m);
    s.photon_number = p.photon_number;
    let pops = e.populations();
    for (i, &k) in owner.iter().enumerate() {
        s.field_atom[k] += p.field_atom[i] / pops[k] as f64;
        s.population[k] += p.population[i] / pops[k] as f64;
    }
    let mut intra_count = vec![0usize; m];
    let mut inter_count = vec![0usize; pair_count(m)];
    let n = p.atoms();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (owner[i], owner[j]);
            let v = p.pair_coherence[pair_index(i, j, n)];
            if a == b {
                s.intra_coherence[a] += v;
                intra_count[a] += 1;
            } else {
                let idx = pair_index(a, b, m);
                s.inter_coherence[idx] += v;
                inter_count[idx] += 1;
            }
        }
    }
    for (v, c) in s.intra_coherence.iter_mut().zip(intra_count) {
        if c > 0 {
            *v /= c as f64;
        }
    }
    for (v, c) in s.inter_coherence.iter_mut().zip(inter_count) {
        if c > 0 {
            *v /= c as f64;
        }
    }
    Ok(s)
}

/// Converged steady state of the clustered system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyMoments {
    pub state: MomentState,
    pub report: ConvergenceReport,
}

/// Steady state of the clustered equations started from
/// [`MomentState::initial`].
pub fn steady_moments(
    e: &ClusterEnsemble,
    r: &SystemRates,
    cfg: &IntegratorConfig,
) -> Result<SteadyMoments> {
    r.validate()?;
    let sys = ClusteredSystem::new(e, r);
    let y0 = MomentState::initial(e, r).pack(sys.layout())?;
    let ss = find_steady_state(&sys, &y0, cfg)?;
    Ok(SteadyMoments {
        state: MomentState::unpack(&ss.state, sys.layout())?,
        report: ss.report,
    })
}
