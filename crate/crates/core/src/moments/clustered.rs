use num_complex::Complex64;

use super::{pair_index, MomentLayout, MomentState};
use crate::ensemble::{ClusterEnsemble, SystemRates};
use crate::error::{Error, Result};
use crate::solver::OdeRhs;

/// Clustered moment equations with cavity and atomic dephasing.
///
/// Dephasing enters the field-atom correlations with `(ξ + ν)/2` and every
/// atom-atom coherence with `ν`; populations and the photon number carry no
/// dephasing term.
#[derive(Debug, Clone)]
pub struct ClusteredSystem {
    detuning: Vec<f64>,
    coupling: Vec<f64>,
    population: Vec<f64>,
    rates: SystemRates,
    layout: MomentLayout,
}

impl ClusteredSystem {
    pub fn new(e: &ClusterEnsemble, rates: &SystemRates) -> Self {
        Self::from_parts(e.detunings(), e.couplings(), &e.populations(), rates)
    }

    /// Builds the system from raw per-cluster parameters. Couplings may carry
    /// any sign here.
    pub fn from_parts(
        detuning: Vec<f64>,
        coupling: Vec<f64>,
        populations: &[u64],
        rates: &SystemRates,
    ) -> Self {
        assert_eq!(detuning.len(), coupling.len());
        assert_eq!(detuning.len(), populations.len());
        Self {
            detuning,
            coupling,
            population: populations.iter().map(|&n| n as f64).collect(),
            rates: *rates,
            layout: MomentLayout::new(populations),
        }
    }

    pub fn layout(&self) -> &MomentLayout {
        &self.layout
    }

    pub fn rates(&self) -> &SystemRates {
        &self.rates
    }

    #[inline]
    fn field(&self, y: &[f64], m: usize) -> Complex64 {
        let o = self.layout.field_offset() + 2 * m;
        Complex64::new(y[o], y[o + 1])
    }

    /// `⟨σ⁺_m σ⁻_j⟩` for `m ≠ j`.
    #[inline]
    fn inter(&self, y: &[f64], m: usize, j: usize) -> Complex64 {
        let n = self.layout.clusters();
        let off = self.layout.inter_offset();
        if m < j {
            let o = off + 2 * pair_index(m, j, n);
            Complex64::new(y[o], y[o + 1])
        } else {
            let o = off + 2 * pair_index(j, m, n);
            Complex64::new(y[o], -y[o + 1])
        }
    }
}

impl OdeRhs for ClusteredSystem {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn eval(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let r = &self.rates;
        let m_count = self.layout.clusters();
        let i = Complex64::i();
        let n = y[0];
        let pop_off = self.layout.population_offset();
        let field_off = self.layout.field_offset();
        let intra_off = self.layout.intra_offset();
        let inter_off = self.layout.inter_offset();

        let field_decay = 0.5 * (r.kappa + r.gamma + r.pump + r.cav_dephasing + r.atom_dephasing);
        let coherence_decay = r.gamma + r.pump + r.atom_dephasing;

        // Photon number: −κn + Σ i g_m N_m ⟨aσ⁺_m⟩ − Σ i g_m N_m ⟨a†σ⁻_m⟩.
        let mut dn = -r.kappa * n;
        for m in 0..m_count {
            let c = self.field(y, m);
            dn += (i * self.coupling[m] * self.population[m] * c
                - i * self.coupling[m] * self.population[m] * c.conj())
            .re;
        }
        dy[0] = dn;

        for m in 0..m_count {
            let g = self.coupling[m];
            let c = self.field(y, m);
            let p = y[pop_off + m];

            let mut dc = -(field_decay + i * self.detuning[m]) * c + i * g * n
                - 2.0 * i * g * n * p
                - i * g * p;
            if let Some(slot) = self.layout.intra_slot(m) {
                let o = intra_off + 2 * slot;
                let s = Complex64::new(y[o], y[o + 1]);
                dc -= i * g * (self.population[m] - 1.0) * s;
            }
            for j in 0..m_count {
                if j != m {
                    dc -= i * self.coupling[j] * self.population[j] * self.inter(y, m, j);
                }
            }
            dy[field_off + 2 * m] = dc.re;
            dy[field_off + 2 * m + 1] = dc.im;

            let dp = i * g * c.conj() - i * g * c - (r.gamma + r.pump) * p + r.pump;
            dy[pop_off + m] = dp.re;

            if let Some(slot) = self.layout.intra_slot(m) {
                let o = intra_off + 2 * slot;
                let s = Complex64::new(y[o], y[o + 1]);
                let inv = 1.0 - 2.0 * p;
                let ds = i * g * c.conj() * inv - i * g * c * inv - coherence_decay * s;
                dy[o] = ds.re;
                dy[o + 1] = ds.im;
            }
        }

        for m in 0..m_count {
            let gm = self.coupling[m];
            let cm = self.field(y, m);
            let inv_m = 1.0 - 2.0 * y[pop_off + m];
            for j in m + 1..m_count {
                let gj = self.coupling[j];
                let cj = self.field(y, j);
                let inv_j = 1.0 - 2.0 * y[pop_off + j];
                let o = inter_off + 2 * pair_index(m, j, m_count);
                let s = Complex64::new(y[o], y[o + 1]);
                let ds = -i * (self.detuning[m] - self.detuning[j]) * s
                    + i * gm * cj.conj() * inv_m
                    - i * gj * cm * inv_j
                    - coherence_decay * s;
                dy[o] = ds.re;
                dy[o + 1] = ds.im;
            }
        }
    }
}

/// Time derivative of a clustered moment state.
pub fn rhs_clustered(
    state: &MomentState,
    e: &ClusterEnsemble,
    r: &SystemRates,
) -> Result<MomentState> {
    if state.clusters() != e.len() {
        return Err(Error::DimensionMismatch {
            expected: e.len(),
            got: state.clusters(),
        });
    }
    let sys = ClusteredSystem::new(e, r);
    let y = state.pack(sys.layout())?;
    let mut dy = vec![0.0; y.len()];
    sys.eval(0.0, &y, &mut dy);
    MomentState::unpack(&dy, sys.layout())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::Cluster;

    #[test]
    fn zero_state_without_pump_is_stationary() {
        let e = ClusterEnsemble::new(
            vec![Cluster::new(-0.5, 0.002, 3), Cluster::new(0.5, 0.001, 4)],
            0,
        )
        .unwrap();
        let r = SystemRates::new(0.001, 0.0).with_dephasing(0.3, 0.01);
        let d = rhs_clustered(&MomentState::zeros(2), &e, &r).unwrap();
        assert_eq!(d, MomentState::zeros(2));
    }

    #[test]
    fn uncoupled_population_line() {
        let e = ClusterEnsemble::new(
            vec![Cluster::new(-0.5, 0.0, 3), Cluster::new(0.5, 0.0, 1)],
            0,
        )
        .unwrap();
        let r = SystemRates::new(0.001, 0.02);
        let mut s = MomentState::zeros(2);
        s.population = vec![0.25, 0.8];
        s.photon_number = 4.0;
        s.field_atom[0] = Complex64::new(0.1, 0.3);
        let d = rhs_clustered(&s, &e, &r).unwrap();
        for m in 0..2 {
            let expected = -(r.gamma + r.pump) * s.population[m] + r.pump;
            assert!((d.population[m] - expected).abs() < 1e-16);
        }
        assert!((d.photon_number + r.kappa * 4.0).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let e = ClusterEnsemble::single(0.0, 0.001, 10).unwrap();
        let r = SystemRates::default();
        assert!(rhs_clustered(&MomentState::zeros(2), &e, &r).is_err());
    }

    #[test]
    fn identical_atoms_single_cluster() {
        // One cluster of N atoms: intra-coherence couples back into the field
        // with weight N − 1 while the photon equation sees N.
        let e = ClusterEnsemble::single(0.0, 0.002, 50).unwrap();
        let r = SystemRates::new(0.001, 0.05);
        let mut s = MomentState::zeros(1);
        s.photon_number = 10.0;
        s.field_atom[0] = Complex64::new(0.0, -0.05);
        s.population[0] = 0.6;
        s.intra_coherence[0] = Complex64::new(0.01, 0.0);
        let d = rhs_clustered(&s, &e, &r).unwrap();
        let g = 0.002;
        let dn = -10.0 + 2.0 * g * 50.0 * 0.05;
        assert!((d.photon_number - dn).abs() < 1e-14);
        let i = Complex64::i();
        let c = s.field_atom[0];
        let dc = -0.5 * (1.0 + 0.001 + 0.05) * c + i * g * 10.0
            - 2.0 * i * g * 10.0 * 0.6
            - i * g * 0.6
            - i * g * 49.0 * 0.01;
        assert!((d.field_atom[0] - dc).norm() < 1e-15);
    }
}
