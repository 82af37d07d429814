use num_complex::Complex64;

use super::{pair_count, pair_index, PerAtomState};
use crate::ensemble::SystemRates;
use crate::error::{Error, Result};
use crate::solver::OdeRhs;

/// Moment equations resolved atom by atom (`O(N²)` unknowns).
///
/// Written term by term in the expanded form (products such as
/// `2i g_m ⟨a†σ⁻_j⟩⟨σ⁺_mσ⁻_m⟩` kept separate) so that it shares no algebra with
/// [`super::ClusteredSystem`]. The pair coherences carry the free precession
/// `−i(Δ_i − Δ_j)` generated by the detuning Hamiltonian.
#[derive(Debug, Clone)]
pub struct PerAtomSystem {
    detuning: Vec<f64>,
    coupling: Vec<f64>,
    rates: SystemRates,
}

impl PerAtomSystem {
    pub fn new(detuning: Vec<f64>, coupling: Vec<f64>, rates: &SystemRates) -> Result<Self> {
        if detuning.len() != coupling.len() {
            return Err(Error::DimensionMismatch {
                expected: detuning.len(),
                got: coupling.len(),
            });
        }
        Ok(Self {
            detuning,
            coupling,
            rates: *rates,
        })
    }

    pub fn atoms(&self) -> usize {
        self.detuning.len()
    }
}

impl OdeRhs for PerAtomSystem {
    fn dim(&self) -> usize {
        PerAtomState::dim(self.atoms())
    }

    fn eval(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let n_atoms = self.atoms();
        let r = &self.rates;
        let i = Complex64::i();
        let kappa = r.kappa;
        let gamma = r.gamma;
        let pump = r.pump;
        let xi = r.cav_dephasing;
        let nu = r.atom_dephasing;

        let n = y[0];
        let c = |k: usize| Complex64::new(y[1 + 2 * k], y[2 + 2 * k]);
        let p = |k: usize| y[1 + 2 * n_atoms + k];
        let pair_off = 1 + 3 * n_atoms;
        let s = |a: usize, b: usize| -> Complex64 {
            if a < b {
                let o = pair_off + 2 * pair_index(a, b, n_atoms);
                Complex64::new(y[o], y[o + 1])
            } else {
                let o = pair_off + 2 * pair_index(b, a, n_atoms);
                Complex64::new(y[o], -y[o + 1])
            }
        };

        let mut dn = Complex64::new(-kappa * n, 0.0);
        for m in 0..n_atoms {
            dn += i * self.coupling[m] * c(m);
            dn -= i * self.coupling[m] * c(m).conj();
        }
        dy[0] = dn.re;

        for m in 0..n_atoms {
            let g = self.coupling[m];
            let mut dc = -((kappa + gamma + pump + xi + nu) / 2.0 + i * self.detuning[m]) * c(m);
            dc += i * g * n;
            dc -= 2.0 * i * g * n * p(m);
            dc -= i * g * p(m);
            for j in 0..n_atoms {
                if j != m {
                    dc -= i * self.coupling[j] * s(m, j);
                }
            }
            dy[1 + 2 * m] = dc.re;
            dy[2 + 2 * m] = dc.im;

            let dp = i * g * c(m).conj() - i * g * c(m) - (gamma + pump) * p(m) + pump;
            dy[1 + 2 * n_atoms + m] = dp.re;
        }

        for m in 0..n_atoms {
            for j in m + 1..n_atoms {
                let gm = self.coupling[m];
                let gj = self.coupling[j];
                let mut ds = i * gm * c(j).conj();
                ds -= i * gj * c(m);
                ds -= 2.0 * i * gm * c(j).conj() * p(m);
                ds += 2.0 * i * gj * c(m) * p(j);
                ds -= (gamma + pump + nu) * s(m, j);
                ds -= i * (self.detuning[m] - self.detuning[j]) * s(m, j);
                let o = pair_off + 2 * pair_index(m, j, n_atoms);
                dy[o] = ds.re;
                dy[o + 1] = ds.im;
            }
        }
        debug_assert_eq!(pair_off + 2 * pair_count(n_atoms), dy.len());
    }
}

/// Time derivative of a per-atom state.
pub fn rhs_per_atom(
    state: &PerAtomState,
    detunings: &[f64],
    couplings: &[f64],
    r: &SystemRates,
) -> Result<PerAtomState> {
    if detunings.len() != state.atoms() {
        return Err(Error::DimensionMismatch {
            expected: state.atoms(),
            got: detunings.len(),
        });
    }
    if state.population.len() != state.atoms()
        || state.pair_coherence.len() != pair_count(state.atoms())
    {
        return Err(Error::DimensionMismatch {
            expected: pair_count(state.atoms()),
            got: state.pair_coherence.len(),
        });
    }
    let sys = PerAtomSystem::new(detunings.to_vec(), couplings.to_vec(), r)?;
    let y = state.pack();
    let mut dy = vec![0.0; y.len()];
    sys.eval(0.0, &y, &mut dy);
    PerAtomState::unpack(&dy, state.atoms())
}
