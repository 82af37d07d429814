use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::ensemble::{ClusterEnsemble, SystemRates};
use crate::error::{Error, Result};
use crate::moments::{MomentState, PerAtomState, SteadyMoments};
use crate::solver::Matrix;

/// Linear system obeyed by `v(τ) = (⟨a†(τ)a(0)⟩, ⟨σ⁺_1(τ)a(0)⟩, …)`.
#[derive(Debug, Clone)]
pub struct RegressionSystem {
    pub matrix: Matrix<Complex64>,
    pub initial_vector: Vec<Complex64>,
}

impl RegressionSystem {
    /// Clustered regression matrix from a moment state, without checking that
    /// the state is stationary.
    ///
    /// Row 0 couples to each cluster with `i g_m N_m`; cluster rows are the
    /// single-atom equations `−i g_m ⟨σᶻ_m⟩ v_0 − ((Γ+R+ν)/2 + iΔ_m) v_m`.
    pub fn from_moments(state: &MomentState, e: &ClusterEnsemble, r: &SystemRates) -> Result<Self> {
        if state.clusters() != e.len() {
            return Err(Error::DimensionMismatch {
                expected: e.len(),
                got: state.clusters(),
            });
        }
        let weights: Vec<f64> = e.populations().iter().map(|&n| n as f64).collect();
        let sigma_z: Vec<f64> = (0..e.len()).map(|m| state.sigma_z(m)).collect();
        Ok(Self::build(
            &e.detunings(),
            &e.couplings(),
            &weights,
            &sigma_z,
            state.photon_number,
            &state.field_atom,
            r,
        ))
    }

    /// Per-atom regression matrix of dimension `N + 1`.
    pub fn per_atom(
        state: &PerAtomState,
        detunings: &[f64],
        couplings: &[f64],
        r: &SystemRates,
    ) -> Result<Self> {
        let n = state.atoms();
        if detunings.len() != n || couplings.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: detunings.len().min(couplings.len()),
            });
        }
        let sigma_z: Vec<f64> = state.population.iter().map(|p| 2.0 * p - 1.0).collect();
        Ok(Self::build(
            detunings,
            couplings,
            &vec![1.0; n],
            &sigma_z,
            state.photon_number,
            &state.field_atom,
            r,
        ))
    }

    fn build(
        detuning: &[f64],
        coupling: &[f64],
        weight: &[f64],
        sigma_z: &[f64],
        photons: f64,
        field_atom: &[Complex64],
        r: &SystemRates,
    ) -> Self {
        let m = detuning.len();
        let i = Complex64::i();
        let mut a = Matrix::zeros(m + 1);
        a[(0, 0)] = Complex64::new(-(r.kappa + r.cav_dephasing) / 2.0, 0.0);
        let atom_decay = (r.gamma + r.pump + r.atom_dephasing) / 2.0;
        for k in 0..m {
            a[(0, k + 1)] = i * coupling[k] * weight[k];
            a[(k + 1, 0)] = -i * coupling[k] * sigma_z[k];
            a[(k + 1, k + 1)] = -(atom_decay + i * detuning[k]);
        }
        let mut v = Vec::with_capacity(m + 1);
        v.push(Complex64::new(photons, 0.0));
        v.extend_from_slice(field_atom);
        Self {
            matrix: a,
            initial_vector: v,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.n()
    }

    /// Eigenvalues of the regression matrix (complex Schur form).
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        let n = self.dim();
        let m = DMatrix::from_fn(n, n, |r, c| self.matrix[(r, c)]);
        let (_, t) = m.schur().unpack();
        (0..n).map(|k| t[(k, k)]).collect()
    }

    /// Largest real part among the eigenvalues.
    pub fn max_real_eigenvalue(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest decay rate `min |Re λ|`.
    pub fn slowest_decay_rate(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .map(|l| l.re.abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// All eigenvalues have `Re λ ≤ tol`.
    pub fn is_decaying(&self, tol: f64) -> bool {
        self.max_real_eigenvalue() <= tol
    }
}

/// Regression system for a converged steady state.
pub fn assemble_regression(
    steady: &SteadyMoments,
    e: &ClusterEnsemble,
    r: &SystemRates,
) -> Result<RegressionSystem> {
    if !steady.report.converged {
        return Err(Error::NotSteady);
    }
    RegressionSystem::from_moments(&steady.state, e, r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_atom_two_by_two() {
        let e = ClusterEnsemble::single(0.3, 0.002, 1).unwrap();
        let r = SystemRates::new(0.001, 0.01).with_dephasing(0.5, 0.02);
        let mut s = MomentState::zeros(1);
        s.photon_number = 0.2;
        s.population[0] = 0.8;
        s.field_atom[0] = Complex64::new(0.01, -0.03);
        let sys = RegressionSystem::from_moments(&s, &e, &r).unwrap();
        let i = Complex64::i();
        let a = &sys.matrix;
        assert_eq!(a[(0, 0)], Complex64::new(-(1.0 + 0.5) / 2.0, 0.0));
        assert_eq!(a[(0, 1)], i * 0.002);
        assert!((a[(1, 0)] + i * 0.002 * (2.0 * 0.8 - 1.0)).norm() < 1e-18);
        assert_eq!(a[(1, 1)], -((0.001 + 0.01 + 0.02) / 2.0 + i * 0.3));
        assert_eq!(
            sys.initial_vector,
            vec![Complex64::new(0.2, 0.0), s.field_atom[0]]
        );
    }

    #[test]
    fn uncoupled_is_block_diagonal() {
        let e = ClusterEnsemble::new(
            vec![
                crate::ensemble::Cluster::new(-0.5, 0.0, 3),
                crate::ensemble::Cluster::new(0.5, 0.0, 2),
            ],
            0,
        )
        .unwrap();
        let r = SystemRates::new(0.001, 0.01).with_dephasing(0.2, 0.0);
        let mut s = MomentState::zeros(2);
        s.population = vec![0.9, 0.9];
        let sys = RegressionSystem::from_moments(&s, &e, &r).unwrap();
        for k in 1..3 {
            assert_eq!(sys.matrix[(0, k)], Complex64::default());
            assert_eq!(sys.matrix[(k, 0)], Complex64::default());
        }
        assert_eq!(sys.matrix[(0, 0)].re, -0.6);
        let ev = sys.eigenvalues();
        assert!(ev
            .iter()
            .any(|l| (l - Complex64::new(-0.6, 0.0)).norm() < 1e-12));
        assert!(sys.is_decaying(1e-8));
    }
}
