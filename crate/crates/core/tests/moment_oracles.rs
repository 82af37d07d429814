//! Independent checks of the clustered and per-atom moment equations.

mod common;

use common::{max_abs, random_ensemble, random_rates, random_state, rng};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use srlaser::ensemble::{Cluster, ClusterEnsemble, SystemRates};
use srlaser::moments::{
    contract, expand, expand_parameters, pair_index, rhs_clustered, rhs_per_atom, ClusteredSystem,
    MomentLayout, MomentState, PerAtomState, PerAtomSystem,
};
use srlaser::solver::{integrate_sampled, IntegratorConfig, OdeRhs};

fn close(a: Complex64, b: Complex64, scale: f64, tol: f64) -> bool {
    (a - b).norm() <= tol * scale
}

fn assert_states_close(a: &MomentState, b: &MomentState, tol: f64) {
    let scale =
        1.0 + a.photon_number.abs() + a.field_atom.iter().map(|c| c.norm()).fold(0.0, f64::max);
    assert!((a.photon_number - b.photon_number).abs() <= tol * scale);
    for k in 0..a.clusters() {
        assert!(
            close(a.field_atom[k], b.field_atom[k], scale, tol),
            "field_atom[{k}]"
        );
        assert!(
            (a.population[k] - b.population[k]).abs() <= tol * scale,
            "population[{k}]"
        );
    }
    for (x, y) in a.inter_coherence.iter().zip(&b.inter_coherence) {
        assert!(close(*x, *y, scale, tol));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Expanding a symmetric clustered state and differentiating atom by atom
    /// gives the expansion of the clustered derivative.
    #[test]
    fn expansion_commutes_with_rhs(seed in any::<u64>()) {
        let mut r = rng(seed);
        let e = random_ensemble(&mut r, 3, 9);
        let rates = random_rates(&mut r);
        let s = random_state(&mut r, &e);
        let d_cl = rhs_clustered(&s, &e, &rates).unwrap();
        let (det, g) = expand_parameters(&e);
        let d_pa = rhs_per_atom(&expand(&e, &s).unwrap(), &det, &g, &rates).unwrap();
        let lifted = expand(&e, &d_cl).unwrap();
        let scale = 1.0 + max_abs(&d_pa.pack());
        for (x, y) in d_pa.pack().iter().zip(lifted.pack()) {
            prop_assert!((x - y).abs() <= 1e-13 * scale, "{x} vs {y}");
        }
        let back = contract(&e, &d_pa).unwrap();
        assert_states_close(&back, &d_cl, 1e-13);
    }

    /// Negating every detuning maps `⟨aσ⁺⟩ → −conj` and `⟨σ⁺σ⁻⟩ → conj`
    /// (conjugation composed with the coupling-sign gauge) and leaves the
    /// real observables of the derivative unchanged.
    #[test]
    fn detuning_reflection(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..6usize);
        let det: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..n).map(|_| r.random_range(1e-3..5e-3)).collect();
        let rates = random_rates(&mut r);
        let s = per_atom_random(&mut r, n);
        let neg: Vec<f64> = det.iter().map(|d| -d).collect();
        let d1 = rhs_per_atom(&s, &det, &g, &rates).unwrap();
        let d2 = rhs_per_atom(&reflect_state(&s), &neg, &g, &rates).unwrap();
        prop_assert!((d1.photon_number - d2.photon_number).abs() < 1e-15);
        for k in 0..n {
            prop_assert!((d1.population[k] - d2.population[k]).abs() < 1e-15);
            prop_assert!((-d1.field_atom[k].conj() - d2.field_atom[k]).norm() < 1e-15);
        }
        for (a, b) in d1.pair_coherence.iter().zip(&d2.pair_coherence) {
            prop_assert!((a.conj() - b).norm() < 1e-15);
        }
    }

    /// Flipping the sign of one atom's coupling while negating its field and
    /// pair moments maps the derivative by the same sign pattern.
    #[test]
    fn coupling_sign_is_a_gauge(seed in any::<u64>(), pick in 0usize..5) {
        let mut r = rng(seed);
        let n = 5;
        let det: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..n).map(|_| r.random_range(1e-3..5e-3)).collect();
        let rates = random_rates(&mut r);
        let s = per_atom_random(&mut r, n);
        let mut g2 = g.clone();
        g2[pick] = -g2[pick];
        let flip = |st: &PerAtomState| {
            let mut t = st.clone();
            t.field_atom[pick] = -t.field_atom[pick];
            for a in 0..n {
                for b in a + 1..n {
                    if a == pick || b == pick {
                        let k = pair_index(a, b, n);
                        t.pair_coherence[k] = -t.pair_coherence[k];
                    }
                }
            }
            t
        };
        let d1 = rhs_per_atom(&s, &det, &g, &rates).unwrap();
        let d2 = rhs_per_atom(&flip(&s), &det, &g2, &rates).unwrap();
        let expected = flip(&d1);
        for (a, b) in expected.pack().iter().zip(d2.pack()) {
            prop_assert!((a - b).abs() < 1e-15);
        }
    }
}

fn per_atom_random(r: &mut rand_chacha::ChaCha8Rng, n: usize) -> PerAtomState {
    let mut s = PerAtomState::zeros(n);
    s.photon_number = r.random_range(0.0..2.0);
    for k in 0..n {
        s.field_atom[k] = Complex64::new(r.random_range(-0.1..0.1), r.random_range(-0.1..0.1));
        s.population[k] = r.random_range(0.0..1.0);
    }
    for v in &mut s.pair_coherence {
        *v = Complex64::new(r.random_range(-0.1..0.1), r.random_range(-0.1..0.1));
    }
    s
}

fn reflect_state(s: &PerAtomState) -> PerAtomState {
    let mut t = s.clone();
    t.field_atom.iter_mut().for_each(|c| *c = -c.conj());
    t.pair_coherence.iter_mut().for_each(|c| *c = c.conj());
    t
}

/// Full-matrix pair derivative written out for every ordered pair, without the
/// conjugate reconstruction the packed system relies on.
fn full_pair_derivative(
    s: &PerAtomState,
    det: &[f64],
    g: &[f64],
    r: &SystemRates,
) -> Vec<Vec<Complex64>> {
    let n = s.atoms();
    let i = Complex64::i();
    let mut full = vec![vec![Complex64::default(); n]; n];
    for a in 0..n {
        for b in 0..n {
            if a != b {
                full[a][b] = s.coherence(a, b);
            }
        }
    }
    let (c, p) = (&s.field_atom, &s.population);
    let mut d = vec![vec![Complex64::default(); n]; n];
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            d[a][b] =
                i * g[a] * c[b].conj() - i * g[b] * c[a] - 2.0 * i * g[a] * c[b].conj() * p[a]
                    + 2.0 * i * g[b] * c[a] * p[b]
                    - (r.gamma + r.pump + r.atom_dephasing) * full[a][b]
                    - i * (det[a] - det[b]) * full[a][b];
        }
    }
    d
}

#[test]
fn hermiticity_closure_against_full_matrix() {
    let mut r = rng(11);
    for n in 2..=6 {
        let det: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..n).map(|_| r.random_range(1e-3..5e-3)).collect();
        let rates = random_rates(&mut r);
        let s = per_atom_random(&mut r, n);
        let full = full_pair_derivative(&s, &det, &g, &rates);
        let packed = rhs_per_atom(&s, &det, &g, &rates).unwrap();
        for a in 0..n {
            for b in a + 1..n {
                assert!((full[b][a] - full[a][b].conj()).norm() < 1e-16);
                assert!((packed.pair_coherence[pair_index(a, b, n)] - full[a][b]).norm() < 1e-16);
            }
        }
    }
}

fn rk4_step<R: OdeRhs>(sys: &R, y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let f = |y: &[f64]| {
        let mut d = vec![0.0; n];
        sys.eval(0.0, y, &mut d);
        d
    };
    let axpy = |a: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        a.iter().zip(k).map(|(x, d)| x + s * d).collect()
    };
    let k1 = f(y);
    let k2 = f(&axpy(y, &k1, h / 2.0));
    let k3 = f(&axpy(y, &k2, h / 2.0));
    let k4 = f(&axpy(y, &k3, h));
    (0..n)
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Central differences of short forward and backward RK4 steps converge to
/// the right-hand side at second order.
#[test]
fn finite_difference_of_integrator_steps() {
    let mut r = rng(4);
    let n = 4;
    let det: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let g: Vec<f64> = (0..n).map(|_| r.random_range(1e-3..5e-3)).collect();
    let rates = random_rates(&mut r);
    let sys = PerAtomSystem::new(det, g, &rates).unwrap();
    let y = per_atom_random(&mut r, n).pack();
    let mut f = vec![0.0; y.len()];
    sys.eval(0.0, &y, &mut f);
    let err = |h: f64| {
        let fwd = rk4_step(&sys, &y, h);
        let bwd = rk4_step(&sys, &y, -h);
        (0..y.len())
            .map(|i| ((fwd[i] - bwd[i]) / (2.0 * h) - f[i]).abs())
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (err(0.1), err(0.05));
    assert!(e1 < 1e-2 * max_abs(&f), "e1 = {e1}");
    let order = (e1 / e2).log2();
    assert!((order - 2.0).abs() < 0.3, "observed order {order}");
}

#[test]
fn uncoupled_photons_decay_exponentially() {
    let e = ClusterEnsemble::new(
        vec![Cluster::new(0.1, 0.0, 3), Cluster::new(-0.2, 0.0, 2)],
        0,
    )
    .unwrap();
    let rates = SystemRates::new(0.001, 0.02);
    let sys = ClusteredSystem::new(&e, &rates);
    let mut s = MomentState::initial(&e, &rates);
    s.photon_number = 3.0;
    let y0 = s.pack(sys.layout()).unwrap();
    let times = [0.5, 1.0, 2.0, 5.0];
    let traj = integrate_sampled(&sys, &y0, &times, &IntegratorConfig::precise()).unwrap();
    for (t, y) in traj.times.iter().zip(&traj.states) {
        let expected = 3.0 * (-t).exp();
        assert!((y[0] - expected).abs() < 1e-10 * expected, "t={t}");
    }
}

#[test]
fn clustered_and_per_atom_trajectories_agree() {
    let mut r = rng(99);
    for _ in 0..3 {
        let e = random_ensemble(&mut r, 3, 12);
        let rates = random_rates(&mut r);
        let s0 = random_state(&mut r, &e);
        let sys = ClusteredSystem::new(&e, &rates);
        let (det, g) = expand_parameters(&e);
        let pa = PerAtomSystem::new(det, g, &rates).unwrap();
        let times = [10.0, 50.0, 200.0];
        let cfg = IntegratorConfig::precise();
        let tc = integrate_sampled(&sys, &s0.pack(sys.layout()).unwrap(), &times, &cfg).unwrap();
        let tp = integrate_sampled(&pa, &expand(&e, &s0).unwrap().pack(), &times, &cfg).unwrap();
        let layout = MomentLayout::for_ensemble(&e);
        for (yc, yp) in tc.states.iter().zip(&tp.states) {
            let a = MomentState::unpack(yc, &layout).unwrap();
            let b = contract(
                &e,
                &PerAtomState::unpack(yp, e.total_atoms() as usize).unwrap(),
            )
            .unwrap();
            assert_states_close(&a, &b, 1e-8);
        }
    }
}
