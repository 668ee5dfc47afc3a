use std::sync::{Arc, OnceLock};

use ndarray::Array1;
use num_complex::Complex64;
use proptest::prelude::*;
use rydberg_core::collective::{build_basis, find_resonances, initial_configurations, three_body_final, three_body_initial};
use rydberg_core::dynamics::{evolve, initial_state_population_phase, level_matcher, transfer_fraction, unit_vector, Trajectory};
use rydberg_core::{BasisSet, Geometry, HamiltonianModel, Physics};

fn physics() -> &'static Physics {
    static P: OnceLock<Physics> = OnceLock::new();
    P.get_or_init(Physics::rubidium)
}

fn rrr_basis() -> Arc<BasisSet> {
    static B: OnceLock<Arc<BasisSet>> = OnceLock::new();
    B.get_or_init(|| Arc::new(build_basis(physics(), three_body_initial(70).unwrap(), Default::default()).unwrap())).clone()
}

fn hamiltonian(field: f64, decay: bool) -> HamiltonianModel {
    HamiltonianModel::assemble(physics(), rrr_basis(), field, Geometry::equidistant(10.0).unwrap(), decay).unwrap()
}

#[test]
fn step_refinement_converges() {
    let h = hamiltonian(0.1406, true);
    let psi0 = unit_vector(h.dim(), 0);
    let coarse = evolve(&h, &psi0, 1.2, 50, 1e-8).unwrap();
    let fine = evolve(&h, &psi0, 1.2, 100, 1e-8).unwrap();
    let a = initial_state_population_phase(&coarse);
    let b = initial_state_population_phase(&fine);
    for k in 0..=50 {
        assert!((a[k].population - b[2 * k].population).abs() < 1e-7);
    }
}

#[test]
fn diagonal_shift_leaves_observables() {
    let h = hamiltonian(0.1406, true);
    let mut shifted = h.clone();
    for k in 0..h.dim() {
        shifted.matrix[[k, k]] += Complex64::new(37.5, 0.0);
    }
    let psi0 = unit_vector(h.dim(), 0);
    let a = initial_state_population_phase(&evolve(&h, &psi0, 1.17, 40, 1e-8).unwrap());
    let b = initial_state_population_phase(&evolve(&shifted, &psi0, 1.17, 40, 1e-8).unwrap());
    for (x, y) in a.iter().zip(&b) {
        assert!((x.population - y.population).abs() < 1e-12);
        if let (Some(p), Some(q)) = (x.phase, y.phase) {
            let d = (p - q).rem_euclid(std::f64::consts::TAU);
            assert!(d.min(std::f64::consts::TAU - d) < 1e-9, "{p} vs {q}");
        }
    }
}

#[test]
fn lossless_evolution_keeps_norm() {
    let h = hamiltonian(0.14, false);
    assert!(h.hermiticity_defect() < 1e-12);
    let traj = evolve(&h, &unit_vector(h.dim(), 0), 1.0, 100, 1e-8).unwrap();
    for n in traj.norms_squared() {
        assert!((n - 1.0).abs() < 1e-10);
    }
}

#[test]
fn decay_shrinks_norm() {
    // far from resonance the population stays in 70P3/2
    let h = hamiltonian(0.0, true);
    let traj = evolve(&h, &unit_vector(h.dim(), 0), 1.0, 100, 1e-8).unwrap();
    let norms = traj.norms_squared();
    assert!(norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    // three atoms at ~115 µs each
    let expected = (-3.0 * 1.0 / 114.93f64).exp();
    assert!((norms[100] - expected).abs() < 5e-3, "{} vs {expected}", norms[100]);
}

fn single_sample(psi: Array1<Complex64>) -> Trajectory {
    Trajectory { times: vec![0.0], amplitudes: vec![psi], frame_mhz: 0.0 }
}

#[test]
fn transfer_fraction_counting() {
    let basis = rrr_basis();
    let target = level_matcher(71, 0, 1);
    let start = single_sample(unit_vector(basis.len(), 0));
    assert_eq!(transfer_fraction(&start, &basis, &target), vec![0.0]);
    let k = basis.index_of(&three_body_final(70).unwrap()).expect("final state in basis");
    let done = single_sample(unit_vector(basis.len(), k));
    assert!((transfer_fraction(&done, &basis, &target)[0] - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn rejects_bad_inputs() {
    let h = hamiltonian(0.14, true);
    let psi0 = unit_vector(h.dim(), 0);
    assert!(evolve(&h, &psi0, 0.0, 10, 1e-8).is_err());
    assert!(evolve(&h, &psi0, 1.0, 0, 1e-8).is_err());
    assert!(evolve(&h, &psi0, 1.0, 10, 0.0).is_err());
    assert!(evolve(&h, &(psi0.clone() * Complex64::new(2.0, 0.0)), 1.0, 10, 1e-8).is_err());
    assert!(evolve(&h, &unit_vector(3, 0), 1.0, 10, 1e-8).is_err());
}

#[test]
fn configuration_crossings_are_ordered() {
    let fin = three_body_final(70).unwrap();
    let crossings: Vec<f64> = initial_configurations(70)
        .unwrap()
        .iter()
        .map(|c| {
            let r = find_resonances(physics(), c, &fin, (0.0, 0.2), 1e-3).unwrap();
            assert_eq!(r.len(), 1, "{}", c.label());
            r[0]
        })
        .collect();
    assert!(crossings.windows(2).all(|w| w[0] < w[1]), "{crossings:?}");
    assert!(crossings.iter().all(|&e| (0.12..0.17).contains(&e)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn norm_never_grows(field in 0.0f64..0.2, t in 0.05f64..2.0) {
        let h = hamiltonian(field, true);
        let traj = evolve(&h, &unit_vector(h.dim(), 0), t, 20, 1e-8).unwrap();
        let n = traj.norms_squared();
        prop_assert!(n.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        prop_assert!(n[20] > 0.9);
    }

    #[test]
    fn transfer_fraction_bounded(field in 0.12f64..0.16, t in 0.1f64..2.0) {
        let basis = rrr_basis();
        let h = hamiltonian(field, true);
        let traj = evolve(&h, &unit_vector(h.dim(), 0), t, 5, 1e-8).unwrap();
        for r in transfer_fraction(&traj, &basis, level_matcher(71, 0, 1)) {
            prop_assert!((0.0..=1.0).contains(&r));
        }
    }
}
