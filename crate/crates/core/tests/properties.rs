//! Randomized invariants of the linear algebra, control, herald, tomography
//! and level layers.

mod common;

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use spinwave::control::{compile_rotation, evolve, r_n, r_z, sequence_unitary, NoiseModel, PulseSpec, RotationSpec};
use spinwave::herald::{atom_photon_state, project_idler, readout_map, target_idler_polarization, JonesVector};
use spinwave::levels::{effective_params, single_beam_rabi, AtomicData, BeamParams, Transition};
use spinwave::qlin::{
    gate_overlap, haar_random_state_with, haar_random_unitary_with, hermitian_eig, matrix_exp_i, pauli,
    phase_aligned_distance, pure_fidelity, state_fidelity,
};
use spinwave::rng::SimRng;
use spinwave::tomo::{
    linear_inversion, mle_state, process_fidelity, qpt_mle, state_log_likelihood, Basis, MeasurementRecord,
    ProcessMatrix, TomographyInput,
};
use spinwave::{ComplexMatrix, DensityMatrix};

use common::{exact_set, random_channel, random_density, random_hermitian};

fn rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// `exp(-i a σ)` for a Pauli matrix `σ`.
fn pauli_rotation(sigma: &ComplexMatrix, a: f64) -> ComplexMatrix {
    &ComplexMatrix::identity(2).scale_real(a.cos()) + &sigma.scale(Complex64::new(0.0, -a.sin()))
}

fn unit_axis() -> impl Strategy<Value = [f64; 3]> {
    (0.0..PI, 0.0..2.0 * PI).prop_map(|(t, p)| [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn propagators_are_unitary(seed: u64, dim in 1usize..=4, t in -1e-5f64..1e-5) {
        let h = random_hermitian(dim, &mut rng(seed)).scale_real(1e6);
        prop_assert!(matrix_exp_i(&h, t).unwrap().unitary_deviation() < 1e-10);
        prop_assert!(haar_random_unitary_with(&mut rng(seed)).unitary_deviation() < 1e-10);
    }

    #[test]
    fn propagator_semigroup(seed: u64, dim in 1usize..=4, t1 in -3.0f64..3.0, t2 in -3.0f64..3.0) {
        let h = random_hermitian(dim, &mut rng(seed));
        let joint = matrix_exp_i(&h, t1 + t2).unwrap();
        let split = &matrix_exp_i(&h, t1).unwrap() * &matrix_exp_i(&h, t2).unwrap();
        prop_assert!(joint.max_abs_diff(&split) < 1e-9);
    }

    #[test]
    fn eigendecomposition_reconstructs(seed: u64, dim in 1usize..=4) {
        let h = random_hermitian(dim, &mut rng(seed));
        let (vals, v) = hermitian_eig(&h).unwrap();
        let d: Vec<Complex64> = vals.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let back = ComplexMatrix::from_diagonal(&d).conjugate_by(&v);
        prop_assert!(back.max_abs_diff(&h) < 1e-10);
        prop_assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn fidelity_bounds(seed: u64) {
        let mut g = rng(seed);
        let (a, b) = (random_density(&mut g), random_density(&mut g));
        let f = state_fidelity(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((state_fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-10);
        if a.matrix().max_abs_diff(b.matrix()) > 1e-8 {
            prop_assert!(f < 1.0);
        }
        prop_assert!((f - state_fidelity(&b, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn rotations_are_unitary(t in 0.0f64..1e-4, omega in -1e7f64..1e7, phi in -10.0f64..10.0) {
        prop_assert!(r_z(t, omega).unwrap().unitary_deviation() < 1e-12);
        prop_assert!(r_n(t, omega, phi).unwrap().unitary_deviation() < 1e-12);
    }

    #[test]
    fn raman_phase_selects_axis(t in 0.0f64..2e-5, omega in 1e5f64..2e6) {
        let a = omega * t / 2.0;
        let x = r_n(t, omega, 0.0).unwrap();
        let y = r_n(t, omega, -PI / 2.0).unwrap();
        prop_assert!(phase_aligned_distance(&x, &pauli_rotation(&pauli(1), a)) < 1e-12);
        prop_assert!(phase_aligned_distance(&y, &pauli_rotation(&pauli(2), a)) < 1e-12);
    }

    #[test]
    fn heralded_state_round_trip(theta in 0.0f64..=PI, phi in 0.0f64..2.0 * PI) {
        let pol = target_idler_polarization(theta, phi).unwrap();
        match project_idler(&atom_photon_state(), &pol) {
            Ok((psi, _)) => {
                let target = spinwave::PureState::from_angles(theta, phi);
                prop_assert!(pure_fidelity(&psi.density(), &target).unwrap() > 1.0 - 1e-10);
            }
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn projection_is_complete(seed: u64) {
        let psi = haar_random_state_with(2, &mut rng(seed)).unwrap();
        let a = psi.amplitudes();
        let pol = JonesVector::normalized(a[0], a[1]).unwrap();
        let joint = atom_photon_state();
        let p = project_idler(&joint, &pol).map(|r| r.1).unwrap_or(0.0)
            + project_idler(&joint, &pol.orthogonal()).map(|r| r.1).unwrap_or(0.0);
        prop_assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn readout_keeps_bloch_vector(seed: u64, aux in 0.0f64..0.9) {
        let mut g = rng(seed);
        let qubit = random_density(&mut g);
        let mut m = qubit.embed(3).unwrap().matrix().scale_real(1.0 - aux);
        m[(2, 2)] = Complex64::new(aux, 0.0);
        let out = readout_map(&DensityMatrix::new(m).unwrap()).unwrap();
        prop_assert!((state_fidelity(&out.polarization, &qubit).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!((out.detected_fraction - (1.0 - aux)).abs() < 1e-12);
    }

    #[test]
    fn mle_is_always_physical(counts in proptest::array::uniform3((0u64..2000, 0u64..2000))) {
        let records = Basis::ALL
            .iter()
            .zip(counts)
            .map(|(&b, (p, m))| MeasurementRecord::new(b, p, m + u64::from(p + m == 0)))
            .collect();
        let input = TomographyInput::new(records).unwrap();
        let est = mle_state(&input).unwrap();
        prop_assert!(est.rho.matrix().is_psd(1e-12));
        prop_assert!((est.rho.matrix().trace().re - 1.0).abs() < 1e-12);
        let li = linear_inversion(&input).unwrap();
        let projected = DensityMatrix::project_physical(&li.matrix).unwrap();
        prop_assert!(est.log_likelihood >= state_log_likelihood(&input, &projected) - 1e-9);
    }

    #[test]
    fn unitary_process_fidelity(seed: u64) {
        let mut g = rng(seed);
        let u = haar_random_unitary_with(&mut g);
        let v = haar_random_unitary_with(&mut g);
        let f = process_fidelity(&ProcessMatrix::from_unitary(&u).unwrap(), &ProcessMatrix::from_unitary(&v).unwrap()).unwrap();
        let expect = (&u.adjoint() * &v).trace().norm_sqr() / 4.0;
        prop_assert!((f - expect).abs() < 1e-9);
    }

    #[test]
    fn stark_and_rabi_power_scaling(factor in 0.01f64..20.0, det_ghz in -20.0f64..20.0) {
        let atoms = AtomicData::bundled();
        let base = BeamParams { detuning_rad_s: 2.0 * PI * det_ghz * 1e9, ..BeamParams::reference() };
        prop_assume!(atoms.detuning(&base, 1).is_ok() && atoms.detuning(&base, 2).is_ok());
        let scaled = BeamParams { power_w: base.power_w * factor, ..base };
        let p = effective_params(&base, &atoms, 0.0).unwrap();
        let q = effective_params(&scaled, &atoms, 0.0).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()) + 1e-12;
        prop_assert!(close(q.stark_down, factor * p.stark_down));
        prop_assert!(close(q.stark_up, factor * p.stark_up));
        prop_assert!(close(q.stark_aux, factor * p.stark_aux));
        // single-beam Rabi frequencies go as √P, their Raman products as P
        for label in ["m=-2,F'=1,q=+1", "m=0,F'=2,q=-1", "m=0,F'=1,q=+1"] {
            let t = Transition::parse(label).unwrap();
            let a = single_beam_rabi(&base, &atoms, &t).unwrap();
            prop_assert!(close(single_beam_rabi(&scaled, &atoms, &t).unwrap(), factor.sqrt() * a));
        }
        prop_assert!(close(q.rabi_qubit, factor * p.rabi_qubit));
        prop_assert!(close(q.rabi_aux, factor * p.rabi_aux));
        prop_assert_eq!(p.identity_residual(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn compiled_rotation_matches_target(axis in unit_axis(), angle in -PI..PI) {
        let spec = RotationSpec::new(axis, angle).unwrap();
        let omega_r = 2.0 * PI * 190e3;
        let omega_l = 2.0 * PI * 180e3;
        let u = sequence_unitary(&compile_rotation(&spec, omega_r, omega_l).unwrap()).unwrap();
        prop_assert!(phase_aligned_distance(&u, &spec.unitary()) < 1e-8);
        prop_assert!((gate_overlap(&u, &spec.unitary()) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn noiseless_evolution_preserves_trace_and_purity(
        seed: u64,
        pulses in proptest::collection::vec((0.0f64..4e-6, 0.0f64..2.0 * PI, any::<bool>()), 1..5),
    ) {
        let psi = haar_random_state_with(3, &mut rng(seed)).unwrap();
        let schedule: Vec<PulseSpec> = pulses
            .iter()
            .map(|&(t, phase, larmor)| {
                if larmor {
                    PulseSpec::larmor(t, 2.0 * PI * 180e3)
                } else {
                    let mut p = PulseSpec::raman(t, 2.0 * PI * 190e3, phase);
                    p.aux_detuning_rad_s = 2.0 * PI * 560e3;
                    p
                }
            })
            .collect();
        let out = evolve(&psi.density(), &schedule, &NoiseModel::default(), 1, seed).unwrap();
        prop_assert!((out.matrix().trace().re - 1.0).abs() < 1e-10);
        prop_assert!((out.purity() - 1.0).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_mle_matches_physical_inversion(seed: u64) {
        let rho = random_density(&mut rng(seed));
        let input = TomographyInput::expected(&rho, 1_000_000_000, 0.0).unwrap();
        let li = linear_inversion(&input).unwrap();
        prop_assume!(li.physical);
        let est = mle_state(&input).unwrap();
        prop_assert!(est.rho.matrix().max_abs_diff(&li.matrix) < 1e-6);
    }

    #[test]
    fn exact_qpt_recovers_random_channels(seed: u64, rank in 1usize..=4) {
        let chi = random_channel(rank, &mut rng(seed));
        let est = qpt_mle(&exact_set(&chi), true).unwrap();
        prop_assert!(est.chi.chi().max_abs_diff(chi.chi()) < 1e-5);
    }
}
