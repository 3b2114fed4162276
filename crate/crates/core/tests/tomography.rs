use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qassert_core::qcore::{circuit_to_choi, state_fidelity};
use qassert_core::random::random_circuit;
use qassert_core::simulator::evolve;
use qassert_core::tomography::{process_tomography, state_tomography};
use qassert_core::{Circuit, DensityMatrix, DensityMatrixSimulator, GateOp, NoiseModel};

#[test]
fn analytic_state_tomography_is_exact() {
    let sim = DensityMatrixSimulator::noiseless();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for n in 1..=3 {
        for _ in 0..8 {
            let prep = random_circuit(&mut rng, n, 4);
            let subject = random_circuit(&mut rng, n, 8);
            let rho = state_tomography(&prep, &subject, &sim, 0, 0).unwrap();
            let direct = evolve(&DensityMatrix::zero_state(n), &prep.then(&subject).unwrap(), None).unwrap();
            assert!(rho.matrix().max_abs_diff(direct.matrix()) <= 1e-9);
        }
    }
}

#[test]
fn analytic_process_tomography_is_exact() {
    let sim = DensityMatrixSimulator::noiseless();
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for n in 1..=2 {
        for _ in 0..8 {
            let subject = random_circuit(&mut rng, n, 8);
            let choi = process_tomography(&subject, &sim, 0, 0).unwrap();
            assert!(choi.matrix().max_abs_diff(circuit_to_choi(&subject).matrix()) <= 1e-8);
        }
    }
}

#[test]
fn noisy_reconstructions_stay_physical() {
    let sim = DensityMatrixSimulator::with_noise(NoiseModel::DEFAULT_PRESET);
    let subject = Circuit::from_ops(2, vec![GateOp::h(0), GateOp::cx(0, 1)]).unwrap();
    for seed in 0..5 {
        let rho = state_tomography(&Circuit::new(2).unwrap(), &subject, &sim, 50, seed).unwrap();
        assert!((rho.matrix().trace().re - 1.0).abs() <= 1e-9);
        let choi = process_tomography(&subject, &sim, 50, seed).unwrap();
        assert!((choi.matrix().trace().re - 4.0).abs() <= 1e-8);
    }
}

#[test]
fn reconstruction_fidelity_grows_with_shots() {
    let sim = DensityMatrixSimulator::noiseless();
    let subject = Circuit::from_ops(2, vec![GateOp::x(0), GateOp::h(0), GateOp::cx(0, 1)]).unwrap();
    let empty = Circuit::new(2).unwrap();
    let truth = sim.prepare(&subject).unwrap();
    let mut last = 0.0;
    for shots in [10u64, 100, 1000, 10000] {
        let mean = (0..20u64)
            .map(|seed| {
                let rho = state_tomography(&empty, &subject, &sim, shots, seed).unwrap();
                state_fidelity(&rho, &truth).unwrap()
            })
            .sum::<f64>()
            / 20.0;
        assert!(mean >= last, "{shots} shots: mean fidelity {mean} below {last}");
        last = mean;
    }
    assert!(last > 0.99);
}
