use super::state::{ChoiMatrix, DensityMatrix};
use crate::error::{Error, Result};
use crate::qmath::{hermitian_eig, ComplexMatrix};

/// Overshoot past `[0, 1]` tolerated before clamping.
pub const FIDELITY_CLAMP: f64 = 1e-6;

/// Eigenvalues below this fraction of the spectral radius are rounding noise.
///
/// The square root amplifies noise near zero (`√1e-16 = 1e-8`), so without
/// this cut a rank-deficient argument would carry ~1e-8 error into `F`.
const SPECTRAL_FLOOR: f64 = 1e-12;

fn floored_sqrt(values: &[f64]) -> Vec<f64> {
    let radius = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = SPECTRAL_FLOOR * radius;
    values
        .iter()
        .map(|&v| if v <= floor { 0.0 } else { v.sqrt() })
        .collect()
}

/// `[tr √(√a b √a)]²` for unit-trace PSD matrices of equal shape.
fn uhlmann(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::Dimension(format!(
            "fidelity of {}x{} and {}x{} matrices",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let eig_a = hermitian_eig(a)?;
    let roots = floored_sqrt(&eig_a.values);
    let sqrt_a = crate::qmath::EigenDecomposition {
        values: roots,
        vectors: eig_a.vectors,
    }
    .reconstruct();
    let inner = (&(&sqrt_a * b) * &sqrt_a).hermitian_part();
    let eig_inner = hermitian_eig(&inner)?;
    let root_trace: f64 = floored_sqrt(&eig_inner.values).iter().sum();
    let f = root_trace * root_trace;
    if !f.is_finite() || f > 1.0 + FIDELITY_CLAMP {
        return Err(Error::Numeric(format!("fidelity {f} outside [0, 1]")));
    }
    Ok(f.clamp(0.0, 1.0))
}

/// Uhlmann–Jozsa fidelity `F(ρ, σ) = [tr √(√ρ σ √ρ)]²`.
pub fn state_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.n_qubits() != sigma.n_qubits() {
        return Err(Error::Dimension(format!(
            "fidelity between {}-qubit and {}-qubit states",
            rho.n_qubits(),
            sigma.n_qubits()
        )));
    }
    uhlmann(rho.matrix(), sigma.matrix())
}

/// State fidelity of the trace-normalized Choi matrices.
pub fn process_fidelity(a: &ChoiMatrix, b: &ChoiMatrix) -> Result<f64> {
    if a.n_qubits() != b.n_qubits() {
        return Err(Error::Dimension(format!(
            "process fidelity between {}-qubit and {}-qubit channels",
            a.n_qubits(),
            b.n_qubits()
        )));
    }
    uhlmann(&a.normalized(), &b.normalized())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::circuit::{Circuit, GateOp};
    use crate::qcore::state::circuit_to_choi;
    use num_complex::Complex64;

    fn pure(v: &[f64]) -> DensityMatrix {
        let psi: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        DensityMatrix::from_pure(&psi).unwrap()
    }

    #[test]
    fn self_fidelity_is_one() {
        let rho = DensityMatrix::new(ComplexMatrix::diag_real(&[0.2, 0.3, 0.1, 0.4])).unwrap();
        assert!((state_fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-8);
        let bell = pure(&[1.0, 0.0, 0.0, -1.0]);
        assert!((state_fidelity(&bell, &bell).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn orthogonal_states_have_zero_fidelity() {
        assert!(state_fidelity(&pure(&[1.0, 0.0]), &pure(&[0.0, 1.0])).unwrap() < 1e-12);
    }

    #[test]
    fn faulty_against_bell_is_one_quarter() {
        let bell = pure(&[1.0, 0.0, 0.0, -1.0]);
        let faulty = pure(&[0.0, 1.0, 0.0, 1.0]);
        assert!((state_fidelity(&faulty, &bell).unwrap() - 0.25).abs() < 1e-8);
        assert!((state_fidelity(&bell, &faulty).unwrap() - 0.25).abs() < 1e-8);
    }

    #[test]
    fn dimension_mismatch() {
        let a = DensityMatrix::zero_state(1);
        let b = DensityMatrix::zero_state(2);
        assert!(matches!(state_fidelity(&a, &b), Err(Error::Dimension(_))));
    }

    #[test]
    fn process_fidelity_examples() {
        let id = circuit_to_choi(&Circuit::new(1).unwrap());
        let x = circuit_to_choi(&Circuit::from_ops(1, vec![GateOp::x(0)]).unwrap());
        assert!((process_fidelity(&id, &id).unwrap() - 1.0).abs() < 1e-8);
        assert!(process_fidelity(&id, &x).unwrap() < 1e-8);

        let correct = Circuit::from_ops(2, vec![GateOp::x(0), GateOp::h(0), GateOp::cx(0, 1)]).unwrap();
        let mutated = Circuit::from_ops(2, vec![GateOp::x(0), GateOp::h(1), GateOp::cx(0, 1)]).unwrap();
        let f = process_fidelity(&circuit_to_choi(&correct), &circuit_to_choi(&mutated)).unwrap();
        assert!(f < 1e-8, "{f}");
    }
}
