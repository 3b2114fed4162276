//! Seeded random inputs for randomized testing.

use num_complex::Complex64;
use rand::Rng;

use crate::qcore::{Circuit, DensityMatrix, GateOp};
use crate::qmath::ComplexMatrix;

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box–Muller; 1 - u keeps the logarithm finite.
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    (-2.0 * (1.0 - u).ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(gaussian(rng), gaussian(rng))
}

/// Haar-random unit vector of length `2^n`.
pub fn random_state_vector<R: Rng + ?Sized>(rng: &mut R, n_qubits: usize) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..1usize << n_qubits).map(|_| complex_gaussian(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// Mixed state `G G† / tr(G G†)` with `G` a `2^n × rank` Ginibre matrix.
pub fn random_density_matrix<R: Rng + ?Sized>(rng: &mut R, n_qubits: usize, rank: usize) -> DensityMatrix {
    let dim = 1usize << n_qubits;
    let rank = rank.clamp(1, dim);
    let g = ComplexMatrix::from_vec(dim, rank, (0..dim * rank).map(|_| complex_gaussian(rng)).collect())
        .expect("shape matches data");
    let m = &g * &g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::new(m.scale_real(1.0 / tr).hermitian_part()).expect("Ginibre construction is a valid state")
}

/// Hermitian matrix with independent Gaussian entries.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let g = ComplexMatrix::from_vec(dim, dim, (0..dim * dim).map(|_| complex_gaussian(rng)).collect())
        .expect("shape matches data");
    g.hermitian_part()
}

/// Uniformly drawn gate sequence over the whole gate set.
pub fn random_circuit<R: Rng + ?Sized>(rng: &mut R, n_qubits: usize, len: usize) -> Circuit {
    let mut c = Circuit::new(n_qubits).expect("valid register size");
    for _ in 0..len {
        let q = rng.random_range(0..n_qubits);
        let two_qubit = n_qubits > 1 && rng.random_bool(0.3);
        let op = if two_qubit {
            let mut r = rng.random_range(0..n_qubits - 1);
            if r >= q {
                r += 1;
            }
            match rng.random_range(0..3) {
                0 => GateOp::cx(q, r),
                1 => GateOp::cz(q, r),
                _ => GateOp::swap(q, r),
            }
        } else {
            let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            match rng.random_range(0..11) {
                0 => GateOp::x(q),
                1 => GateOp::y(q),
                2 => GateOp::z(q),
                3 => GateOp::h(q),
                4 => GateOp::s(q),
                5 => GateOp::sdg(q),
                6 => GateOp::t(q),
                7 => GateOp::tdg(q),
                8 => GateOp::rx(q, theta),
                9 => GateOp::ry(q, theta),
                _ => GateOp::rz(q, theta),
            }
        };
        c.push(op).expect("qubits in range");
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generators_respect_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = random_state_vector(&mut rng, 3);
        assert_eq!(psi.len(), 8);
        assert!((psi.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-12);
        let rho = random_density_matrix(&mut rng, 2, 4);
        assert!((rho.matrix().trace().re - 1.0).abs() < 1e-12);
        assert!(random_hermitian(&mut rng, 5).hermitian_residual() == 0.0);
        let c = random_circuit(&mut rng, 3, 10);
        assert_eq!(c.len(), 10);
    }
}
