use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::circuit::{circuit_to_unitary, Circuit};
use crate::error::{Error, Result};
use crate::qmath::{hermitian_eig, partial_trace, ComplexMatrix, ONE, PSD_CLAMP};

/// Tolerance for Hermiticity and unit trace of states.
pub const STATE_TOLERANCE: f64 = 1e-9;
/// Tolerance for trace preservation of Choi matrices.
pub const TRACE_PRESERVATION_TOLERANCE: f64 = 1e-6;

fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::Dimension(format!(
            "dimension {dim} is not a power of two of at least 2"
        )));
    }
    Ok(dim.trailing_zeros() as usize)
}

fn check_psd(mat: &ComplexMatrix, what: &str) -> Result<()> {
    let residual = mat.hermitian_residual();
    if residual > STATE_TOLERANCE {
        return Err(Error::InvalidState(format!(
            "{what} is not Hermitian (residual {residual:e})"
        )));
    }
    let eig = hermitian_eig(mat)?;
    let lowest = eig.values[0];
    if lowest < -PSD_CLAMP {
        return Err(Error::InvalidState(format!(
            "{what} has negative eigenvalue {lowest:e}"
        )));
    }
    Ok(())
}

/// A mixed state on `n` qubits: Hermitian, positive semidefinite, unit trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexMatrix", into = "ComplexMatrix")]
pub struct DensityMatrix {
    n_qubits: usize,
    mat: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::Dimension(format!(
                "density matrix must be square, got {}x{}",
                mat.rows(),
                mat.cols()
            )));
        }
        let n_qubits = qubits_for_dim(mat.rows())?;
        let tr = mat.trace();
        if (tr - ONE).norm() > STATE_TOLERANCE {
            return Err(Error::InvalidState(format!(
                "density matrix trace is {tr}, expected 1"
            )));
        }
        check_psd(&mat, "density matrix")?;
        Ok(Self { n_qubits, mat })
    }

    /// Skips validation; for matrices that are valid by construction.
    pub(crate) fn from_trusted(n_qubits: usize, mat: ComplexMatrix) -> Self {
        debug_assert_eq!(mat.rows(), 1 << n_qubits);
        Self { n_qubits, mat }
    }

    /// `|0…0⟩⟨0…0|`.
    pub fn zero_state(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let mut mat = ComplexMatrix::zeros(dim, dim);
        mat[(0, 0)] = ONE;
        Self { n_qubits, mat }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        Self {
            n_qubits,
            mat: ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64),
        }
    }

    /// `|ψ⟩⟨ψ|` for a state vector, normalized first.
    pub fn from_pure(psi: &[Complex64]) -> Result<Self> {
        let n_qubits = qubits_for_dim(psi.len())?;
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let unit: Vec<Complex64> = psi.iter().map(|z| z / norm).collect();
        Ok(Self {
            n_qubits,
            mat: ComplexMatrix::outer(&unit, &unit),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    /// `tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        let m = &self.mat;
        let n = m.rows();
        let mut acc = 0.0;
        for r in 0..n {
            for c in 0..n {
                acc += m[(r, c)].norm_sqr();
            }
        }
        acc
    }

    /// Real diagonal, i.e. computational-basis probabilities before cleanup.
    pub fn populations(&self) -> Vec<f64> {
        self.mat.diagonal().iter().map(|z| z.re).collect()
    }
}

impl TryFrom<ComplexMatrix> for DensityMatrix {
    type Error = Error;

    fn try_from(mat: ComplexMatrix) -> Result<Self> {
        Self::new(mat)
    }
}

impl From<DensityMatrix> for ComplexMatrix {
    fn from(d: DensityMatrix) -> Self {
        d.mat
    }
}

/// Unnormalized Choi matrix `C = Σ_ij |i⟩⟨j| ⊗ Φ(|i⟩⟨j|)` of an `n`-qubit channel.
///
/// The input factor is the most significant half of the index, so in the
/// `2n`-qubit little-endian picture the output occupies qubits `0..n` and
/// the input qubits `n..2n`. Trace-preserving channels have trace `2^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexMatrix", into = "ComplexMatrix")]
pub struct ChoiMatrix {
    n_qubits: usize,
    mat: ComplexMatrix,
}

impl ChoiMatrix {
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::Dimension(format!(
                "Choi matrix must be square, got {}x{}",
                mat.rows(),
                mat.cols()
            )));
        }
        let doubled = qubits_for_dim(mat.rows())?;
        if doubled % 2 != 0 {
            return Err(Error::Dimension(format!(
                "Choi matrix dimension {} is not 4^n",
                mat.rows()
            )));
        }
        check_psd(&mat, "Choi matrix")?;
        Ok(Self {
            n_qubits: doubled / 2,
            mat,
        })
    }

    pub(crate) fn from_trusted(n_qubits: usize, mat: ComplexMatrix) -> Self {
        debug_assert_eq!(mat.rows(), 1 << (2 * n_qubits));
        Self { n_qubits, mat }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    /// `C / 2^n`, a density matrix on `2n` qubits for trace-preserving channels.
    pub fn normalized(&self) -> ComplexMatrix {
        self.mat.scale_real(1.0 / (1u64 << self.n_qubits) as f64)
    }

    /// Max-norm distance between the output-traced Choi matrix and the identity.
    pub fn trace_preservation_residual(&self) -> f64 {
        let n = self.n_qubits;
        let input: Vec<usize> = (n..2 * n).collect();
        let reduced = partial_trace(&self.mat, 2 * n, &input).expect("Choi shape is 4^n");
        reduced.max_abs_diff(&ComplexMatrix::identity(1 << n))
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preservation_residual() <= TRACE_PRESERVATION_TOLERANCE
    }
}

impl TryFrom<ComplexMatrix> for ChoiMatrix {
    type Error = Error;

    fn try_from(mat: ComplexMatrix) -> Result<Self> {
        Self::new(mat)
    }
}

impl From<ChoiMatrix> for ComplexMatrix {
    fn from(c: ChoiMatrix) -> Self {
        c.mat
    }
}

/// Choi matrix `(I ⊗ U) Ω (I ⊗ U)^H` of a circuit's unitary.
pub fn circuit_to_choi(c: &Circuit) -> ChoiMatrix {
    let u = circuit_to_unitary(c);
    unitary_to_choi(&u, c.n_qubits())
}

pub(crate) fn unitary_to_choi(u: &ComplexMatrix, n_qubits: usize) -> ChoiMatrix {
    let d = u.rows();
    let mut mat = ComplexMatrix::zeros(d * d, d * d);
    // C[(i, k), (j, l)] = U[k, i] conj(U[l, j])
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let a = u[(k, i)];
                for l in 0..d {
                    mat[(i * d + k, j * d + l)] = a * u[(l, j)].conj();
                }
            }
        }
    }
    ChoiMatrix::from_trusted(n_qubits, mat)
}

/// Probabilities over `2^n` outcomes; index bit `k` is qubit `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct OutcomeDistribution {
    n_qubits: usize,
    probs: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let n_qubits = qubits_for_dim(probs.len())?;
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidState(format!("invalid probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > STATE_TOLERANCE {
            return Err(Error::InvalidState(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self { n_qubits, probs })
    }

    /// Clamps values in `(-1e-9, 0)` to zero and renormalizes.
    pub fn from_unnormalized(raw: &[f64]) -> Result<Self> {
        let n_qubits = qubits_for_dim(raw.len())?;
        if let Some(p) = raw.iter().find(|p| !p.is_finite() || **p < -STATE_TOLERANCE) {
            return Err(Error::Numeric(format!("negative probability {p}")));
        }
        let clamped: Vec<f64> = raw.iter().map(|p| p.max(0.0)).collect();
        let total: f64 = clamped.iter().sum();
        if total <= 0.0 {
            return Err(Error::Numeric("distribution has no mass".into()));
        }
        Ok(Self {
            n_qubits,
            probs: clamped.iter().map(|p| p / total).collect(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

impl TryFrom<Vec<f64>> for OutcomeDistribution {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<OutcomeDistribution> for Vec<f64> {
    fn from(d: OutcomeDistribution) -> Self {
        d.probs
    }
}

/// Most-significant-qubit-first bitstring of an outcome index.
pub fn bitstring(index: usize, n_qubits: usize) -> String {
    (0..n_qubits)
        .rev()
        .map(|q| if index >> q & 1 == 1 { '1' } else { '0' })
        .collect()
}
