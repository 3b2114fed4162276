//! State and process tomography by linear inversion over Pauli measurements.
//!
//! State tomography measures every qubit in each of the X, Y and Z bases
//! (`3^n` settings), estimates all `4^n - 1` non-trivial Pauli expectations and
//! inverts `ρ = 2^-n Σ_P ⟨P⟩ P`. Process tomography runs state tomography on
//! the channel output for each of the `4^n` product inputs drawn from
//! `{|0⟩, |1⟩, |+⟩, |+i⟩}` and assembles the Choi matrix through the dual of
//! that preparation frame. Both estimates are projected back onto the
//! physical set with [`psd_project`].

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{ChoiMatrix, Circuit, DensityMatrix, Gate, GateOp};
use crate::qmath::{kron, psd_project, ComplexMatrix};
use crate::seed;
use crate::simulator::Backend;

pub const MAX_STATE_QUBITS: usize = 4;
pub const MAX_PROCESS_QUBITS: usize = 3;

/// Shots per setting; zero selects infinite-shot analytic mode.
pub type ShotsPerSetting = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliBasis {
    X,
    Y,
    Z,
}

impl PauliBasis {
    pub const ALL: [PauliBasis; 3] = [PauliBasis::X, PauliBasis::Y, PauliBasis::Z];

    /// Gates mapping this basis onto the computational basis.
    fn rotation(self, qubit: usize) -> Vec<GateOp> {
        match self {
            PauliBasis::X => vec![GateOp::h(qubit)],
            PauliBasis::Y => vec![GateOp::sdg(qubit), GateOp::h(qubit)],
            PauliBasis::Z => vec![],
        }
    }

    /// Pauli code used in strings: I = 0, X = 1, Y = 2, Z = 3.
    fn code(self) -> usize {
        match self {
            PauliBasis::X => 1,
            PauliBasis::Y => 2,
            PauliBasis::Z => 3,
        }
    }
}

/// One product measurement basis and the circuit rotating it to Z.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSetting {
    pub bases: Vec<PauliBasis>,
    pub rotation: Circuit,
}

impl MeasurementSetting {
    /// Setting `index` in base-3 with qubit 0 as the least significant digit.
    pub fn from_index(index: usize, n_qubits: usize) -> Result<Self> {
        let mut rest = index;
        let bases: Vec<PauliBasis> = (0..n_qubits)
            .map(|_| {
                let b = PauliBasis::ALL[rest % 3];
                rest /= 3;
                b
            })
            .collect();
        let mut rotation = Circuit::new(n_qubits)?;
        for (q, b) in bases.iter().enumerate() {
            for op in b.rotation(q) {
                rotation.push(op)?;
            }
        }
        Ok(Self { bases, rotation })
    }

    pub fn all(n_qubits: usize) -> Result<Vec<Self>> {
        (0..3usize.pow(n_qubits as u32))
            .map(|i| Self::from_index(i, n_qubits))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PrepLabel {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "+i")]
    PlusI,
}

impl PrepLabel {
    pub const ALL: [PrepLabel; 4] = [PrepLabel::Zero, PrepLabel::One, PrepLabel::Plus, PrepLabel::PlusI];

    fn gates(self, qubit: usize) -> Vec<GateOp> {
        match self {
            PrepLabel::Zero => vec![],
            PrepLabel::One => vec![GateOp::x(qubit)],
            PrepLabel::Plus => vec![GateOp::h(qubit)],
            PrepLabel::PlusI => vec![GateOp::h(qubit), GateOp::s(qubit)],
        }
    }

    /// Pauli coefficients `(I, X, Y, Z)` of the prepared projector.
    fn pauli_coefficients(self) -> [f64; 4] {
        match self {
            PrepLabel::Zero => [0.5, 0.0, 0.0, 0.5],
            PrepLabel::One => [0.5, 0.0, 0.0, -0.5],
            PrepLabel::Plus => [0.5, 0.5, 0.0, 0.0],
            PrepLabel::PlusI => [0.5, 0.0, 0.5, 0.0],
        }
    }
}

/// One product input state and the circuit preparing it from `|0…0⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparationSetting {
    pub labels: Vec<PrepLabel>,
    pub prep: Circuit,
}

impl PreparationSetting {
    /// Preparation `index` in base-4 with qubit 0 as the least significant digit.
    pub fn from_index(index: usize, n_qubits: usize) -> Result<Self> {
        let labels: Vec<PrepLabel> = (0..n_qubits)
            .map(|q| PrepLabel::ALL[index >> (2 * q) & 3])
            .collect();
        let mut prep = Circuit::new(n_qubits)?;
        for (q, l) in labels.iter().enumerate() {
            for op in l.gates(q) {
                prep.push(op)?;
            }
        }
        Ok(Self { labels, prep })
    }

    pub fn all(n_qubits: usize) -> Result<Vec<Self>> {
        (0..1usize << (2 * n_qubits))
            .map(|i| Self::from_index(i, n_qubits))
            .collect()
    }
}

fn single_pauli(code: usize) -> ComplexMatrix {
    match code {
        0 => ComplexMatrix::identity(2),
        1 => Gate::X.matrix(),
        2 => Gate::Y.matrix(),
        _ => Gate::Z.matrix(),
    }
}

/// Pauli string matrix for `index = Σ code_q 4^q`; qubit 0 is the last Kronecker factor.
pub fn pauli_string(index: usize, n_qubits: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::identity(1);
    for q in (0..n_qubits).rev() {
        m = kron(&m, &single_pauli(index >> (2 * q) & 3));
    }
    m
}

fn pauli_codes(index: usize, n_qubits: usize) -> Vec<usize> {
    (0..n_qubits).map(|q| index >> (2 * q) & 3).collect()
}

/// Estimates every Pauli expectation from per-setting outcome frequencies.
///
/// Each expectation pools all settings whose bases agree with the string on
/// its support; identity positions are marginalized.
fn pauli_expectations(settings: &[MeasurementSetting], frequencies: &[Vec<f64>], n_qubits: usize) -> Vec<f64> {
    let n_strings = 1usize << (2 * n_qubits);
    let mut out = vec![0.0; n_strings];
    out[0] = 1.0;
    for (index, value) in out.iter_mut().enumerate().skip(1) {
        let codes = pauli_codes(index, n_qubits);
        let support_mask: usize = codes
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(q, _)| 1usize << q)
            .sum();
        let mut total = 0.0;
        let mut used = 0usize;
        for (setting, freqs) in settings.iter().zip(frequencies) {
            let compatible = codes
                .iter()
                .zip(&setting.bases)
                .all(|(&c, b)| c == 0 || c == b.code());
            if !compatible {
                continue;
            }
            used += 1;
            total += freqs
                .iter()
                .enumerate()
                .map(|(outcome, f)| {
                    if (outcome & support_mask).count_ones().is_multiple_of(2) {
                        *f
                    } else {
                        -*f
                    }
                })
                .sum::<f64>();
        }
        *value = total / used as f64;
    }
    out
}

fn collect_frequencies(
    backend: &dyn Backend,
    base: &Circuit,
    settings: &[MeasurementSetting],
    shots_per_setting: ShotsPerSetting,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let rotations: Vec<Circuit> = settings.iter().map(|s| s.rotation.clone()).collect();
    if shots_per_setting == 0 {
        Ok(backend
            .probabilities_batch(base, &rotations)?
            .into_iter()
            .map(|d| d.probs().to_vec())
            .collect())
    } else {
        let seeds: Vec<u64> = (0..settings.len()).map(|i| seed::derive(seed, &[i as u64])).collect();
        Ok(backend
            .execute_batch(base, &rotations, shots_per_setting, &seeds)?
            .iter()
            .map(|c| c.frequencies())
            .collect())
    }
}

/// Linear-inversion estimate before physicality is restored.
fn linear_inversion(expectations: &[f64], n_qubits: usize) -> ComplexMatrix {
    let dim = 1usize << n_qubits;
    let mut rho = ComplexMatrix::zeros(dim, dim);
    for (index, &e) in expectations.iter().enumerate() {
        if e != 0.0 {
            rho = &rho + &pauli_string(index, n_qubits).scale_real(e);
        }
    }
    rho.scale_real(1.0 / dim as f64)
}

/// Reconstructs the output state of `prep` followed by `subject`.
///
/// `shots_per_setting == 0` uses exact outcome probabilities, making the
/// reconstruction exact up to rounding.
pub fn state_tomography(
    prep: &Circuit,
    subject: &Circuit,
    backend: &dyn Backend,
    shots_per_setting: ShotsPerSetting,
    seed: u64,
) -> Result<DensityMatrix> {
    let n = subject.n_qubits();
    if n > MAX_STATE_QUBITS {
        return Err(Error::SizeLimit(format!(
            "state tomography supports at most {MAX_STATE_QUBITS} qubits, got {n}"
        )));
    }
    let base = prep.then(subject)?;
    let settings = MeasurementSetting::all(n)?;
    let frequencies = collect_frequencies(backend, &base, &settings, shots_per_setting, seed)?;
    let expectations = pauli_expectations(&settings, &frequencies, n);
    let raw = linear_inversion(&expectations, n);
    let physical = psd_project(&raw, 1.0)?;
    DensityMatrix::new(physical).map_err(|e| Error::Numeric(format!("reconstructed state invalid: {e}")))
}

/// Inverse of the single-qubit preparation frame in Pauli coordinates.
///
/// Row `k` holds the coefficients expressing each Pauli `σ_a = Σ_k inv[k][a] ρ_k`.
fn inverse_frame() -> [[f64; 4]; 4] {
    // frame[a][k]: coefficient of σ_a in ρ_k.
    let mut frame = [[0.0; 4]; 4];
    for (k, label) in PrepLabel::ALL.iter().enumerate() {
        for (a, c) in label.pauli_coefficients().iter().enumerate() {
            frame[a][k] = *c;
        }
    }
    let mut aug = [[0.0; 8]; 4];
    for r in 0..4 {
        aug[r][..4].copy_from_slice(&frame[r]);
        aug[r][4 + r] = 1.0;
    }
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs()))
            .expect("non-empty range");
        assert!(
            aug[pivot][col].abs() > 1e-12,
            "preparation frame is singular; the fixed input set must be informationally complete"
        );
        aug.swap(col, pivot);
        let p = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= p;
        }
        for r in 0..4 {
            if r != col {
                let f = aug[r][col];
                if f != 0.0 {
                    for c in 0..8 {
                        aug[r][c] -= f * aug[col][c];
                    }
                }
            }
        }
    }
    let mut inv = [[0.0; 4]; 4];
    for r in 0..4 {
        inv[r].copy_from_slice(&aug[r][4..]);
    }
    inv
}

/// Reconstructs the unnormalized Choi matrix of `subject`.
pub fn process_tomography(
    subject: &Circuit,
    backend: &dyn Backend,
    shots_per_setting: ShotsPerSetting,
    seed: u64,
) -> Result<ChoiMatrix> {
    let n = subject.n_qubits();
    if n > MAX_PROCESS_QUBITS {
        return Err(Error::SizeLimit(format!(
            "process tomography supports at most {MAX_PROCESS_QUBITS} qubits, got {n}"
        )));
    }
    let dim = 1usize << n;
    let preparations = PreparationSetting::all(n)?;
    let outputs: Vec<DensityMatrix> = preparations
        .par_iter()
        .enumerate()
        .map(|(k, p)| state_tomography(&p.prep, subject, backend, shots_per_setting, seed::derive(seed, &[k as u64])))
        .collect::<Result<_>>()?;

    let inv = inverse_frame();
    let n_strings = 1usize << (2 * n);
    let mut choi = ComplexMatrix::zeros(dim * dim, dim * dim);
    for a in 0..n_strings {
        let a_codes = pauli_codes(a, n);
        // Φ(σ_a) = Σ_k Π_q inv[k_q][a_q] ρ_out(k)
        let mut image = ComplexMatrix::zeros(dim, dim);
        for (k, out) in outputs.iter().enumerate() {
            let weight: f64 = a_codes
                .iter()
                .enumerate()
                .map(|(q, &aq)| inv[k >> (2 * q) & 3][aq])
                .product();
            if weight != 0.0 {
                image = &image + &out.matrix().scale_real(weight);
            }
        }
        // C = 2^-n Σ_a σ_a^T ⊗ Φ(σ_a)
        choi = &choi + &kron(&pauli_string(a, n).transpose(), &image);
    }
    let choi = choi.scale(Complex64::new(1.0 / dim as f64, 0.0));
    let physical = psd_project(&choi.hermitian_part(), dim as f64)?;
    ChoiMatrix::new(physical).map_err(|e| Error::Numeric(format!("reconstructed Choi matrix invalid: {e}")))
}

/// Number of measurement settings used by state tomography on `n` qubits.
pub fn state_settings_count(n_qubits: usize) -> usize {
    3usize.pow(n_qubits as u32)
}

/// Number of preparations used by process tomography on `n` qubits.
pub fn process_preparations_count(n_qubits: usize) -> usize {
    1usize << (2 * n_qubits)
}
