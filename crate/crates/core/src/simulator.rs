//! Density-matrix backend with gate-attached parametric noise and seeded sampling.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{local, Circuit, DensityMatrix, Gate, OutcomeDistribution};
use crate::qmath::{ComplexMatrix, ONE, ZERO};

/// Probabilities below `-NEGATIVE_PROBABILITY` are a numeric failure; smaller ones clamp.
pub const NEGATIVE_PROBABILITY: f64 = 1e-9;

/// Gate-attached noise: after every gate, a depolarizing channel on the gate's
/// qubits and, for single-qubit gates, amplitude damping on the target.
/// Readout flips act independently per qubit per shot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    #[serde(default)]
    pub depolarizing_1q: f64,
    #[serde(default)]
    pub depolarizing_2q: f64,
    #[serde(default)]
    pub amplitude_damping: f64,
    #[serde(default)]
    pub readout_flip: f64,
}

impl NoiseModel {
    /// Named preset representative of current superconducting devices.
    pub const DEFAULT_PRESET: NoiseModel = NoiseModel {
        depolarizing_1q: 0.001,
        depolarizing_2q: 0.01,
        amplitude_damping: 0.001,
        readout_flip: 0.02,
    };

    pub const NOISELESS: NoiseModel = NoiseModel {
        depolarizing_1q: 0.0,
        depolarizing_2q: 0.0,
        amplitude_damping: 0.0,
        readout_flip: 0.0,
    };

    pub fn new(
        depolarizing_1q: f64,
        depolarizing_2q: f64,
        amplitude_damping: f64,
        readout_flip: f64,
    ) -> Result<Self> {
        let m = Self {
            depolarizing_1q,
            depolarizing_2q,
            amplitude_damping,
            readout_flip,
        };
        m.validate()?;
        Ok(m)
    }

    /// `"default"` or `"none"`.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "default" => Some(Self::DEFAULT_PRESET),
            "none" | "noiseless" => Some(Self::NOISELESS),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("depolarizing_1q", self.depolarizing_1q),
            ("depolarizing_2q", self.depolarizing_2q),
            ("amplitude_damping", self.amplitude_damping),
            ("readout_flip", self.readout_flip),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!("noise parameter {name}={v} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        *self == Self::NOISELESS
    }
}

/// Shot tallies keyed by little-endian outcome index; zero bins are omitted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    n_qubits: usize,
    tallies: BTreeMap<usize, u64>,
    shots: u64,
}

impl Counts {
    pub fn from_tallies(n_qubits: usize, tallies: BTreeMap<usize, u64>) -> Result<Self> {
        if let Some(&bad) = tallies.keys().find(|&&k| k >= 1usize << n_qubits) {
            return Err(Error::Index { index: bad, n_qubits });
        }
        let tallies: BTreeMap<usize, u64> = tallies.into_iter().filter(|&(_, v)| v > 0).collect();
        let shots = tallies.values().sum();
        Ok(Self {
            n_qubits,
            tallies,
            shots,
        })
    }

    pub fn from_dense(n_qubits: usize, dense: &[u64]) -> Result<Self> {
        if dense.len() != 1usize << n_qubits {
            return Err(Error::Dimension(format!(
                "{} bins for {n_qubits} qubits",
                dense.len()
            )));
        }
        Self::from_tallies(n_qubits, dense.iter().copied().enumerate().collect())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn tallies(&self) -> &BTreeMap<usize, u64> {
        &self.tallies
    }

    pub fn get(&self, outcome: usize) -> u64 {
        self.tallies.get(&outcome).copied().unwrap_or(0)
    }

    pub fn to_dense(&self) -> Vec<u64> {
        let mut out = vec![0; 1 << self.n_qubits];
        for (&k, &v) in &self.tallies {
            out[k] = v;
        }
        out
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.shots.max(1) as f64;
        self.to_dense().iter().map(|&c| c as f64 / n).collect()
    }

    /// Tallies over the listed qubits only; `qubits[j]` becomes bit `j`.
    pub fn marginal(&self, qubits: &[usize]) -> Result<Counts> {
        if let Some(&bad) = qubits.iter().find(|&&q| q >= self.n_qubits) {
            return Err(Error::Index {
                index: bad,
                n_qubits: self.n_qubits,
            });
        }
        let mut out = BTreeMap::new();
        for (&k, &v) in &self.tallies {
            let local: usize = qubits
                .iter()
                .enumerate()
                .map(|(j, &q)| (k >> q & 1) << j)
                .sum();
            *out.entry(local).or_insert(0) += v;
        }
        Counts::from_tallies(qubits.len(), out)
    }
}

fn pauli_matrices() -> [ComplexMatrix; 4] {
    [
        ComplexMatrix::identity(2),
        Gate::X.matrix(),
        Gate::Y.matrix(),
        Gate::Z.matrix(),
    ]
}

/// `(1 - p) ρ + p/4^k Σ_P P ρ P` over all Pauli strings on `qubits`.
fn depolarize(mat: &mut ComplexMatrix, qubits: &[usize], p: f64, n_qubits: usize) {
    if p == 0.0 {
        return;
    }
    let paulis = pauli_matrices();
    let k = qubits.len();
    let weight = p / (1u64 << (2 * k)) as f64;
    let mut acc = mat.scale_real(1.0 - p);
    for code in 0..1usize << (2 * k) {
        let mut term = mat.clone();
        for (j, &q) in qubits.iter().enumerate() {
            let which = code >> (2 * j) & 3;
            if which != 0 {
                local::conjugate(&mut term, &paulis[which], &[q], n_qubits);
            }
        }
        acc = &acc + &term.scale_real(weight);
    }
    *mat = acc;
}

/// Amplitude damping with decay probability `gamma` on one qubit.
fn amplitude_damp(mat: &mut ComplexMatrix, qubit: usize, gamma: f64, n_qubits: usize) {
    if gamma == 0.0 {
        return;
    }
    let k0 = ComplexMatrix::from_vec(
        2,
        2,
        vec![ONE, ZERO, ZERO, Complex64::new((1.0 - gamma).sqrt(), 0.0)],
    )
    .expect("2x2 Kraus");
    let k1 = ComplexMatrix::from_vec(2, 2, vec![ZERO, Complex64::new(gamma.sqrt(), 0.0), ZERO, ZERO])
        .expect("2x2 Kraus");
    let mut decayed = mat.clone();
    local::conjugate(mat, &k0, &[qubit], n_qubits);
    local::conjugate(&mut decayed, &k1, &[qubit], n_qubits);
    *mat = &*mat + &decayed;
}

/// Evolves a state through a circuit, applying noise after each gate.
pub fn evolve(input: &DensityMatrix, c: &Circuit, noise: Option<&NoiseModel>) -> Result<DensityMatrix> {
    let n = c.n_qubits();
    if input.n_qubits() != n {
        return Err(Error::Dimension(format!(
            "{}-qubit state through a {n}-qubit circuit",
            input.n_qubits()
        )));
    }
    if let Some(m) = noise {
        m.validate()?;
    }
    let mut mat = input.matrix().clone();
    for op in c.ops() {
        local::conjugate(&mut mat, &op.gate.matrix(), &op.qubits, n);
        if let Some(m) = noise {
            let p = if op.qubits.len() == 1 {
                m.depolarizing_1q
            } else {
                m.depolarizing_2q
            };
            depolarize(&mut mat, &op.qubits, p, n);
            if op.qubits.len() == 1 {
                amplitude_damp(&mut mat, op.qubits[0], m.amplitude_damping, n);
            }
        }
    }
    Ok(DensityMatrix::from_trusted(n, mat.hermitian_part()))
}

fn clean_probabilities(raw: &[f64]) -> Result<Vec<f64>> {
    if let Some(p) = raw.iter().find(|p| !p.is_finite() || **p < -NEGATIVE_PROBABILITY) {
        return Err(Error::Numeric(format!("negative outcome probability {p}")));
    }
    let clamped: Vec<f64> = raw.iter().map(|p| p.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if total <= 0.0 {
        return Err(Error::Numeric("state has zero trace".into()));
    }
    Ok(clamped.into_iter().map(|p| p / total).collect())
}

/// Noiseless computational-basis distribution after an optional basis rotation.
pub fn exact_distribution(state: &DensityMatrix, premeasure: Option<&Circuit>) -> Result<OutcomeDistribution> {
    let rotated;
    let state = match premeasure {
        Some(c) => {
            rotated = evolve(state, c, None)?;
            &rotated
        }
        None => state,
    };
    OutcomeDistribution::from_unnormalized(&state.populations())
}

/// Draws `shots` terminal full-register measurements.
///
/// The generator is owned by the call and seeded from `seed`, so identical
/// arguments always give identical counts.
pub fn sample(
    state: &DensityMatrix,
    premeasure: Option<&Circuit>,
    shots: u64,
    seed: u64,
    noise: Option<&NoiseModel>,
) -> Result<Counts> {
    if shots == 0 {
        return Err(Error::Validation("shots must be at least 1".into()));
    }
    let rotated;
    let state = match premeasure {
        Some(c) => {
            rotated = evolve(state, c, noise)?;
            &rotated
        }
        None => state,
    };
    let n = state.n_qubits();
    let probs = clean_probabilities(&state.populations())?;
    let mut cumulative = Vec::with_capacity(probs.len());
    let mut running = 0.0;
    for p in &probs {
        running += p;
        cumulative.push(running);
    }
    let last_nonzero = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    let flip = noise.map_or(0.0, |m| m.readout_flip);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dense = vec![0u64; probs.len()];
    for _ in 0..shots {
        let u: f64 = rng.random();
        let mut outcome = cumulative.partition_point(|&c| c <= u).min(last_nonzero);
        // Rounding can leave the cumulative sum a hair below 1; never land on an empty bin.
        while probs[outcome] == 0.0 {
            outcome -= 1;
        }
        if flip > 0.0 {
            for q in 0..n {
                if rng.random::<f64>() < flip {
                    outcome ^= 1 << q;
                }
            }
        }
        dense[outcome] += 1;
    }
    Counts::from_dense(n, &dense)
}

/// Execution seam between protocols and whatever runs circuits.
///
/// Every circuit starts from `|0…0⟩` and ends in a full-register measurement.
pub trait Backend: Send + Sync {
    fn name(&self) -> &str;

    fn execute(&self, circuit: &Circuit, shots: u64, seed: u64) -> Result<Counts>;

    /// Infinite-shot outcome probabilities.
    fn probabilities(&self, circuit: &Circuit) -> Result<OutcomeDistribution>;

    /// Runs `base` followed by each rotation. `seeds[i]` seeds rotation `i`.
    fn execute_batch(&self, base: &Circuit, rotations: &[Circuit], shots: u64, seeds: &[u64]) -> Result<Vec<Counts>> {
        rotations
            .iter()
            .zip(seeds)
            .map(|(r, &s)| self.execute(&base.then(r)?, shots, s))
            .collect()
    }

    fn probabilities_batch(&self, base: &Circuit, rotations: &[Circuit]) -> Result<Vec<OutcomeDistribution>> {
        rotations
            .iter()
            .map(|r| self.probabilities(&base.then(r)?))
            .collect()
    }
}

/// The embedded density-matrix simulator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DensityMatrixSimulator {
    pub noise: Option<NoiseModel>,
}

impl DensityMatrixSimulator {
    pub fn noiseless() -> Self {
        Self { noise: None }
    }

    pub fn with_noise(noise: NoiseModel) -> Self {
        Self { noise: Some(noise) }
    }

    fn noise(&self) -> Option<&NoiseModel> {
        self.noise.as_ref().filter(|m| !m.is_noiseless())
    }

    /// Output state of a circuit run on `|0…0⟩`.
    pub fn prepare(&self, circuit: &Circuit) -> Result<DensityMatrix> {
        evolve(&DensityMatrix::zero_state(circuit.n_qubits()), circuit, self.noise())
    }

    /// Readout flips folded into a distribution analytically.
    fn with_readout(&self, dist: OutcomeDistribution) -> Result<OutcomeDistribution> {
        let flip = self.noise().map_or(0.0, |m| m.readout_flip);
        if flip == 0.0 {
            return Ok(dist);
        }
        let n = dist.n_qubits();
        let mut probs = dist.probs().to_vec();
        for q in 0..n {
            let bit = 1usize << q;
            for i in 0..probs.len() {
                if i & bit == 0 {
                    let (a, b) = (probs[i], probs[i | bit]);
                    probs[i] = (1.0 - flip) * a + flip * b;
                    probs[i | bit] = flip * a + (1.0 - flip) * b;
                }
            }
        }
        OutcomeDistribution::from_unnormalized(&probs)
    }
}

impl Backend for DensityMatrixSimulator {
    fn name(&self) -> &str {
        "density_matrix_simulator"
    }

    fn execute(&self, circuit: &Circuit, shots: u64, seed: u64) -> Result<Counts> {
        let state = self.prepare(circuit)?;
        sample(&state, None, shots, seed, self.noise())
    }

    fn probabilities(&self, circuit: &Circuit) -> Result<OutcomeDistribution> {
        let state = self.prepare(circuit)?;
        self.with_readout(exact_distribution(&state, None)?)
    }

    fn execute_batch(&self, base: &Circuit, rotations: &[Circuit], shots: u64, seeds: &[u64]) -> Result<Vec<Counts>> {
        let state = self.prepare(base)?;
        rotations
            .iter()
            .zip(seeds)
            .map(|(r, &s)| sample(&state, Some(r), shots, s, self.noise()))
            .collect()
    }

    fn probabilities_batch(&self, base: &Circuit, rotations: &[Circuit]) -> Result<Vec<OutcomeDistribution>> {
        let state = self.prepare(base)?;
        rotations
            .iter()
            .map(|r| {
                let rotated = evolve(&state, r, self.noise())?;
                self.with_readout(exact_distribution(&rotated, None)?)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{circuit_to_unitary, GateOp};

    fn bell() -> Circuit {
        Circuit::from_ops(2, vec![GateOp::x(0), GateOp::h(0), GateOp::cx(0, 1)]).unwrap()
    }

    fn mutated() -> Circuit {
        Circuit::from_ops(2, vec![GateOp::x(0), GateOp::h(1), GateOp::cx(0, 1)]).unwrap()
    }

    #[test]
    fn empty_circuit_leaves_state_unchanged() {
        let rho = DensityMatrix::new(ComplexMatrix::diag_real(&[0.25, 0.75])).unwrap();
        let out = evolve(&rho, &Circuit::new(1).unwrap(), None).unwrap();
        assert_eq!(out.matrix(), rho.matrix());
    }

    #[test]
    fn bell_subroutine_state() {
        let out = evolve(&DensityMatrix::zero_state(2), &bell(), None).unwrap();
        let m = out.matrix();
        for r in 0..4 {
            for c in 0..4 {
                let expected = match (r, c) {
                    (0, 0) | (3, 3) => 0.5,
                    (0, 3) | (3, 0) => -0.5,
                    _ => 0.0,
                };
                assert!((m[(r, c)] - Complex64::new(expected, 0.0)).norm() < 1e-15, "({r},{c})");
            }
        }
    }

    #[test]
    fn full_depolarizing_gives_maximally_mixed() {
        let noise = NoiseModel::new(1.0, 0.0, 0.0, 0.0).unwrap();
        let c = Circuit::from_ops(1, vec![GateOp::h(0)]).unwrap();
        let out = evolve(&DensityMatrix::zero_state(1), &c, Some(&noise)).unwrap();
        assert!(out.matrix().max_abs_diff(DensityMatrix::maximally_mixed(1).matrix()) < 1e-15);
    }

    #[test]
    fn amplitude_damping_decays_excited_state() {
        let noise = NoiseModel::new(0.0, 0.0, 0.3, 0.0).unwrap();
        let c = Circuit::from_ops(1, vec![GateOp::x(0)]).unwrap();
        let out = evolve(&DensityMatrix::zero_state(1), &c, Some(&noise)).unwrap();
        assert!((out.populations()[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn noiseless_evolve_matches_unitary() {
        let c = Circuit::from_ops(3, vec![GateOp::h(2), GateOp::cx(2, 0), GateOp::rz(1, 0.4), GateOp::swap(0, 1)])
            .unwrap();
        let u = circuit_to_unitary(&c);
        let rho = DensityMatrix::zero_state(3);
        let direct = &(&u * rho.matrix()) * &u.adjoint();
        let out = evolve(&rho, &c, None).unwrap();
        assert!(out.matrix().max_abs_diff(&direct) < 1e-12);
    }

    #[test]
    fn exact_distributions() {
        let sim = DensityMatrixSimulator::noiseless();
        assert_eq!(sim.probabilities(&bell()).unwrap().probs(), &[0.5, 0.0, 0.0, 0.5][..]);
        let m = sim.probabilities(&mutated()).unwrap();
        for (a, e) in m.probs().iter().zip([0.0, 0.5, 0.0, 0.5]) {
            assert!((a - e).abs() < 1e-15);
        }
        let mixed = exact_distribution(&DensityMatrix::maximally_mixed(1), None).unwrap();
        assert_eq!(mixed.probs(), &[0.5, 0.5][..]);
    }

    #[test]
    fn sampling_ground_state() {
        let counts = sample(&DensityMatrix::zero_state(1), None, 100, 3, None).unwrap();
        assert_eq!(counts.tallies(), &BTreeMap::from([(0, 100)]));
    }

    #[test]
    fn sampling_bell_is_binomial() {
        let rho = evolve(&DensityMatrix::zero_state(2), &bell(), None).unwrap();
        let counts = sample(&rho, None, 3000, 42, None).unwrap();
        assert_eq!(counts.get(1) + counts.get(2), 0);
        let sigma = (3000.0f64 * 0.25).sqrt();
        for k in [0, 3] {
            assert!((counts.get(k) as f64 - 1500.0).abs() <= 5.0 * sigma);
        }
        assert_eq!(counts.shots(), 3000);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let rho = DensityMatrix::maximally_mixed(2);
        let noise = NoiseModel::DEFAULT_PRESET;
        let a = sample(&rho, None, 500, 9, Some(&noise)).unwrap();
        let b = sample(&rho, None, 500, 9, Some(&noise)).unwrap();
        let c = sample(&rho, None, 500, 10, Some(&noise)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sampling_rejects_zero_shots_and_bad_states() {
        assert!(sample(&DensityMatrix::zero_state(1), None, 0, 1, None).is_err());
        let bad = DensityMatrix::from_trusted(1, ComplexMatrix::diag_real(&[1.1, -0.1]));
        assert!(matches!(sample(&bad, None, 10, 1, None), Err(Error::Numeric(_))));
    }

    #[test]
    fn marginal_counts() {
        let counts = Counts::from_dense(2, &[10, 20, 30, 40]).unwrap();
        assert_eq!(counts.marginal(&[1]).unwrap().to_dense(), vec![30, 70]);
        assert_eq!(counts.marginal(&[0]).unwrap().to_dense(), vec![40, 60]);
    }

    #[test]
    fn readout_flip_in_exact_mode() {
        let sim = DensityMatrixSimulator::with_noise(NoiseModel::new(0.0, 0.0, 0.0, 0.1).unwrap());
        let d = sim.probabilities(&Circuit::new(1).unwrap()).unwrap();
        assert!((d.probs()[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn noise_validation() {
        assert!(NoiseModel::new(1.5, 0.0, 0.0, 0.0).is_err());
        assert!(NoiseModel::new(0.0, -0.1, 0.0, 0.0).is_err());
        assert_eq!(NoiseModel::preset("default"), Some(NoiseModel::DEFAULT_PRESET));
        assert_eq!(NoiseModel::preset("nope"), None);
    }
}
