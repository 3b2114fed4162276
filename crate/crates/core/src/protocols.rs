//! Testing protocols behind polymorphic equality assertions.
//!
//! A protocol turns a subject circuit and an expected value into a
//! probability of passing. [`Protocol::run`] fixes the arrange–act–assert
//! sequence around the hooks each implementation provides. The
//! [`ProtocolLibrary`] picks the protocol whose context matches the kind of
//! expected value.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{
    circuit_to_choi, process_fidelity, state_fidelity, ChoiMatrix, Circuit, DensityMatrix, OutcomeDistribution,
};
use crate::simulator::{Backend, Counts};
use crate::stats::{chi2_gof, extended_f64};
use crate::tomography::{
    process_preparations_count, process_tomography, state_settings_count, state_tomography,
};

/// The value a subject is asserted equal to; its kind selects the protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum ExpectedValue {
    Distribution(OutcomeDistribution),
    State(DensityMatrix),
    Process(ChoiMatrix),
    /// Expected channel given as a reference circuit.
    ProcessRef(Circuit),
}

impl ExpectedValue {
    pub fn kind(&self) -> &'static str {
        match self {
            ExpectedValue::Distribution(_) => "distribution",
            ExpectedValue::State(_) => "state",
            ExpectedValue::Process(_) => "process",
            ExpectedValue::ProcessRef(_) => "process_ref",
        }
    }

    pub fn n_qubits(&self) -> usize {
        match self {
            ExpectedValue::Distribution(d) => d.n_qubits(),
            ExpectedValue::State(s) => s.n_qubits(),
            ExpectedValue::Process(c) => c.n_qubits(),
            ExpectedValue::ProcessRef(c) => c.n_qubits(),
        }
    }

    /// Replaces a reference circuit by its Choi matrix.
    pub fn resolve(self) -> Self {
        match self {
            ExpectedValue::ProcessRef(c) => ExpectedValue::Process(circuit_to_choi(&c)),
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolId {
    Proj,
    StateTomo,
    ProcessTomo,
}

impl ProtocolId {
    pub const ALL: [ProtocolId; 3] = [ProtocolId::Proj, ProtocolId::StateTomo, ProtocolId::ProcessTomo];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProtocolId::Proj => "proj",
            ProtocolId::StateTomo => "state_tomo",
            ProtocolId::ProcessTomo => "process_tomo",
        }
    }
}

impl fmt::Display for ProtocolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Protocol-specific evidence behind a probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "snake_case")]
pub enum Diagnostics {
    Proj {
        #[serde(with = "extended_f64")]
        statistic: f64,
        dof: usize,
        shots: u64,
    },
    StateTomo {
        settings: usize,
        shots_per_setting: u64,
        purity: f64,
    },
    ProcessTomo {
        preparations: usize,
        settings_per_preparation: usize,
        shots_per_setting: u64,
        trace_preservation_residual: f64,
    },
}

/// Raw data produced by a protocol's experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum Evidence {
    Counts(Counts),
    State(DensityMatrix),
    Process(ChoiMatrix),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssertionResult {
    pub protocol: ProtocolId,
    pub probability: f64,
    pub passed: bool,
    pub threshold: f64,
    pub diagnostics: Diagnostics,
}

/// A finished protocol run: the verdict plus the evidence it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolOutcome {
    pub result: AssertionResult,
    pub evidence: Evidence,
}

/// Execution parameters shared by all protocols.
#[derive(Clone, Copy)]
pub struct RunConfig<'a> {
    pub backend: &'a dyn Backend,
    /// Shots for the projective test, or shots per setting for tomography;
    /// zero runs tomography in analytic mode.
    pub shots: u64,
    pub seed: u64,
    pub threshold: f64,
}

impl fmt::Debug for RunConfig<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RunConfig")
            .field("backend", &self.backend.name())
            .field("shots", &self.shots)
            .field("seed", &self.seed)
            .field("threshold", &self.threshold)
            .finish()
    }
}

pub trait Protocol: Send + Sync {
    fn id(&self) -> ProtocolId;

    /// Whether this protocol can evaluate an assertion against `expected`.
    fn context_check(&self, expected: &ExpectedValue) -> bool;

    /// Runs the experiment on the backend.
    fn workflow(&self, subject: &Circuit, config: &RunConfig<'_>) -> Result<Evidence>;

    /// Probability of passing and diagnostics for the collected evidence.
    fn evaluate(&self, evidence: &Evidence, expected: &ExpectedValue, config: &RunConfig<'_>)
        -> Result<(f64, Diagnostics)>;

    /// Fixed arrange-act-assert sequence shared by all protocols.
    fn run(&self, subject: &Circuit, expected: &ExpectedValue, config: &RunConfig<'_>) -> Result<ProtocolOutcome> {
        if !self.context_check(expected) {
            return Err(Error::Context {
                expected: expected.kind().to_string(),
                protocol: self.id().to_string(),
            });
        }
        if expected.n_qubits() != subject.n_qubits() {
            return Err(Error::Validation(format!(
                "{}-qubit subject asserted against a {}-qubit {}",
                subject.n_qubits(),
                expected.n_qubits(),
                expected.kind()
            )));
        }
        if !(0.0..=1.0).contains(&config.threshold) {
            return Err(Error::Validation(format!(
                "threshold {} is outside [0, 1]",
                config.threshold
            )));
        }
        let expected = expected.clone().resolve();
        let wrap = |e: Error| Error::Protocol {
            protocol: self.id().to_string(),
            source: Box::new(e),
        };
        let evidence = self.workflow(subject, config).map_err(wrap)?;
        let (probability, diagnostics) = self.evaluate(&evidence, &expected, config).map_err(wrap)?;
        let probability = probability.clamp(0.0, 1.0);
        Ok(ProtocolOutcome {
            result: AssertionResult {
                protocol: self.id(),
                probability,
                passed: probability >= config.threshold,
                threshold: config.threshold,
                diagnostics,
            },
            evidence,
        })
    }
}

fn evidence_mismatch(protocol: ProtocolId, evidence: &Evidence) -> Error {
    Error::Numeric(format!("protocol {protocol} received unexpected evidence {evidence:?}"))
}

/// Pearson χ² test on computational-basis counts.
#[derive(Debug, Default, Clone, Copy)]
pub struct ProjProtocol;

impl Protocol for ProjProtocol {
    fn id(&self) -> ProtocolId {
        ProtocolId::Proj
    }

    fn context_check(&self, expected: &ExpectedValue) -> bool {
        matches!(expected, ExpectedValue::Distribution(_))
    }

    fn workflow(&self, subject: &Circuit, config: &RunConfig<'_>) -> Result<Evidence> {
        if config.shots == 0 {
            return Err(Error::Validation("the projective test needs at least one shot".into()));
        }
        Ok(Evidence::Counts(config.backend.execute(subject, config.shots, config.seed)?))
    }

    fn evaluate(&self, evidence: &Evidence, expected: &ExpectedValue, _: &RunConfig<'_>) -> Result<(f64, Diagnostics)> {
        let (Evidence::Counts(counts), ExpectedValue::Distribution(dist)) = (evidence, expected) else {
            return Err(evidence_mismatch(self.id(), evidence));
        };
        let chi2 = chi2_gof(counts, dist)?;
        Ok((
            chi2.p_value,
            Diagnostics::Proj {
                statistic: chi2.statistic,
                dof: chi2.dof,
                shots: counts.shots(),
            },
        ))
    }
}

/// State tomography followed by the Uhlmann–Jozsa fidelity.
#[derive(Debug, Default, Clone, Copy)]
pub struct StateTomographyProtocol;

impl Protocol for StateTomographyProtocol {
    fn id(&self) -> ProtocolId {
        ProtocolId::StateTomo
    }

    fn context_check(&self, expected: &ExpectedValue) -> bool {
        matches!(expected, ExpectedValue::State(_))
    }

    fn workflow(&self, subject: &Circuit, config: &RunConfig<'_>) -> Result<Evidence> {
        let prep = Circuit::new(subject.n_qubits())?;
        Ok(Evidence::State(state_tomography(
            &prep,
            subject,
            config.backend,
            config.shots,
            config.seed,
        )?))
    }

    fn evaluate(
        &self,
        evidence: &Evidence,
        expected: &ExpectedValue,
        config: &RunConfig<'_>,
    ) -> Result<(f64, Diagnostics)> {
        let (Evidence::State(rho), ExpectedValue::State(sigma)) = (evidence, expected) else {
            return Err(evidence_mismatch(self.id(), evidence));
        };
        Ok((
            state_fidelity(rho, sigma)?,
            Diagnostics::StateTomo {
                settings: state_settings_count(rho.n_qubits()),
                shots_per_setting: config.shots,
                purity: rho.purity(),
            },
        ))
    }
}

/// Process tomography followed by the fidelity of normalized Choi matrices.
#[derive(Debug, Default, Clone, Copy)]
pub struct ProcessTomographyProtocol;

impl Protocol for ProcessTomographyProtocol {
    fn id(&self) -> ProtocolId {
        ProtocolId::ProcessTomo
    }

    fn context_check(&self, expected: &ExpectedValue) -> bool {
        matches!(expected, ExpectedValue::Process(_) | ExpectedValue::ProcessRef(_))
    }

    fn workflow(&self, subject: &Circuit, config: &RunConfig<'_>) -> Result<Evidence> {
        Ok(Evidence::Process(process_tomography(
            subject,
            config.backend,
            config.shots,
            config.seed,
        )?))
    }

    fn evaluate(
        &self,
        evidence: &Evidence,
        expected: &ExpectedValue,
        config: &RunConfig<'_>,
    ) -> Result<(f64, Diagnostics)> {
        let (Evidence::Process(estimate), ExpectedValue::Process(reference)) = (evidence, expected) else {
            return Err(evidence_mismatch(self.id(), evidence));
        };
        let n = estimate.n_qubits();
        Ok((
            process_fidelity(estimate, reference)?,
            Diagnostics::ProcessTomo {
                preparations: process_preparations_count(n),
                settings_per_preparation: state_settings_count(n),
                shots_per_setting: config.shots,
                trace_preservation_residual: estimate.trace_preservation_residual(),
            },
        ))
    }
}

/// Registry of protocols consulted by polymorphic assertions.
pub struct ProtocolLibrary {
    protocols: Vec<Box<dyn Protocol>>,
}

impl Default for ProtocolLibrary {
    fn default() -> Self {
        Self::standard()
    }
}

impl ProtocolLibrary {
    pub fn standard() -> Self {
        Self {
            protocols: vec![
                Box::new(ProjProtocol),
                Box::new(StateTomographyProtocol),
                Box::new(ProcessTomographyProtocol),
            ],
        }
    }

    pub fn empty() -> Self {
        Self { protocols: Vec::new() }
    }

    /// Adds a protocol; selection stays unambiguous only if contexts are disjoint.
    pub fn register(&mut self, protocol: Box<dyn Protocol>) {
        self.protocols.push(protocol);
    }

    pub fn get(&self, id: ProtocolId) -> Option<&dyn Protocol> {
        self.protocols.iter().find(|p| p.id() == id).map(|p| p.as_ref())
    }

    /// The unique protocol whose context matches `expected`.
    pub fn select(&self, expected: &ExpectedValue) -> Result<&dyn Protocol> {
        let mut matching = self.protocols.iter().filter(|p| p.context_check(expected));
        match (matching.next(), matching.next()) {
            (Some(p), None) => Ok(p.as_ref()),
            (None, _) => Err(Error::Context {
                expected: expected.kind().to_string(),
                protocol: "<none registered>".into(),
            }),
            (Some(a), Some(b)) => Err(Error::Validation(format!(
                "ambiguous context `{}`: matched by `{}` and `{}`",
                expected.kind(),
                a.id(),
                b.id()
            ))),
        }
    }
}

/// Standard-library protocol id for an expected value.
pub fn protocol_for(expected: &ExpectedValue) -> ProtocolId {
    match expected {
        ExpectedValue::Distribution(_) => ProtocolId::Proj,
        ExpectedValue::State(_) => ProtocolId::StateTomo,
        ExpectedValue::Process(_) | ExpectedValue::ProcessRef(_) => ProtocolId::ProcessTomo,
    }
}

/// Whether `protocol` can evaluate `expected` in the standard library.
pub fn context_check(expected: &ExpectedValue, protocol: ProtocolId) -> bool {
    protocol_for(expected) == protocol
}

/// Runs an assertion with an explicitly chosen standard protocol.
pub fn run_protocol_as(
    protocol: ProtocolId,
    subject: &Circuit,
    expected: &ExpectedValue,
    config: &RunConfig<'_>,
) -> Result<ProtocolOutcome> {
    let library = ProtocolLibrary::standard();
    let p = library.get(protocol).expect("standard library has every protocol");
    p.run(subject, expected, config)
}

/// Runs an assertion with the protocol selected from the expected value.
pub fn run_protocol(subject: &Circuit, expected: &ExpectedValue, config: &RunConfig<'_>) -> Result<ProtocolOutcome> {
    run_protocol_as(protocol_for(expected), subject, expected, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::GateOp;
    use crate::simulator::DensityMatrixSimulator;

    fn bell() -> Circuit {
        Circuit::from_ops(2, vec![GateOp::x(0), GateOp::h(0), GateOp::cx(0, 1)]).unwrap()
    }

    fn mutated() -> Circuit {
        Circuit::from_ops(2, vec![GateOp::x(0), GateOp::h(1), GateOp::cx(0, 1)]).unwrap()
    }

    fn bell_distribution() -> ExpectedValue {
        ExpectedValue::Distribution(OutcomeDistribution::new(vec![0.5, 0.0, 0.0, 0.5]).unwrap())
    }

    fn bell_state() -> ExpectedValue {
        let sim = DensityMatrixSimulator::noiseless();
        ExpectedValue::State(sim.prepare(&bell()).unwrap())
    }

    fn config(sim: &DensityMatrixSimulator, shots: u64) -> RunConfig<'_> {
        RunConfig {
            backend: sim,
            shots,
            seed: 2024,
            threshold: 0.5,
        }
    }

    #[test]
    fn context_checks() {
        assert!(context_check(&bell_distribution(), ProtocolId::Proj));
        assert!(!context_check(&bell_state(), ProtocolId::Proj));
        assert!(context_check(&ExpectedValue::ProcessRef(bell()), ProtocolId::ProcessTomo));
        let library = ProtocolLibrary::standard();
        for expected in [
            bell_distribution(),
            bell_state(),
            ExpectedValue::Process(circuit_to_choi(&bell())),
            ExpectedValue::ProcessRef(bell()),
        ] {
            let chosen = library.select(&expected).unwrap().id();
            for id in ProtocolId::ALL {
                assert_eq!(library.get(id).unwrap().context_check(&expected), id == chosen);
                assert_eq!(context_check(&expected, id), id == chosen);
            }
        }
    }

    #[test]
    fn context_mismatch_names_both_tags() {
        let sim = DensityMatrixSimulator::noiseless();
        let err = run_protocol_as(ProtocolId::Proj, &bell(), &bell_state(), &config(&sim, 10)).unwrap_err();
        assert_eq!(
            err,
            Error::Context {
                expected: "state".into(),
                protocol: "proj".into()
            }
        );
    }

    #[test]
    fn proj_passes_correct_and_fails_mutated() {
        let sim = DensityMatrixSimulator::noiseless();
        let ok = run_protocol(&bell(), &bell_distribution(), &config(&sim, 3000)).unwrap();
        assert_eq!(ok.result.protocol, ProtocolId::Proj);
        assert!(matches!(ok.evidence, Evidence::Counts(_)));
        let bad = run_protocol(&mutated(), &bell_distribution(), &config(&sim, 3000)).unwrap();
        assert_eq!(bad.result.probability, 0.0);
        assert!(!bad.result.passed);
    }

    #[test]
    fn state_and_process_on_mutated_subject() {
        let sim = DensityMatrixSimulator::noiseless();
        let state = run_protocol(&mutated(), &bell_state(), &config(&sim, 3000)).unwrap();
        assert!((state.result.probability - 0.25).abs() < 0.05);
        assert!(!state.result.passed);
        let process = run_protocol(&mutated(), &ExpectedValue::ProcessRef(bell()), &config(&sim, 3000)).unwrap();
        assert!(process.result.probability <= 0.05);
        assert!(!process.result.passed);
    }

    #[test]
    fn errors_carry_protocol_id() {
        let sim = DensityMatrixSimulator::noiseless();
        let err = run_protocol(&bell(), &bell_distribution(), &config(&sim, 0)).unwrap_err();
        match err {
            Error::Protocol { protocol, .. } => assert_eq!(protocol, "proj"),
            other => panic!("unexpected {other:?}"),
        }
        let three = Circuit::new(3).unwrap();
        assert!(matches!(
            run_protocol(&three, &bell_distribution(), &config(&sim, 10)),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn expected_value_wire_format() {
        let text = r#"{"type":"process_ref","value":{"n_qubits":1,"ops":[{"gate":"x","qubits":[0]}]}}"#;
        let v: ExpectedValue = serde_json::from_str(text).unwrap();
        assert_eq!(v.kind(), "process_ref");
        let d: ExpectedValue = serde_json::from_str(r#"{"type":"distribution","value":[0.5,0.5]}"#).unwrap();
        assert_eq!(d.n_qubits(), 1);
        assert!(serde_json::from_str::<ExpectedValue>(r#"{"type":"distribution","value":[0.7,0.5]}"#).is_err());
    }
}
