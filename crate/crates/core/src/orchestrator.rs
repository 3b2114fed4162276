//! Test suites and their execution.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocols::{run_protocol, AssertionResult, Evidence, ExpectedValue, ProtocolId, RunConfig};
use crate::qcore::Circuit;
use crate::seed;
use crate::simulator::{Backend, DensityMatrixSimulator, NoiseModel};

pub const DEFAULT_SHOTS: u64 = 3000;
pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_SEED: u64 = 0;

/// One equality assertion of a test case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub expected: ExpectedValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl Assertion {
    pub fn new(expected: ExpectedValue) -> Self {
        Self {
            expected,
            shots: None,
            threshold: None,
        }
    }

    pub fn with_shots(mut self, shots: u64) -> Self {
        self.shots = Some(shots);
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = Some(threshold);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub name: String,
    pub subject: Circuit,
    pub assertions: Vec<Assertion>,
}

impl TestCase {
    pub fn new(name: impl Into<String>, subject: Circuit) -> Self {
        Self {
            name: name.into(),
            subject,
            assertions: Vec::new(),
        }
    }

    /// Adds an equality assertion whose protocol follows from the value's kind.
    pub fn assert_equal(mut self, expected: ExpectedValue) -> Self {
        self.assertions.push(Assertion::new(expected));
        self
    }

    pub fn with_assertion(mut self, assertion: Assertion) -> Self {
        self.assertions.push(assertion);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteDefaults {
    pub shots: u64,
    pub seed: u64,
    pub threshold: f64,
    pub noise: Option<NoiseModel>,
}

impl Default for SuiteDefaults {
    fn default() -> Self {
        Self {
            shots: DEFAULT_SHOTS,
            seed: DEFAULT_SEED,
            threshold: DEFAULT_THRESHOLD,
            noise: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSuite {
    pub name: String,
    /// Register size every case must use, when declared.
    pub n_qubits: Option<usize>,
    pub defaults: SuiteDefaults,
    pub save_data: bool,
    pub cases: Vec<TestCase>,
}

impl TestSuite {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            n_qubits: None,
            defaults: SuiteDefaults::default(),
            save_data: false,
            cases: Vec::new(),
        }
    }

    pub fn with_case(mut self, case: TestCase) -> Self {
        self.cases.push(case);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::Validation(msg));
        if let Some(noise) = &self.defaults.noise {
            noise.validate()?;
        }
        check_threshold(self.defaults.threshold, "suite defaults")?;
        let mut names = HashSet::new();
        for case in &self.cases {
            if !names.insert(case.name.as_str()) {
                return invalid(format!("duplicate case name `{}`", case.name));
            }
            if case.assertions.is_empty() {
                return invalid(format!("case `{}` has no assertions", case.name));
            }
            let n = case.subject.n_qubits();
            if let Some(declared) = self.n_qubits {
                if n != declared {
                    return invalid(format!(
                        "case `{}` uses {n} qubits but the suite declares {declared}",
                        case.name
                    ));
                }
            }
            for (i, a) in case.assertions.iter().enumerate() {
                let at = format!("case `{}` assertion {}", case.name, i + 1);
                if a.expected.n_qubits() != n {
                    return invalid(format!(
                        "{at}: expected {} has {} qubits, subject has {n}",
                        a.expected.kind(),
                        a.expected.n_qubits()
                    ));
                }
                if let Some(t) = a.threshold {
                    check_threshold(t, &at)?;
                }
                let shots = a.shots.unwrap_or(self.defaults.shots);
                if shots == 0 && matches!(a.expected, ExpectedValue::Distribution(_)) {
                    return invalid(format!("{at}: the projective test needs at least one shot"));
                }
            }
        }
        Ok(())
    }
}

fn check_threshold(t: f64, at: &str) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::Validation(format!("{at}: threshold {t} is outside [0, 1]")))
    }
}

/// Seed of the `ordinal`-th assertion of case `case_name`.
pub fn assertion_seed(master: u64, case_name: &str, ordinal: usize) -> u64 {
    seed::derive(master, &[seed::hash_str(case_name), ordinal as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssertionReport {
    pub ordinal: usize,
    pub seed: u64,
    pub shots: u64,
    pub result: AssertionResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifact: Option<Evidence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub name: String,
    pub passed: bool,
    pub assertions: Vec<AssertionReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub cases: usize,
    pub cases_passed: usize,
    pub cases_failed: usize,
    pub assertions: usize,
    pub assertions_passed: usize,
    pub assertions_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub suite: String,
    pub backend: String,
    pub cases: Vec<CaseReport>,
    pub summary: Summary,
}

impl TestReport {
    pub fn all_passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }

    /// Assertion results in declaration order.
    pub fn results(&self) -> impl Iterator<Item = &AssertionResult> {
        self.cases.iter().flat_map(|c| c.assertions.iter().map(|a| &a.result))
    }

    pub fn protocols(&self) -> Vec<ProtocolId> {
        self.results().map(|r| r.protocol).collect()
    }
}

/// Runs every assertion on the embedded simulator configured by the suite.
pub fn run_suite(suite: &TestSuite) -> Result<TestReport> {
    let backend = DensityMatrixSimulator::with_noise(suite.defaults.noise.unwrap_or(NoiseModel::NOISELESS));
    run_suite_on(suite, &backend)
}

/// Runs every assertion on `backend`. Failed assertions are results; only
/// invalid suites and numeric faults are errors.
pub fn run_suite_on(suite: &TestSuite, backend: &dyn Backend) -> Result<TestReport> {
    suite.validate()?;
    let jobs: Vec<(usize, usize)> = suite
        .cases
        .iter()
        .enumerate()
        .flat_map(|(c, case)| (0..case.assertions.len()).map(move |a| (c, a)))
        .collect();
    let outcomes: Vec<Result<AssertionReport>> = jobs
        .par_iter()
        .map(|&(c, a)| {
            let case = &suite.cases[c];
            let assertion = &case.assertions[a];
            let config = RunConfig {
                backend,
                shots: assertion.shots.unwrap_or(suite.defaults.shots),
                seed: assertion_seed(suite.defaults.seed, &case.name, a),
                threshold: assertion.threshold.unwrap_or(suite.defaults.threshold),
            };
            let outcome = run_protocol(&case.subject, &assertion.expected, &config)?;
            Ok(AssertionReport {
                ordinal: a,
                seed: config.seed,
                shots: config.shots,
                result: outcome.result,
                artifact: suite.save_data.then_some(outcome.evidence),
            })
        })
        .collect();

    let mut outcomes = outcomes.into_iter();
    let mut cases = Vec::with_capacity(suite.cases.len());
    for case in &suite.cases {
        let assertions = outcomes
            .by_ref()
            .take(case.assertions.len())
            .collect::<Result<Vec<_>>>()?;
        cases.push(CaseReport {
            name: case.name.clone(),
            passed: assertions.iter().all(|a| a.result.passed),
            assertions,
        });
    }
    let assertions = jobs.len();
    let assertions_passed = cases
        .iter()
        .flat_map(|c| &c.assertions)
        .filter(|a| a.result.passed)
        .count();
    let cases_passed = cases.iter().filter(|c| c.passed).count();
    Ok(TestReport {
        suite: suite.name.clone(),
        backend: backend.name().to_string(),
        summary: Summary {
            cases: cases.len(),
            cases_passed,
            cases_failed: cases.len() - cases_passed,
            assertions,
            assertions_passed,
            assertions_failed: assertions - assertions_passed,
        },
        cases,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Text,
    Json,
}

/// One verdict line.
pub fn format_result(result: &AssertionResult) -> String {
    let tag = if result.passed { "[PASSED]" } else { "[FAILED]" };
    format!("{tag}: with a {:.3} probability of passing.", result.probability)
}

pub fn format_report(report: &TestReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Text => {
            let mut out = String::new();
            for r in report.results() {
                out.push_str(&format_result(r));
                out.push('\n');
            }
            out.into_bytes()
        }
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(report).expect("report serializes");
            out.push(b'\n');
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{run_protocol_as, Diagnostics};
    use crate::qcore::{circuit_to_choi, GateOp, OutcomeDistribution};

    fn bell_suite() -> TestSuite {
        let correct = Circuit::from_ops(2, vec![GateOp::x(0), GateOp::h(0), GateOp::cx(0, 1)]).unwrap();
        let mutated = Circuit::from_ops(2, vec![GateOp::x(0), GateOp::h(1), GateOp::cx(0, 1)]).unwrap();
        let rho = DensityMatrixSimulator::noiseless().prepare(&correct).unwrap();
        let dist = OutcomeDistribution::new(vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let choi = circuit_to_choi(&correct);
        let case = |name: &str, subject: &Circuit| {
            TestCase::new(name, subject.clone())
                .assert_equal(ExpectedValue::Distribution(dist.clone()))
                .assert_equal(ExpectedValue::State(rho.clone()))
                .assert_equal(ExpectedValue::Process(choi.clone()))
        };
        let mut suite = TestSuite::new("bell")
            .with_case(case("test_1", &correct))
            .with_case(case("test_2", &mutated));
        suite.n_qubits = Some(2);
        suite.defaults.seed = 13;
        suite
    }

    #[test]
    fn bell_suite_verdicts() {
        let report = run_suite(&bell_suite()).unwrap();
        let verdicts: Vec<bool> = report.results().map(|r| r.passed).collect();
        assert_eq!(verdicts, [true, true, true, false, false, false]);
        assert_eq!(report.summary.assertions, 6);
        assert_eq!(report.summary.cases_passed, 1);
        assert_eq!(
            report.protocols(),
            [
                ProtocolId::Proj,
                ProtocolId::StateTomo,
                ProtocolId::ProcessTomo,
                ProtocolId::Proj,
                ProtocolId::StateTomo,
                ProtocolId::ProcessTomo
            ]
        );
        assert!(!report.all_passed());
    }

    #[test]
    fn dispatch_equals_manual_selection() {
        let suite = bell_suite();
        let report = run_suite(&suite).unwrap();
        let backend = DensityMatrixSimulator::noiseless();
        for (case, case_report) in suite.cases.iter().zip(&report.cases) {
            for (a, (assertion, r)) in case.assertions.iter().zip(&case_report.assertions).enumerate() {
                let config = RunConfig {
                    backend: &backend,
                    shots: suite.defaults.shots,
                    seed: assertion_seed(suite.defaults.seed, &case.name, a),
                    threshold: suite.defaults.threshold,
                };
                let manual = run_protocol_as(r.result.protocol, &case.subject, &assertion.expected, &config).unwrap();
                assert_eq!(manual.result, r.result);
            }
        }
    }

    #[test]
    fn save_data_keeps_verdicts() {
        let mut suite = bell_suite();
        let plain = run_suite(&suite).unwrap();
        suite.save_data = true;
        let saved = run_suite(&suite).unwrap();
        assert_eq!(plain.results().collect::<Vec<_>>(), saved.results().collect::<Vec<_>>());
        assert!(saved.cases.iter().flat_map(|c| &c.assertions).all(|a| a.artifact.is_some()));
        assert!(plain.cases.iter().flat_map(|c| &c.assertions).all(|a| a.artifact.is_none()));
        let json = format_report(&saved, ReportFormat::Json);
        let back: TestReport = serde_json::from_slice(&json).unwrap();
        assert_eq!(back, saved);
    }

    #[test]
    fn empty_circuit_against_ground_distribution() {
        let mut dist = vec![0.0; 8];
        dist[0] = 1.0;
        let suite = TestSuite::new("trivial").with_case(
            TestCase::new("ground", Circuit::new(3).unwrap())
                .assert_equal(ExpectedValue::Distribution(OutcomeDistribution::new(dist).unwrap())),
        );
        let report = run_suite(&suite).unwrap();
        let r = &report.cases[0].assertions[0].result;
        assert!(r.passed);
        assert_eq!(r.probability, 1.0);
    }

    #[test]
    fn invalid_suites() {
        let mut dup = bell_suite();
        dup.cases[1].name = "test_1".into();
        assert!(matches!(run_suite(&dup), Err(Error::Validation(m)) if m.contains("duplicate")));

        let mut empty = bell_suite();
        empty.cases[0].assertions.clear();
        assert!(matches!(empty.validate(), Err(Error::Validation(_))));

        let mut wide = bell_suite();
        wide.n_qubits = Some(3);
        assert!(matches!(wide.validate(), Err(Error::Validation(_))));

        let mut bad_threshold = bell_suite();
        bad_threshold.cases[0].assertions[0].threshold = Some(1.5);
        assert!(matches!(bad_threshold.validate(), Err(Error::Validation(_))));
    }

    #[test]
    fn text_lines() {
        let result = |p: f64, passed: bool| AssertionResult {
            protocol: ProtocolId::Proj,
            probability: p,
            passed,
            threshold: 0.5,
            diagnostics: Diagnostics::Proj {
                statistic: 0.0,
                dof: 1,
                shots: 1,
            },
        };
        assert_eq!(
            format_result(&result(0.995, true)),
            "[PASSED]: with a 0.995 probability of passing."
        );
        assert_eq!(
            format_result(&result(0.0, false)),
            "[FAILED]: with a 0.000 probability of passing."
        );
        let report = run_suite(&bell_suite()).unwrap();
        let text = String::from_utf8(format_report(&report, ReportFormat::Text)).unwrap();
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn deterministic_across_runs() {
        let suite = bell_suite();
        let a = format_report(&run_suite(&suite).unwrap(), ReportFormat::Json);
        let b = format_report(&run_suite(&suite).unwrap(), ReportFormat::Json);
        assert_eq!(a, b);
    }
}
