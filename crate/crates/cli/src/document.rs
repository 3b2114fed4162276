//! Suite and sweep documents (JSON).
//!
//! Complex matrix entries are `[re, im]` pairs, distributions are probability
//! arrays in little-endian index order, and circuits are gate lists
//! `[{"gate": "cx", "qubits": [0, 1]}, {"gate": "rz", "qubits": [1], "angle": 0.5}]`.

use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use qassert_core::orchestrator::{DEFAULT_SEED, DEFAULT_SHOTS, DEFAULT_THRESHOLD};
use qassert_core::qmath::ComplexMatrix;
use qassert_core::{
    Assertion, ChoiMatrix, Circuit, DensityMatrix, ExpectedValue, GateOp, NoiseModel, OutcomeDistribution,
    SuiteDefaults, TestCase, TestSuite,
};

use crate::CliError;

/// Noise given either as a preset name or as explicit parameters.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    Preset(String),
    Model(NoiseModel),
}

impl NoiseSpec {
    pub fn resolve(&self) -> Result<NoiseModel, String> {
        match self {
            NoiseSpec::Preset(name) => NoiseModel::preset(name)
                .ok_or_else(|| format!("unknown noise preset `{name}` (expected `default` or `none`)")),
            NoiseSpec::Model(m) => m.validate().map(|_| *m).map_err(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DefaultsDoc {
    shots: Option<u64>,
    seed: Option<u64>,
    threshold: Option<f64>,
    noise: Option<NoiseSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AssertionDoc {
    #[serde(rename = "type")]
    kind: String,
    value: Value,
    shots: Option<u64>,
    threshold: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseDoc {
    name: String,
    circuit: Vec<GateOp>,
    assertions: Vec<AssertionDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteDoc {
    name: String,
    n_qubits: usize,
    #[serde(default)]
    defaults: DefaultsDoc,
    #[serde(default)]
    save_data: bool,
    cases: Vec<CaseDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepDoc {
    #[serde(default)]
    name: Option<String>,
    n_qubits: usize,
    positive_case: CaseDoc,
    negative_case: CaseDoc,
    #[serde(default)]
    shot_grid: Option<Vec<u64>>,
    #[serde(default)]
    trials_per_point: Option<usize>,
    #[serde(default)]
    noise: Option<NoiseSpec>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    threshold: Option<f64>,
}

pub const DEFAULT_SHOT_GRID: [u64; 7] = [10, 30, 100, 300, 1000, 3000, 10000];
pub const DEFAULT_TRIALS: usize = 20;

/// Accuracy sweep over shot counts for a correct and a mutated subject.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub name: String,
    pub positive_case: TestCase,
    pub negative_case: TestCase,
    pub shot_grid: Vec<u64>,
    pub trials_per_point: usize,
    pub noise: Option<NoiseModel>,
    pub seed: u64,
    pub threshold: f64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), String> {
        for case in [&self.positive_case, &self.negative_case] {
            if case.assertions.len() != 1 {
                return Err(format!(
                    "sweep case `{}` must have exactly one assertion, found {}",
                    case.name,
                    case.assertions.len()
                ));
            }
        }
        let pos = &self.positive_case.assertions[0].expected;
        let neg = &self.negative_case.assertions[0].expected;
        if qassert_core::protocols::protocol_for(pos) != qassert_core::protocols::protocol_for(neg) {
            return Err(format!(
                "sweep cases use different assertion types: `{}` and `{}`",
                pos.kind(),
                neg.kind()
            ));
        }
        if self.positive_case.subject.n_qubits() != self.negative_case.subject.n_qubits() {
            return Err("sweep cases act on different register sizes".into());
        }
        if self.shot_grid.is_empty() {
            return Err("shot_grid is empty".into());
        }
        if self.shot_grid.contains(&0) {
            return Err("shot_grid entries must be at least 1".into());
        }
        if self.shot_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err("shot_grid must be strictly ascending".into());
        }
        if self.trials_per_point == 0 {
            return Err("trials_per_point must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(format!("threshold {} is outside [0, 1]", self.threshold));
        }
        if let Some(noise) = &self.noise {
            noise.validate().map_err(|e| e.to_string())?;
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Parse {
        location: format!("{}:{}:{}", path.display(), e.line(), e.column()),
        message: e.to_string(),
    })
}

fn invalid(path: &Path, at: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Invalid {
        location: if at.is_empty() {
            path.display().to_string()
        } else {
            format!("{}: {at}", path.display())
        },
        message: message.to_string(),
    }
}

fn expected_value(doc: &AssertionDoc, n_qubits: usize) -> Result<ExpectedValue, String> {
    let value = doc.value.clone();
    let expected = match doc.kind.as_str() {
        "distribution" => {
            let probs: Vec<f64> = serde_json::from_value(value).map_err(|e| e.to_string())?;
            ExpectedValue::Distribution(OutcomeDistribution::new(probs).map_err(|e| e.to_string())?)
        }
        "state" => {
            let m: ComplexMatrix = serde_json::from_value(value).map_err(|e| e.to_string())?;
            ExpectedValue::State(DensityMatrix::new(m).map_err(|e| e.to_string())?)
        }
        "process" => {
            let m: ComplexMatrix = serde_json::from_value(value).map_err(|e| e.to_string())?;
            ExpectedValue::Process(ChoiMatrix::new(m).map_err(|e| e.to_string())?)
        }
        "process_ref" => {
            let ops: Vec<GateOp> = serde_json::from_value(value).map_err(|e| e.to_string())?;
            let c = Circuit::from_ops(n_qubits, ops).map_err(|e| e.to_string())?;
            ExpectedValue::ProcessRef(c).resolve()
        }
        other => {
            return Err(format!(
                "unknown assertion type `{other}` (expected distribution, state, process or process_ref)"
            ))
        }
    };
    if expected.n_qubits() != n_qubits {
        return Err(format!(
            "{} value describes {} qubits, the suite has {n_qubits}",
            doc.kind,
            expected.n_qubits()
        ));
    }
    Ok(expected)
}

fn test_case(path: &Path, doc: CaseDoc, n_qubits: usize) -> Result<TestCase, CliError> {
    let at = format!("case `{}`", doc.name);
    let subject = Circuit::from_ops(n_qubits, doc.circuit).map_err(|e| invalid(path, &at, e))?;
    let mut case = TestCase::new(doc.name.clone(), subject);
    for (i, a) in doc.assertions.iter().enumerate() {
        let expected = expected_value(a, n_qubits)
            .map_err(|e| invalid(path, &format!("{at} assertion {}", i + 1), e))?;
        case = case.with_assertion(Assertion {
            expected,
            shots: a.shots,
            threshold: a.threshold,
        });
    }
    Ok(case)
}

pub fn parse_suite(path: &Path, text: &str) -> Result<TestSuite, CliError> {
    let doc: SuiteDoc = parse_json(path, text)?;
    let noise = doc
        .defaults
        .noise
        .as_ref()
        .map(NoiseSpec::resolve)
        .transpose()
        .map_err(|e| invalid(path, "defaults.noise", e))?;
    let mut suite = TestSuite::new(doc.name);
    suite.n_qubits = Some(doc.n_qubits);
    suite.save_data = doc.save_data;
    suite.defaults = SuiteDefaults {
        shots: doc.defaults.shots.unwrap_or(DEFAULT_SHOTS),
        seed: doc.defaults.seed.unwrap_or(DEFAULT_SEED),
        threshold: doc.defaults.threshold.unwrap_or(DEFAULT_THRESHOLD),
        noise,
    };
    for case in doc.cases {
        suite.cases.push(test_case(path, case, doc.n_qubits)?);
    }
    suite.validate().map_err(|e| invalid(path, "", e))?;
    Ok(suite)
}

pub fn load_suite(path: &Path) -> Result<TestSuite, CliError> {
    parse_suite(path, &read(path)?)
}

pub fn parse_sweep(path: &Path, text: &str) -> Result<SweepConfig, CliError> {
    let doc: SweepDoc = parse_json(path, text)?;
    let noise = doc
        .noise
        .as_ref()
        .map(NoiseSpec::resolve)
        .transpose()
        .map_err(|e| invalid(path, "noise", e))?;
    let config = SweepConfig {
        name: doc.name.unwrap_or_else(|| "sweep".into()),
        positive_case: test_case(path, doc.positive_case, doc.n_qubits)?,
        negative_case: test_case(path, doc.negative_case, doc.n_qubits)?,
        shot_grid: doc.shot_grid.unwrap_or_else(|| DEFAULT_SHOT_GRID.to_vec()),
        trials_per_point: doc.trials_per_point.unwrap_or(DEFAULT_TRIALS),
        noise,
        seed: doc.seed.unwrap_or(DEFAULT_SEED),
        threshold: doc.threshold.unwrap_or(DEFAULT_THRESHOLD),
    };
    config.validate().map_err(|e| invalid(path, "", e))?;
    Ok(config)
}

pub fn load_sweep(path: &Path) -> Result<SweepConfig, CliError> {
    parse_sweep(path, &read(path)?)
}

/// Resolves `--noise`: a preset name, or a path to a JSON noise document.
pub fn load_noise(arg: &str) -> Result<NoiseModel, CliError> {
    if let Some(model) = NoiseModel::preset(arg) {
        return Ok(model);
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(CliError::Invalid {
            location: "--noise".into(),
            message: format!("`{arg}` is neither a noise preset nor a readable file"),
        });
    }
    let spec: NoiseSpec = parse_json(path, &read(path)?)?;
    spec.resolve().map_err(|e| invalid(path, "", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SUITE: &str = r#"{
        "name": "demo",
        "n_qubits": 1,
        "defaults": {"shots": 100, "noise": "none"},
        "cases": [{
            "name": "flip",
            "circuit": [{"gate": "x", "qubits": [0]}],
            "assertions": [
                {"type": "distribution", "value": [0, 1]},
                {"type": "state", "value": [[[0, 0], [0, 0]], [[0, 0], [1, 0]]], "threshold": 0.9},
                {"type": "process_ref", "value": [{"gate": "x", "qubits": [0]}], "shots": 0}
            ]
        }]
    }"#;

    #[test]
    fn parses_suite() {
        let suite = parse_suite(Path::new("s.json"), SUITE).unwrap();
        assert_eq!(suite.defaults.shots, 100);
        assert_eq!(suite.defaults.noise, Some(NoiseModel::NOISELESS));
        let a = &suite.cases[0].assertions;
        assert_eq!(a.len(), 3);
        assert_eq!(a[1].threshold, Some(0.9));
        assert!(matches!(a[2].expected, ExpectedValue::Process(_)));
    }

    #[test]
    fn errors_carry_locations() {
        let err = parse_suite(Path::new("s.json"), "{\n  \"name\": 3 }").unwrap_err();
        assert!(err.to_string().contains("s.json:2:"), "{err}");
        let bad = SUITE.replace("[0, 1]", "[0.5, 0.6]");
        let err = parse_suite(Path::new("s.json"), &bad).unwrap_err();
        assert!(err.to_string().contains("case `flip` assertion 1"), "{err}");
        let bad = SUITE.replace("\"x\", \"qubits\": [0]}],\n", "\"cx\", \"qubits\": [0]}],\n");
        assert!(parse_suite(Path::new("s.json"), &bad).is_err());
        let bad = SUITE.replace("\"none\"", "\"loud\"");
        let err = parse_suite(Path::new("s.json"), &bad).unwrap_err();
        assert!(err.to_string().contains("defaults.noise"), "{err}");
    }

    #[test]
    fn sweep_rejects_mismatched_types() {
        let doc = r#"{
            "n_qubits": 1,
            "positive_case": {"name": "p", "circuit": [], "assertions": [{"type": "distribution", "value": [1, 0]}]},
            "negative_case": {"name": "n", "circuit": [{"gate": "x", "qubits": [0]}],
                              "assertions": [{"type": "state", "value": [[[1, 0], [0, 0]], [[0, 0], [0, 0]]]}]}
        }"#;
        let err = parse_sweep(Path::new("w.json"), doc).unwrap_err();
        assert!(err.to_string().contains("different assertion types"), "{err}");
        let ok = doc.replace(
            r#"{"type": "state", "value": [[[1, 0], [0, 0]], [[0, 0], [0, 0]]]}"#,
            r#"{"type": "distribution", "value": [1, 0]}"#,
        );
        let config = parse_sweep(Path::new("w.json"), &ok).unwrap();
        assert_eq!(config.shot_grid, DEFAULT_SHOT_GRID);
        assert_eq!(config.trials_per_point, DEFAULT_TRIALS);
    }
}
