//! Command implementations behind the `qassert` binary.

pub mod document;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use qassert_core::protocols::{protocol_for, run_protocol, ProtocolId, RunConfig};
use qassert_core::seed::derive;
use qassert_core::{
    format_report, run_suite, Circuit, DensityMatrixSimulator, ExpectedValue, NoiseModel, ReportFormat, TestReport,
};

pub use document::{load_noise, load_suite, load_sweep, parse_suite, parse_sweep, NoiseSpec, SweepConfig};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Threshold of the optional pass-rate columns of a sweep.
pub const PASS_RATE_THRESHOLD: f64 = 0.05;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{location}: parse error: {message}")]
    Parse { location: String, message: String },

    #[error("{location}: {message}")]
    Invalid { location: String, message: String },

    #[error(transparent)]
    Core(#[from] qassert_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if !e.is_validation() => EXIT_NUMERIC,
            _ => EXIT_INVALID,
        }
    }
}

/// Overrides applied on top of a suite's defaults.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub shots: Option<u64>,
    pub seed: Option<u64>,
    pub threshold: Option<f64>,
    pub noise: Option<NoiseModel>,
    pub save_data: Option<PathBuf>,
    pub format: ReportFormat,
}

#[derive(Debug)]
pub struct RunOutput {
    pub report: TestReport,
    pub rendered: Vec<u8>,
    pub exit_code: i32,
}

fn artifact_file_name(case: &str, ordinal: usize) -> String {
    let safe: String = case
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{safe}.{ordinal}.json")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn save_artifacts(report: &TestReport, dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    for case in &report.cases {
        for a in &case.assertions {
            let bytes = serde_json::to_vec_pretty(a).expect("assertion report serializes");
            write_file(&dir.join(artifact_file_name(&case.name, a.ordinal)), &bytes)?;
        }
    }
    write_file(&dir.join("report.json"), &format_report(report, ReportFormat::Json))
}

/// Runs a suite file and renders its report.
pub fn cmd_run(path: &Path, options: &RunOptions) -> Result<RunOutput, CliError> {
    let mut suite = load_suite(path)?;
    if let Some(shots) = options.shots {
        suite.defaults.shots = shots;
    }
    if let Some(seed) = options.seed {
        suite.defaults.seed = seed;
    }
    if let Some(threshold) = options.threshold {
        suite.defaults.threshold = threshold;
    }
    if let Some(noise) = options.noise {
        suite.defaults.noise = Some(noise);
    }
    if options.save_data.is_some() {
        suite.save_data = true;
    }
    suite.validate().map_err(|e| CliError::Invalid {
        location: path.display().to_string(),
        message: e.to_string(),
    })?;
    let report = run_suite(&suite)?;
    if let Some(dir) = &options.save_data {
        save_artifacts(&report, dir)?;
    }
    let rendered = format_report(&report, options.format);
    let exit_code = if report.all_passed() { EXIT_PASS } else { EXIT_FAIL };
    Ok(RunOutput {
        report,
        rendered,
        exit_code,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub shots: u64,
    pub alpha: f64,
    pub beta: f64,
    pub j: f64,
    pub alpha_pass: f64,
    pub beta_pass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub protocol: ProtocolId,
    pub rows: Vec<SweepRow>,
    /// Summed wall time of all protocol runs divided by the summed shot counts.
    pub seconds_per_shot: f64,
}

/// Seed of one side (`role` 0 positive, 1 negative) of a sweep trial.
pub fn trial_seed(master: u64, shots: u64, trial: usize, role: u64) -> u64 {
    derive(master, &[shots, trial as u64, role])
}

/// Runs the accuracy sweep: α and β are mean probabilities of passing.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepOutput, CliError> {
    config.validate().map_err(|message| CliError::Invalid {
        location: config.name.clone(),
        message,
    })?;
    let backend = DensityMatrixSimulator::with_noise(config.noise.unwrap_or(NoiseModel::NOISELESS));
    let sides = [&config.positive_case, &config.negative_case];
    let jobs: Vec<(u64, usize, u64)> = config
        .shot_grid
        .iter()
        .flat_map(|&shots| (0..config.trials_per_point).flat_map(move |t| [(shots, t, 0), (shots, t, 1)]))
        .collect();
    let results: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|&(shots, trial, role)| {
            let case = sides[role as usize];
            let run = RunConfig {
                backend: &backend,
                shots,
                seed: trial_seed(config.seed, shots, trial, role),
                threshold: config.threshold,
            };
            let start = Instant::now();
            let outcome = run_protocol(&case.subject, &case.assertions[0].expected, &run)?;
            Ok((outcome.result.probability, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<_, qassert_core::Error>>()?;

    let per_point = 2 * config.trials_per_point;
    let trials = config.trials_per_point as f64;
    let rows = config
        .shot_grid
        .iter()
        .zip(results.chunks(per_point))
        .map(|(&shots, chunk)| {
            let pos = chunk.iter().step_by(2).map(|r| r.0);
            let neg = chunk.iter().skip(1).step_by(2).map(|r| r.0);
            let alpha = pos.clone().sum::<f64>() / trials;
            let beta = neg.clone().sum::<f64>() / trials;
            SweepRow {
                shots,
                alpha,
                beta,
                j: alpha - beta,
                alpha_pass: pos.filter(|&p| p >= PASS_RATE_THRESHOLD).count() as f64 / trials,
                beta_pass: neg.filter(|&p| p >= PASS_RATE_THRESHOLD).count() as f64 / trials,
            }
        })
        .collect();
    let total_time: f64 = results.iter().map(|r| r.1).sum();
    let total_shots: f64 = jobs.iter().map(|j| j.0 as f64).sum();
    Ok(SweepOutput {
        protocol: protocol_for(&config.positive_case.assertions[0].expected),
        rows,
        seconds_per_shot: total_time / total_shots,
    })
}

pub fn format_csv(rows: &[SweepRow], pass_rates: bool) -> String {
    let mut out = String::from("shots,alpha,beta,J");
    if pass_rates {
        out.push_str(",alpha_pass,beta_pass");
    }
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{:.6},{:.6},{:.6}", r.shots, r.alpha, r.beta, r.j));
        if pass_rates {
            out.push_str(&format!(",{:.6},{:.6}", r.alpha_pass, r.beta_pass));
        }
        out.push('\n');
    }
    out
}

/// Loads a sweep file, applies overrides and returns the CSV with the run's timing.
pub fn cmd_sweep(
    path: &Path,
    seed: Option<u64>,
    trials: Option<usize>,
    noise: Option<NoiseModel>,
    pass_rates: bool,
) -> Result<(String, SweepOutput), CliError> {
    let mut config = load_sweep(path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(trials) = trials {
        config.trials_per_point = trials;
    }
    if noise.is_some() {
        config.noise = noise;
    }
    let output = run_sweep(&config)?;
    Ok((format_csv(&output.rows, pass_rates), output))
}

/// Median wall time per logical shot of one assertion over `repeats` runs.
pub fn cost_per_shot(
    subject: &Circuit,
    expected: &ExpectedValue,
    noise: Option<NoiseModel>,
    shots: u64,
    repeats: usize,
) -> Result<f64, CliError> {
    let backend = DensityMatrixSimulator::with_noise(noise.unwrap_or(NoiseModel::NOISELESS));
    let mut samples = Vec::with_capacity(repeats.max(1));
    for r in 0..repeats.max(1) {
        let run = RunConfig {
            backend: &backend,
            shots,
            seed: r as u64,
            threshold: 0.5,
        };
        let start = Instant::now();
        run_protocol(subject, expected, &run)?;
        samples.push(start.elapsed().as_secs_f64() / shots as f64);
    }
    samples.sort_by(f64::total_cmp);
    Ok(samples[samples.len() / 2])
}
