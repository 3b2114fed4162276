use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qassert::{cmd_run, cmd_sweep, load_noise, CliError, RunOptions, EXIT_INVALID};
use qassert_core::ReportFormat;

#[derive(Parser)]
#[command(name = "qassert", version, about = "Run probabilistic unit tests for quantum subroutines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run a test suite and print one verdict line per assertion.
    Run {
        suite: PathBuf,
        /// Shots per assertion (per measurement setting for tomography; 0 = exact).
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Minimum probability of passing.
        #[arg(long)]
        threshold: Option<f64>,
        /// Noise preset (`default`, `none`) or a JSON noise file.
        #[arg(long)]
        noise: Option<String>,
        /// Store counts and reconstructed matrices in this directory.
        #[arg(long, value_name = "DIR")]
        save_data: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Write the report here instead of standard output.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Sweep shot counts and report alpha, beta and Youden's J as CSV.
    Sweep {
        sweep: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Noise preset (`default`, `none`) or a JSON noise file.
        #[arg(long)]
        noise: Option<String>,
        /// Add pass-rate columns at threshold 0.05.
        #[arg(long)]
        pass_rates: bool,
        /// Print wall time per logical shot to standard error.
        #[arg(long)]
        timing: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn emit(bytes: &[u8], output: Option<&PathBuf>) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, bytes).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run {
            suite,
            shots,
            seed,
            threshold,
            noise,
            save_data,
            format,
            output,
        } => {
            let options = RunOptions {
                shots,
                seed,
                threshold,
                noise: noise.as_deref().map(load_noise).transpose()?,
                save_data,
                format: match format {
                    Format::Text => ReportFormat::Text,
                    Format::Json => ReportFormat::Json,
                },
            };
            let out = cmd_run(&suite, &options)?;
            emit(&out.rendered, output.as_ref())?;
            Ok(out.exit_code)
        }
        Command::Sweep {
            sweep,
            seed,
            trials,
            noise,
            pass_rates,
            timing,
            output,
        } => {
            let noise = noise.as_deref().map(load_noise).transpose()?;
            let (csv, out) = cmd_sweep(&sweep, seed, trials, noise, pass_rates)?;
            emit(csv.as_bytes(), output.as_ref())?;
            if timing {
                eprintln!("{}: {:.3e} s per shot", out.protocol, out.seconds_per_shot);
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
