use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tqsvd_core::harness::{
    generate_low_multirank_tensor, generate_preference_tensor, run_experiment, SUITES,
};
use tqsvd_core::tensor::io::{load_tns1, save_tns1};
use tqsvd_core::tsvd::{tsvd, write_factors};
use tqsvd_core::{Error, ExperimentConfig, RunReport};

const EXIT_CHECKS_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_QUBIT_CAP: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

/// t-SVD toolkit, quantum t-SVD simulator and recommendation experiments.
#[derive(Parser)]
#[command(name = "tqsvd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a named verification suite with default parameters.
    Verify {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Write a synthetic tensor in TNS1 format.
    Gen {
        #[arg(long, value_enum)]
        kind: GenKind,
        /// Tensor dimensions for `lowrank`, e.g. `4,4,4`.
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
        /// Fourier-slice ranks for `lowrank`, e.g. `2,1,2,1`.
        #[arg(long, value_delimiter = ',')]
        targets: Vec<usize>,
        /// Users, products and contexts for `pref`.
        #[arg(long, default_value_t = 8)]
        n: usize,
        /// Archetypes for `pref`.
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Factor a TNS1 tensor, keep `k` components and write the factors.
    Tsvd {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Lowrank,
    Pref,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Config(_) => EXIT_CONFIG,
                Error::QubitCapExceeded { .. } => {
                    eprintln!("hint: set mode = \"oracle\" or raise TQSVD_QUBIT_CAP");
                    EXIT_QUBIT_CAP
                }
                _ => EXIT_RUNTIME,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> tqsvd_core::Result<ExitCode> {
    match cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(config).map_err(|e| match e {
                Error::Io(io) => Error::Config(format!("cannot read config: {io}")),
                other => other,
            })?;
            Ok(summarize(&run_experiment(&cfg)?))
        }
        Command::Verify {
            suite,
            seed,
            json,
            csv,
        } => {
            let mut cfg = ExperimentConfig::suite(&suite, seed);
            cfg.output_json = json;
            cfg.output_csv = csv;
            Ok(summarize(&run_experiment(&cfg)?))
        }
        Command::Gen {
            kind,
            dims,
            targets,
            n,
            k,
            gamma,
            seed,
            out,
        } => {
            let t = match kind {
                GenKind::Lowrank => generate_low_multirank_tensor(&dims, &targets, seed)?,
                GenKind::Pref => generate_preference_tensor(n, k, gamma, seed)?,
            };
            save_tns1(&out, &t)?;
            println!("wrote {:?} tensor to {}", t.dims(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Tsvd { input, k, out } => {
            let a = load_tns1(&input)?;
            let full = tsvd(&a)?;
            let factors = match k {
                Some(k) => full.truncated(k)?,
                None => full,
            };
            let norm = a.frobenius_norm();
            let residual = factors.reconstruct()?.sub(&a)?.frobenius_norm();
            let rel = if norm > 0.0 { residual / norm } else { residual };
            let manifest = write_factors(&out, a.dims(), &factors, rel)?;
            println!("{}", serde_json::to_string_pretty(&manifest)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Prints one line per check and maps the outcome to the exit code.
fn summarize(report: &RunReport) -> ExitCode {
    for c in &report.checks {
        let value = c.value.map_or(String::new(), |v| format!(" value={v:e}"));
        let tol = c.tolerance.map_or(String::new(), |t| format!(" tol={t:e}"));
        let detail = if c.detail.is_empty() {
            String::new()
        } else {
            format!(" ({})", c.detail)
        };
        let mark = if c.passed { "PASS" } else { "FAIL" };
        println!("{mark} {}{value}{tol}{detail}", c.name);
    }
    println!(
        "{}: {}/{} checks passed in {:.0} ms",
        report.name,
        report.checks.iter().filter(|c| c.passed).count(),
        report.checks.len(),
        report.elapsed_ms
    );
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECKS_FAILED)
    }
}
