//! `ppnmm`: synthesize pixels, unmix them, and rerun the synthetic
//! two-endmember comparison between the sparse and uniform abundance priors.
//!
//! Exit codes: 0 success, 1 usage error (bad flags, incompatible inputs),
//! 2 input parse/validation error, 3 runtime numerical error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "ppnmm",
    version,
    about = "Sparse-prior Bayesian unmixing under the polynomial post-nonlinear mixing model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every workflow. Flags win over the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dirichlet concentration (1 gives the uniform-prior baseline).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Total MCMC iterations per chain.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long = "burn-in")]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long = "noise-sigma")]
    pub noise_sigma: Option<f64>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic pixel from the library and the configured truth.
    Synth {
        /// Library CSV (default: the bundled 6-endmember library).
        #[arg(long)]
        library: Option<PathBuf>,
        /// Output pixel CSV; provenance goes to `<output>.provenance.json`.
        #[arg(long, short)]
        output: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the sampler on one pixel and write posterior summaries.
    Unmix {
        #[arg(long)]
        library: Option<PathBuf>,
        /// Pixel CSV (`band,wavelength,reflectance`).
        #[arg(long)]
        pixel: PathBuf,
        #[arg(long = "out-dir", short)]
        out_dir: PathBuf,
        /// Also write the full chain to `trace.csv`.
        #[arg(long)]
        trace: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Rerun the synthetic experiment for β = 0.5 and β = 1 with paired seeds.
    Reproduce {
        #[arg(long = "out-dir", short)]
        out_dir: PathBuf,
        /// 5 runs × 2000 iterations instead of 20 × 10000.
        #[arg(long)]
        quick: bool,
        /// Also write the chain of run 1 for each prior.
        #[arg(long)]
        trace: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Parse and validate a library CSV, then print its shape.
    ValidateLibrary { path: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Synth {
            library,
            output,
            overrides,
        } => commands::synth(library.as_deref(), &output, &overrides),
        Command::Unmix {
            library,
            pixel,
            out_dir,
            trace,
            overrides,
        } => commands::unmix(library.as_deref(), &pixel, &out_dir, trace, &overrides),
        Command::Reproduce {
            out_dir,
            quick,
            trace,
            overrides,
        } => commands::reproduce(&out_dir, quick, trace, &overrides),
        Command::ValidateLibrary { path } => commands::validate_library(&path),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
