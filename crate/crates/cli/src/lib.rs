//! Command-line front end for `doeblin-core`.
//!
//! Exit codes: `0` every computed residual is within its threshold, `1`
//! configuration or usage error, `2` the kernel admits no minorization (no
//! strict `N = 1` certificate, or no power within `--n-max`), `3` numerical
//! failure, rejected certificate, or a residual over its threshold.

// `!(x > y)` is the NaN-rejecting form used for argument validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod expr;
pub mod io;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::{exit, CliError, CliResult};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DOEBLIN_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "doeblin", version, about = "Dominant eigenpairs of positive integral operators via rank-one minorization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides the config's `outputs.dir`.
    #[arg(long, env = OUT_DIR_ENV)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dominant eigenvalue, eigenfunction, projection and dominance check.
    Solve(Common),
    /// Sample D(λ) on a geometric grid above the spectral radius of R.
    Dcurve {
        #[command(flatten)]
        common: Common,
        /// Lower end; must exceed the estimate of ρ(R). Defaults just above it.
        #[arg(long, allow_negative_numbers = true)]
        lambda_min: Option<f64>,
        /// Upper end; defaults to 10‖T‖.
        #[arg(long, allow_negative_numbers = true)]
        lambda_max: Option<f64>,
        /// Number of geometrically spaced samples.
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// Search A^N for a strict certificate and report the peripheral spectrum.
    PowerDoeblin {
        #[command(flatten)]
        common: Common,
        /// Largest power N to try.
        #[arg(long, default_value_t = commands::DEFAULT_N_MAX)]
        n_max: usize,
    },
    /// Run every invariant check applicable to the configured kernel.
    Verify(Common),
}

/// Runs one command and returns its exit code. Errors are reported on stderr.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Solve(c) => commands::solve(&c.config, c.out.as_deref()).map(|_| ()),
        Command::Dcurve {
            common,
            lambda_min,
            lambda_max,
            points,
        } => commands::dcurve(&common.config, common.out.as_deref(), lambda_min, lambda_max, points).map(|_| ()),
        Command::PowerDoeblin { common, n_max } => {
            commands::power_doeblin(&common.config, common.out.as_deref(), n_max).map(|_| ())
        }
        Command::Verify(c) => commands::verify(&c.config, c.out.as_deref()).map(|_| ()),
    };
    match result {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("doeblin: {e}");
            e.exit_code()
        }
    }
}
