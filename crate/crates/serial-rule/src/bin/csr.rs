//! Command-line driver for the constrained serial rule.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serial_rule::cli::{self, DecomposeMode};

#[derive(Parser)]
#[command(
    name = "csr",
    about = "Constrained serial rule: exact random assignment under linear constraints",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance and write the result document.
    Solve {
        /// Instance file (JSON).
        instance: PathBuf,
        /// Bottleneck-search removal order as comma-separated agent ids.
        #[arg(long)]
        order: Option<String>,
        /// Include per-round LP points in the result.
        #[arg(long)]
        trace: bool,
        /// Write the result here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit a result file: efficiency, same-type envy, promises.
    Audit {
        instance: PathBuf,
        result: PathBuf,
    },
    /// Decompose a solved assignment into a lottery.
    Decompose {
        instance: PathBuf,
        result: PathBuf,
        /// `bvn` ignores side constraints; `exact` enforces them.
        #[arg(long, value_enum, default_value_t = ModeArg::Bvn)]
        mode: ModeArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the mechanism against the eating oracles (unconstrained
    /// instances only).
    Compare { instance: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Bvn,
    Exact,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve {
            instance,
            order,
            trace,
            out,
        } => cli::cmd_solve(&instance, order.as_deref(), trace, out.as_deref()),
        Command::Audit { instance, result } => cli::cmd_audit(&instance, &result),
        Command::Decompose {
            instance,
            result,
            mode,
            out,
        } => {
            let mode = match mode {
                ModeArg::Bvn => DecomposeMode::Bvn,
                ModeArg::Exact => DecomposeMode::Exact,
            };
            cli::cmd_decompose(&instance, &result, mode, out.as_deref())
        }
        Command::Compare { instance } => cli::cmd_compare(&instance),
    };
    ExitCode::from(code as u8)
}
