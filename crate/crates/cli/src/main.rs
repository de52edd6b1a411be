//! `netmpc` — synthesize, certify, tune, bound, value, simulate, reproduce.
//!
//! One executable over the network-control library: parse a model, run one
//! stage of the pipeline, and print a human-readable report or (with
//! `--json`) a machine-readable one. Simulations can additionally write
//! the trajectory as CSV.
//!
//! Conventions shared by every subcommand:
//! * reports carry the tool version and the SHA-256 (first 16 hex digits)
//!   of the model file bytes, so outputs are traceable to their inputs;
//! * no timestamps or other run-dependent data — identical inputs produce
//!   byte-identical outputs;
//! * exit code 0 on success, 1 on numerical failure, 2 on input errors
//!   (bad flags, unparsable or invalid models);
//! * `NETMPC_TOL` overrides the default tolerance (1e-6) used for report
//!   comparisons (simulation bound checks, `reproduce` diffs).

mod commands;
mod output;
mod report;

use clap::{Parser, Subcommand};

/// Routing-network control: synthesis, certification, tuning, horizons,
/// open-loop values and closed-loop simulation.
#[derive(Parser)]
#[command(name = "netmpc", version, about, max_term_width = 100)]
struct Cli {
    /// Emit machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the routing values p, the successor map and the gain edges.
    Synthesize {
        /// Model file (JSON).
        #[arg(long)]
        model: String,
    },
    /// Check a scaling for admissibility and certify its closed-loop cost.
    Certify {
        #[arg(long)]
        model: String,
        /// Scaling vector, comma-separated, one entry per vertex in (0, 1].
        #[arg(long, value_delimiter = ',', required = true)]
        lambda: Vec<f64>,
    },
    /// Optimize the scaling: best certifiable ratio gamma* and lambda*.
    Tune {
        #[arg(long)]
        model: String,
        /// Also report the smallest horizon reaching this degree.
        #[arg(long, default_value_t = 0.5)]
        alpha_min: f64,
    },
    /// Horizon guarantees for a given ratio, no model required.
    Bound {
        /// Certified cost ratio gamma >= 1.
        #[arg(long)]
        gamma: f64,
        /// Also report the smallest horizon reaching this degree.
        #[arg(long)]
        alpha_min: Option<f64>,
        /// Last horizon of the degree table (default: minimal + 10).
        #[arg(long)]
        n_max: Option<u32>,
    },
    /// Optimal open-loop value and plan for one horizon.
    Value {
        #[arg(long)]
        model: String,
        /// Initial state: `xbar`, `zero`, or comma-separated values.
        #[arg(long)]
        x0: String,
        #[arg(long)]
        horizon: u32,
        /// Dump the assembled linear program to this file (plain text).
        #[arg(long)]
        export_lp: Option<String>,
    },
    /// Run a closed loop and summarize its cost and guarantees.
    Simulate {
        #[arg(long)]
        model: String,
        /// `mpc`, `scaled` or `unconstrained`.
        #[arg(long)]
        controller: String,
        /// Planning horizon (mpc only).
        #[arg(long)]
        horizon: Option<u32>,
        /// Scaling for the scaled controller (default: tuned optimum).
        #[arg(long, value_delimiter = ',')]
        lambda: Option<Vec<f64>>,
        /// Initial state: `xbar`, `zero`, or comma-separated values.
        #[arg(long)]
        x0: String,
        /// Step budget.
        #[arg(long, default_value_t = 200)]
        steps: u32,
        /// Write the trajectory as CSV to this file.
        #[arg(long)]
        csv: Option<String>,
    },
    /// Run the full pipeline on the bundled reference model and diff the
    /// results against its stored expected values.
    Reproduce,
}

fn main() {
    // Die quietly when the read end of a pipe closes (`netmpc ... | head`)
    // instead of panicking on the failed write.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }

    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {}", err.message);
            err.code
        }
    };
    std::process::exit(code);
}

/// A failure with its process exit code: 1 numerical, 2 input.
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }
}

impl From<netmpc_core::Error> for CliError {
    fn from(err: netmpc_core::Error) -> Self {
        use netmpc_core::Error::*;
        let code = match err {
            NumericalFailure(_) | MaxIterations { .. } | Unbounded
            | CertificateMismatch(_) | AdmissibilityViolation { .. }
            | TruncatedCost { .. } => 1,
            _ => 2,
        };
        CliError { code, message: err.to_string() }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Synthesize { model } => commands::synthesize(model, cli.json),
        Command::Certify { model, lambda } => commands::certify_cmd(model, lambda, cli.json),
        Command::Tune { model, alpha_min } => commands::tune(model, *alpha_min, cli.json),
        Command::Bound { gamma, alpha_min, n_max } => {
            commands::bound(*gamma, *alpha_min, *n_max, cli.json)
        }
        Command::Value { model, x0, horizon, export_lp } => {
            commands::value(model, x0, *horizon, export_lp.as_deref(), cli.json)
        }
        Command::Simulate { model, controller, horizon, lambda, x0, steps, csv } => {
            commands::simulate(
                model,
                controller,
                *horizon,
                lambda.as_deref(),
                x0,
                *steps,
                csv.as_deref(),
                cli.json,
            )
        }
        Command::Reproduce => commands::reproduce(cli.json),
    }
}
