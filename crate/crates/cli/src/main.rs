//! `slowcone`: simulate, certify and classify slow-fast cone-monotone systems.

mod commands;
mod source;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::DemoArgs;
use crate::source::{Resolved, SourceArgs};

#[derive(Parser)]
#[command(name = "slowcone", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and write it as CSV.
    Simulate {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        eps: Option<f64>,
        /// Initial state, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        ic: String,
        /// Final time.
        #[arg(long, default_value_t = 100.0)]
        t: f64,
        /// Resample to N uniform times instead of accepted steps.
        #[arg(long)]
        dense: Option<usize>,
        /// Directory for trajectory.csv; CSV goes to stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check cone cooperativity on a grid and along sampled pairs.
    Certify {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        eps: Option<f64>,
        /// λ as an expression in the states, or `auto`.
        #[arg(long, default_value = "auto")]
        lambda: String,
        /// algebraic, dynamic, eventual or all.
        #[arg(long, default_value = "algebraic")]
        mode: String,
        /// Grid points per axis.
        #[arg(long, default_value_t = 9)]
        grid: usize,
        /// Number of sampled pairs.
        #[arg(long, default_value_t = 20)]
        n: usize,
        /// Boundary directions per pair and time.
        #[arg(long, default_value_t = 64)]
        directions: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the critical and first-order slow manifolds.
    Manifold {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 9)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify the ω-limit set of one initial state.
    Classify {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        ic: String,
        /// Exit with code 2 unless the outcome is this kind
        /// (closed-orbit, equilibrium or unresolved).
        #[arg(long)]
        expect: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify seeded uniform samples of the domain box.
    Sweep {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Exit with code 2 when the closed-orbit fraction is below this.
        #[arg(long)]
        min_closed: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce the four-dimensional example end to end.
    DemoPaper {
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Length of the exported time series.
        #[arg(long, default_value_t = 50.0)]
        t: f64,
        #[arg(long, default_value_t = 5000)]
        dense: usize,
        #[arg(long, default_value = "paper-demo")]
        out: PathBuf,
    },
    /// Parse a system and print its normalised form.
    ParseCheck {
        #[command(flatten)]
        source: SourceArgs,
    },
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Simulate { source, eps, ic, t, dense, out } => {
            let r = Resolved::load(&source, eps)?;
            commands::simulate(&r, &ic, t, dense, out.as_deref())
        }
        Command::Certify { source, eps, lambda, mode, grid, n, directions, seed, out } => {
            let r = Resolved::load(&source, eps)?;
            commands::certify(&r, &lambda, &mode, grid, n, directions, seed, out.as_deref())
        }
        Command::Manifold { source, eps, grid, out } => {
            let r = Resolved::load(&source, eps)?;
            commands::manifold(&r, grid, out.as_deref())
        }
        Command::Classify { source, eps, ic, expect, out } => {
            let r = Resolved::load(&source, eps)?;
            commands::classify(&r, &ic, expect.as_deref(), out.as_deref())
        }
        Command::Sweep { source, eps, n, seed, min_closed, out } => {
            let r = Resolved::load(&source, eps)?;
            commands::sweep(&r, n, seed, min_closed, out.as_deref())
        }
        Command::DemoPaper { eps, n, seed, t, dense, out } => commands::demo_paper(&DemoArgs {
            eps,
            n,
            seed,
            t_end: t,
            dense,
            out,
        }),
        Command::ParseCheck { source } => commands::parse_check(&source),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
