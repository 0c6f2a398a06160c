//! Command-line pipeline: model ingestion, abstraction construction,
//! strategy synthesis, closed-loop simulation, bisimulation checking, and
//! the two constructed gap demonstrations.
//!
//! Exit codes: 0 success / verdict positive, 1 verdict negative
//! (certification failure, empty winning set, unsatisfied runs,
//! non-bisimilar), 2 usage or input errors.

mod commands;

use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "symcon", version, about = "Finite-abstraction controller synthesis for disturbed linear systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and certify a finite abstraction of the plant
    Abstract {
        #[arg(long)]
        project: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Sampling period override
        #[arg(long)]
        tau: Option<f64>,
        /// State grid pitch override
        #[arg(long)]
        eta: Option<f64>,
        /// Label grid pitch override
        #[arg(long)]
        mu: Option<f64>,
        /// Bisimulation precision override
        #[arg(long)]
        eps: Option<f64>,
        /// Inter-sample deviation bound override
        #[arg(long)]
        delta: Option<f64>,
        /// Number of input substeps per period
        #[arg(long)]
        substeps: Option<usize>,
        /// Write the abstraction even if certification fails
        #[arg(long)]
        force: bool,
    },
    /// Robustify the specification and synthesize a strategy
    Synth {
        #[arg(long)]
        project: PathBuf,
        #[arg(long)]
        abstraction: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Derive the sampled controller and execute closed-loop runs
    Simulate {
        #[arg(long)]
        project: PathBuf,
        #[arg(long)]
        abstraction: PathBuf,
        #[arg(long)]
        strategy: PathBuf,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[arg(long, default_value_t = 40)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = DistKind::Uniform)]
        dist: DistKind,
        #[arg(long)]
        out: PathBuf,
        /// Also emit SVG time plots per run
        #[arg(long)]
        svg: bool,
    },
    /// Check alternating approximate bisimilarity of two abstractions
    CheckBisim {
        #[arg(long)]
        abs1: PathBuf,
        #[arg(long)]
        abs2: PathBuf,
        #[arg(long)]
        eps: f64,
    },
    /// Reproduce a gap between plant-level and abstraction-level synthesis
    Counterexample {
        /// Which demonstration: tp1 (satisfiable spec the abstraction
        /// cannot win) or tp2 (abstraction win the plant violates)
        #[arg(value_enum)]
        which: Which,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 11)]
        seed: u64,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum DistKind {
    Zero,
    Uniform,
    Adversarial,
}

#[derive(Copy, Clone, ValueEnum)]
enum Which {
    Tp1,
    Tp2,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Abstract { project, out, tau, eta, mu, eps, delta, substeps, force } => {
            commands::cmd_abstract(&project, &out, [tau, eta, mu, eps, delta], substeps, force)
        }
        Command::Synth { project, abstraction, out } => {
            commands::cmd_synth(&project, &abstraction, &out)
        }
        Command::Simulate { project, abstraction, strategy, runs, steps, seed, dist, out, svg } => {
            let kind = match dist {
                DistKind::Zero => symcon::runtime::GeneratorKind::Zero,
                DistKind::Uniform => symcon::runtime::GeneratorKind::Uniform,
                DistKind::Adversarial => symcon::runtime::GeneratorKind::Adversarial,
            };
            commands::cmd_simulate(&project, &abstraction, &strategy, runs, steps, seed, kind, &out, svg)
        }
        Command::CheckBisim { abs1, abs2, eps } => commands::cmd_check_bisim(&abs1, &abs2, eps),
        Command::Counterexample { which, out, seed } => {
            let name = match which {
                Which::Tp1 => "tp1",
                Which::Tp2 => "tp2",
            };
            commands::cmd_counterexample(name, out.as_deref(), seed)
        }
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
