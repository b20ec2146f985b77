use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use symcon_cli::commands::{self, CliError, FrrReport};
use symcon_cli::problem::Problem;

/// Symbolic controller synthesis for sampled nonlinear systems: grid
/// abstraction, fixed-point synthesis and perturbed closed-loop simulation.
#[derive(Parser)]
#[command(name = "symcon", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the finite abstraction of a problem.
    Abstract {
        #[arg(long)]
        problem: PathBuf,
        /// Output path of the transition artifact.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (0 = default pool).
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Solve the abstract control problem and write the controller file.
    Synthesize {
        #[arg(long)]
        problem: PathBuf,
        /// Transition artifact produced by `abstract`.
        #[arg(long)]
        transitions: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (accepted for symmetry; synthesis is sequential).
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Run seeded perturbed closed-loop simulations.
    Simulate {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        controller: PathBuf,
        #[arg(long, default_value_t = 10)]
        runs: u32,
        /// Maximum number of sampling periods per run.
        #[arg(long, default_value_t = 1000)]
        horizon: u32,
        /// Directory receiving one trace CSV per run.
        #[arg(long)]
        out: PathBuf,
        /// Base seed (default: the problem file's seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Pick uniformly among admissible inputs instead of the lowest id.
        #[arg(long, default_value_t = false)]
        random_inputs: bool,
    },
    /// Check a feedback-refinement fixture triple.
    VerifyFrr {
        /// Concrete system fixture.
        #[arg(long)]
        s1: PathBuf,
        /// Abstract system fixture.
        #[arg(long)]
        s2: PathBuf,
        /// Relation fixture.
        #[arg(long)]
        relation: PathBuf,
    },
}

const EXIT_UNSOLVABLE: u8 = 3;

fn run() -> Result<u8, CliError> {
    match Cli::parse().command {
        Command::Abstract {
            problem,
            out,
            workers,
        } => {
            let p = Problem::load(&problem)?;
            let stats = commands::cmd_abstract(&p, &out, workers)?;
            println!(
                "abstract plant={} cells={} pairs={} admissible={} transitions={} wall={:.3}s",
                p.plant_name,
                stats.cells,
                stats.pairs,
                stats.admissible_pairs,
                stats.transitions,
                stats.wall.as_secs_f64()
            );
            Ok(0)
        }
        Command::Synthesize {
            problem,
            transitions,
            out,
            workers: _,
        } => {
            let p = Problem::load(&problem)?;
            let stats = commands::cmd_synthesize(&p, &transitions, &out)?;
            println!(
                "synthesize winning={} domain={} iterations={} initial={}/{} wall={:.3}s",
                stats.winning,
                stats.domain,
                stats.iterations,
                stats.initial_winning,
                stats.initial_total,
                stats.wall.as_secs_f64()
            );
            if !stats.solved() {
                eprintln!("problem is unsolvable as posed: initial cells not in the winning set");
                return Ok(EXIT_UNSOLVABLE);
            }
            Ok(0)
        }
        Command::Simulate {
            problem,
            controller,
            runs,
            horizon,
            out,
            seed,
            random_inputs,
        } => {
            let p = Problem::load(&problem)?;
            let stats =
                commands::cmd_simulate(&p, &controller, runs, horizon, &out, seed, random_inputs)?;
            println!(
                "simulate runs={} satisfied={} outside_domain={} blocked={}",
                stats.runs, stats.satisfied, stats.outside_domain, stats.blocked
            );
            if stats.satisfied != stats.runs {
                eprintln!("closed-loop specification violated in {} runs", stats.runs - stats.satisfied);
                return Ok(EXIT_UNSOLVABLE);
            }
            Ok(0)
        }
        Command::VerifyFrr { s1, s2, relation } => {
            match commands::cmd_verify_frr(&s1, &s2, &relation)? {
                FrrReport::Holds => println!("feedback refinement relation holds"),
                FrrReport::Violated(w) => println!(
                    "feedback refinement violated at (x1={}, x2={}) input {}: {:?} {:?}",
                    w.x1, w.x2, w.u, w.condition, w.offending
                ),
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
