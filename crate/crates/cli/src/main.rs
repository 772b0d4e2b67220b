use std::path::PathBuf;
use std::process::ExitCode;

use adjoint_dae::problems::{build_problem, list_problems, problem_info, ProblemParams};
use adjoint_dae_cli::{emit_report, run_experiment, ExperimentConfig, Format};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "adjoint-dae", version, about = "Adjoint error estimates for implicit Euler DAE solves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a TOML config.
    Run {
        config: PathBuf,
        /// Output file; overrides the config. Stdout when neither is set.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    ListProblems,
    Describe { problem: String },
}

fn run(config: PathBuf, output: Option<PathBuf>, format: Option<Format>, jobs: usize) -> ExitCode {
    let exp = match ExperimentConfig::from_path(&config).and_then(ExperimentConfig::validate) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let table = match run_experiment(&exp, jobs) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    };
    let format = format.or(exp.config.output.format).unwrap_or_default();
    let output = output.or_else(|| exp.config.output.path.clone());
    if let Err(e) = emit_report(&table, format, output.as_deref()) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let mut failed = 0;
    for (row, msg) in table.failures() {
        eprintln!("cell {} dt={} T={} {} failed: {msg}", row.problem, row.dt, row.t_end, row.method);
        failed += 1;
    }
    if failed > 0 {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn describe(name: &str) -> ExitCode {
    let info = match problem_info(name) {
        Ok(i) => i,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    println!("{}: {}", info.name, info.summary);
    println!("index: {}", info.index);
    println!("parameters: {}", info.parameters);
    if let Ok(p) = build_problem::<f64>(name, &ProblemParams::default()) {
        let ic = p.initial_conditions();
        println!("dimensions (defaults): n = {}, m = {}", p.n_differential(), p.n_algebraic());
        println!("t0 = {}", ic.t0);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, output, format, jobs } => run(config, output, format, jobs),
        Command::ListProblems => {
            for p in list_problems() {
                println!("{:<10} {:<19} {}", p.name, p.index.to_string(), p.summary);
            }
            ExitCode::SUCCESS
        }
        Command::Describe { problem } => describe(&problem),
    }
}
