use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use indep_decomp::generate::{generate, GeneratorKind, GeneratorSpec};
use indep_decomp::io::{
    approx_json, barycenter_json, checks_table, decomposition_json, emit_convergence_csv, ot_json, parse_instance,
    parse_measure, serialize_instance, verify_json,
};
use indep_decomp::parallel::{thread_cap_from_env, with_thread_cap};
use indep_decomp::verify::{all_passed, verify_approximation, verify_decomposition};
use indep_decomp::{
    best_approximation, decompose, solve_w2, ApproxOptions, BarycenterMode, BarycenterProblem, DecompositionOptions,
    Error,
};

/// Best independent approximation and series decomposition of a random
/// vector given a finite conditioning partition.
///
/// Exit status: 0 on success, 1 on a failed check or solver failure, 2 on
/// invalid input. INDEP_DECOMP_THREADS caps worker threads (0 = automatic).
#[derive(Parser)]
#[command(name = "indep-decomp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a generated instance as JSON.
    Gen {
        #[arg(long, value_parser = parse_kind)]
        kind: GeneratorKind,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        atoms: usize,
        #[arg(long)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Optimal W2 coupling between two measure files.
    Ot {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
    },
    /// Barycenter of the conditional laws (exact in dimension 1 unless a
    /// support size is given).
    Barycenter {
        input: PathBuf,
        #[arg(long)]
        support_size: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Best independent approximation with its statistics.
    Approx {
        input: PathBuf,
        /// Include the refined (x, y, mass) cells of every atom.
        #[arg(long)]
        emit_cells: bool,
    },
    /// Iterated decomposition; report JSON on stdout, convergence table to a CSV file.
    Decompose {
        input: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        #[arg(long, default_value_t = 100)]
        max_terms: usize,
        #[arg(long)]
        csv: PathBuf,
    },
    /// Run every check; JSON ledger on stdout, table on stderr.
    Verify {
        input: PathBuf,
        /// Also decompose and check the decomposition.
        #[arg(long)]
        full: bool,
    },
}

fn parse_kind(s: &str) -> Result<GeneratorKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

enum Failure {
    Violation,
    Error(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Gen { kind, dim, atoms, points, seed } => {
            let cv = generate(&GeneratorSpec { kind, dim, atoms, points, seed })?;
            print!("{}", serialize_instance(&cv));
        }
        Command::Ot { mu, nu } => {
            let r = solve_w2(&parse_measure(&read(&mu)?)?, &parse_measure(&read(&nu)?)?)?;
            print!("{}", ot_json(&r).render());
        }
        Command::Barycenter { input, support_size, seed } => {
            let cv = parse_instance(&read(&input)?)?;
            let mut problem = BarycenterProblem::from_variable(&cv);
            problem.support_size = support_size;
            problem.seed = seed;
            if support_size.is_some() {
                problem.mode = BarycenterMode::FreeSupport;
            }
            print!("{}", barycenter_json(&problem.solve()?).render());
        }
        Command::Approx { input, emit_cells } => {
            let cv = parse_instance(&read(&input)?)?;
            let r = best_approximation(&cv, &ApproxOptions::default())?;
            print!("{}", approx_json(&r, emit_cells).render());
        }
        Command::Decompose { input, eps, max_terms, csv } => {
            let cv = parse_instance(&read(&input)?)?;
            let opts = DecompositionOptions { eps_stop: eps, max_terms, ..Default::default() };
            let report = decompose(&cv, &opts)?;
            fs::write(&csv, emit_convergence_csv(&report))
                .map_err(|e| Error::Input(format!("cannot write {}: {e}", csv.display())))?;
            print!("{}", decomposition_json(&report).render());
        }
        Command::Verify { input, full } => {
            let cv = parse_instance(&read(&input)?)?;
            let approx = verify_approximation(&cv, &best_approximation(&cv, &ApproxOptions::default())?);
            let decomp = if full { Some(verify_decomposition(&decompose(&cv, &DecompositionOptions::default())?)) } else { None };
            print!("{}", verify_json(&approx, decomp.as_deref()).render());
            eprint!("{}", checks_table(&approx));
            if let Some(d) = &decomp {
                eprint!("\n{}", checks_table(d));
            }
            if !(all_passed(&approx) && decomp.as_deref().is_none_or(all_passed)) {
                return Err(Failure::Violation);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = thread_cap_from_env().and_then(|threads| with_thread_cap(threads, || run(cli.command)));
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Failure::Violation)) => {
            eprintln!("verification failed");
            ExitCode::from(1)
        }
        Ok(Err(Failure::Error(e))) | Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}
