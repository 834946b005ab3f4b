use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eigenpde::error::Error;
use eigenpde::scenario::{self, Outcome};

/// Batch solver for eigenvalue-type elliptic equations on Hermitian and Hessian grids.
#[derive(Debug, Parser)]
#[command(name = "eigenpde", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// Scenario JSON file, or the name of a builtin scenario.
    #[arg(long, value_name = "PATH")]
    scenario: Option<String>,

    /// Directory for report.json and field CSVs.
    #[arg(long, value_name = "DIR", default_value = "eigenpde-out")]
    out: PathBuf,

    /// Worker threads for per-point kernels (default: all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,

    /// Seed for randomized identity suites.
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the registered operator families.
    ListOperators,
    /// Print the builtin scenarios.
    ListScenarios,
    /// Print a builtin scenario as JSON (a starting point for custom files).
    Show { name: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Some(Command::ListOperators) => {
            print!("{}", scenario::operator_table());
            return ExitCode::SUCCESS;
        }
        Some(Command::ListScenarios) => {
            let width = scenario::BUILTINS.iter().map(|b| b.0.len()).max().unwrap_or(0);
            for (name, about) in scenario::BUILTINS {
                println!("{name:<width$}  {about}");
            }
            return ExitCode::SUCCESS;
        }
        Some(Command::Show { name }) => {
            return match scenario::builtin(&name) {
                Some(s) => {
                    println!("{}", serde_json::to_string_pretty(&s).expect("scenario serializes"));
                    ExitCode::SUCCESS
                }
                None => fail(&Error::Parse(format!("unknown builtin '{name}'"))),
            };
        }
        None => {}
    }
    let Some(arg) = cli.scenario else {
        return fail(&Error::Parse("--scenario is required (or use a subcommand; see --help)".into()));
    };
    if let Some(n) = cli.threads {
        if let Err(e) = set_threads(n) {
            return fail(&e);
        }
    }
    let s = match scenario::resolve(&arg) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    let outcome = scenario::run(&s, cli.seed);
    let (outcome, error) = match outcome {
        Ok(o) => {
            let err = o.failure.as_ref().map(|e| (e.category(), e.to_string()));
            (o, err)
        }
        Err(e) => (
            Outcome {
                report: scenario::failure_report(&s.name, s.kind(), &e),
                fields: Vec::new(),
                failure: None,
            },
            Some((e.category(), e.to_string())),
        ),
    };
    if let Err(e) = scenario::write_outputs(&cli.out, &outcome) {
        return fail(&e);
    }
    match error {
        None => {
            println!("{}: ok ({})", s.name, cli.out.join("report.json").display());
            ExitCode::SUCCESS
        }
        Some((category, message)) => {
            eprintln!("{}: {} error: {message}", s.name, scenario::category_name(category));
            eprintln!("report written to {}", cli.out.join("report.json").display());
            ExitCode::from(scenario::exit_code(category) as u8)
        }
    }
}

fn fail(e: &Error) -> ExitCode {
    let category = e.category();
    eprintln!("{} error: {e}", scenario::category_name(category));
    ExitCode::from(scenario::exit_code(category) as u8)
}

#[cfg(feature = "parallel")]
fn set_threads(n: usize) -> Result<(), Error> {
    if n == 0 {
        return Err(Error::Parse("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Argument(format!("cannot configure thread pool: {e}")))
}

#[cfg(not(feature = "parallel"))]
fn set_threads(n: usize) -> Result<(), Error> {
    if n == 0 {
        return Err(Error::Parse("--threads must be at least 1".into()));
    }
    Ok(())
}
