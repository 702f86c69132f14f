use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use region_solve::cli::scenario::load_scenario;
use region_solve::cli::{
    cmd_check, cmd_construct_pair, cmd_reproduce_example, cmd_solve, seed_from_env, CliError, Exit,
    Outcome,
};
use region_solve::solver::Operator;

#[derive(Parser)]
#[command(
    name = "region-solve",
    version,
    about = "Boundary value problems confined to a solution region"
)]
struct Args {
    /// Also write the JSON report to this file.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the hypothesis checks listed in the scenario.
    Check { scenario: PathBuf },
    /// Solve the scenario by homotopy continuation.
    Solve {
        scenario: PathBuf,
        /// J, K or Kp. Defaults to the scenario's choice.
        #[arg(long, value_parser = parse_operator)]
        operator: Option<Operator>,
        /// Number of grid intervals.
        #[arg(long = "N")]
        intervals: Option<usize>,
        /// Solution CSV: t, x1..xn, h, norm.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the blended pair of the scenario's region.
    ConstructPair { scenario: PathBuf },
    /// Solve the built-in ball example and check containment.
    ReproduceExample {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_operator(s: &str) -> Result<Operator, String> {
    Operator::parse(s).ok_or_else(|| format!("unknown operator {s:?}; use J, K or Kp"))
}

fn run(args: &Args) -> Result<Outcome, CliError> {
    let seed = seed_from_env()?;
    match &args.command {
        Command::Check { scenario } => cmd_check(&load_scenario(scenario)?.build(false, seed)?),
        Command::Solve {
            scenario,
            operator,
            intervals,
            out,
        } => cmd_solve(
            &load_scenario(scenario)?.build(true, seed)?,
            *operator,
            *intervals,
            out.as_deref(),
        ),
        Command::ConstructPair { scenario } => {
            cmd_construct_pair(&load_scenario(scenario)?.build(true, seed)?)
        }
        Command::ReproduceExample { out } => cmd_reproduce_example(seed, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            // usage errors are input errors; 2 is reserved for failed hypotheses
            return ExitCode::from(if e.use_stderr() {
                Exit::InputError as u8
            } else {
                0
            });
        }
    };
    match run(&args) {
        Ok(outcome) => {
            let text = serde_json::to_string_pretty(&outcome.report).expect("report serializes");
            if let Err(e) = writeln!(std::io::stdout(), "{text}") {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    eprintln!("error: cannot write report: {e}");
                    return ExitCode::from(Exit::InputError as u8);
                }
            }
            if let Some(path) = &args.report {
                if let Err(e) = std::fs::write(path, &text) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::from(Exit::InputError as u8);
                }
            }
            ExitCode::from(outcome.exit as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(Exit::InputError as u8)
        }
    }
}
