//! Command implementations behind the `region-solve` binary. Each command
//! returns a JSON report and an exit code; the binary only prints.

pub mod scenario;

use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::hypotheses::{
    check_h0, check_h0_prime, check_h5, Certifier, CheckReport, H5Variant, Verdict,
};
use crate::path::{Grid, GridError, SampledPath};
use crate::regions::AdmissiblePair;
use crate::solver::{
    interior_check, solve_homotopy, Operator, ProblemSpec, SolveError, SolveReport,
};
use crate::vecops::{join, norm};
use scenario::{parse_scenario, CheckName, Problem, ScenarioError};

pub const SCHEMA: u32 = 1;
pub const SEED_ENV: &str = "REGION_SOLVE_SEED";

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Exit {
    Ok = 0,
    InputError = 1,
    HypothesisFail = 2,
    NonConvergence = 3,
    ContainmentFail = 4,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("pair: {0}")]
    Pair(#[from] crate::regions::PairError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv: {0}")]
    CsvShape(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("bad {SEED_ENV}: {0}")]
    Seed(String),
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit: Exit,
    pub report: Value,
}

/// `REGION_SOLVE_SEED`, when set.
pub fn seed_from_env() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| CliError::Seed(v)),
        Err(_) => Ok(None),
    }
}

pub fn spec_for(problem: &Problem, intervals: usize) -> Result<ProblemSpec, SolveError> {
    ProblemSpec::new(
        problem.field.clone(),
        problem.pair.clone(),
        problem.scenario.bc,
        problem.functional.clone(),
        problem.r.clone(),
        intervals,
    )
}

fn chosen_operator(problem: &Problem, spec: &ProblemSpec, flag: Option<Operator>) -> Operator {
    flag.or(problem.operator)
        .unwrap_or_else(|| Operator::default_for(spec.condition()))
}

/// Runs the requested hypothesis checks.
pub fn cmd_check(problem: &Problem) -> Result<Outcome, CliError> {
    let pair = &problem.pair;
    let certifier = Certifier::new(pair, problem.samples, problem.seed);
    let grid = Grid::new(
        problem.scenario.interval[0],
        problem.scenario.interval[1],
        problem.options.intervals,
    )?;
    let mut reports: Vec<CheckReport> = Vec::new();
    let mut homotopy: Option<SolveReport> = None;
    for check in &problem.scenario.checks {
        let report = match check {
            CheckName::H0 => check_h0(&problem.region, &grid),
            CheckName::H0Prime => check_h0_prime(&problem.region, &grid),
            CheckName::H1 => certifier.h1(),
            CheckName::H2 => certifier.h2(),
            CheckName::H3 => certifier.h3(),
            CheckName::H4 => certifier.h4(&problem.field),
            CheckName::H4Prime => match certifier.search_h4_prime(&problem.field) {
                Some((_, _, _, report)) => report,
                None => {
                    let (a, b) = problem.region.interval();
                    certifier.h4_prime(&problem.field, None, 0.05 * (b - a), 0.5 * (a + b))
                }
            },
            CheckName::H4DoublePrime => {
                certifier.h4_double_prime(&problem.field, problem.scenario.band_epsilon)
            }
            CheckName::H5 | CheckName::H5Strict => {
                if homotopy.is_none() {
                    let spec = spec_for(problem, problem.options.intervals)?;
                    let op = chosen_operator(problem, &spec, None);
                    homotopy = Some(solve_homotopy(&spec, op, &problem.options)?);
                }
                let solved = homotopy.as_ref().expect("solved above");
                let candidates: Vec<SampledPath> =
                    solved.iterates.iter().map(|(_, u)| u.clone()).collect();
                let variant = if *check == CheckName::H5 {
                    H5Variant::Homotopy
                } else {
                    H5Variant::Strict
                };
                let mut report = check_h5(&candidates, pair, solved.constants.c, variant);
                if candidates.is_empty() {
                    report.verdict = Verdict::Inconclusive;
                    report.note = "the homotopy produced no converged iterate".into();
                }
                report
            }
            CheckName::H6 => {
                match certifier.search_h4_prime(&problem.field) {
                    Some((eps, delta, t0, _)) => {
                        let (hhat, info) = pair.hhat(eps, delta, t0)?;
                        certifier.h6(&hhat, &problem.field, Some(&info))
                    }
                    None => {
                        let mut r = certifier.h4_prime(&problem.field, None, 0.05, 0.5);
                        r.hypothesis = "H6".into();
                        r.verdict = Verdict::Inconclusive;
                        r.note = "no window with a positive certified epsilon; cannot build the companion".into();
                        r
                    }
                }
            }
        };
        reports.push(report);
    }
    let passed = reports.iter().all(|r| r.passed());
    let report = json!({
        "schema": SCHEMA,
        "command": "check",
        "scenario": problem.scenario.name,
        "seed": problem.seed,
        "samples": problem.samples,
        "pair": pair.summary(),
        "checks": reports,
        "passed": passed,
    });
    Ok(Outcome {
        exit: if passed {
            Exit::Ok
        } else {
            Exit::HypothesisFail
        },
        report,
    })
}

/// Solution of a scenario plus its report.
pub struct Solved {
    pub spec: ProblemSpec,
    pub report: SolveReport,
    pub interior: CheckReport,
}

pub fn solve_problem(
    problem: &Problem,
    operator: Option<Operator>,
    intervals: Option<usize>,
) -> Result<Solved, CliError> {
    let n = intervals.unwrap_or(problem.options.intervals);
    let spec = spec_for(problem, n)?;
    let op = chosen_operator(problem, &spec, operator);
    let mut options = problem.options.clone();
    options.intervals = n;
    let report = solve_homotopy(&spec, op, &options)?;
    let interior = interior_check(&spec, &report.solution);
    Ok(Solved {
        spec,
        report,
        interior,
    })
}

fn solve_exit(report: &SolveReport) -> Exit {
    match &report.verification {
        _ if !report.converged => Exit::NonConvergence,
        Some(v) if v.contained => Exit::Ok,
        _ => Exit::ContainmentFail,
    }
}

/// `solve`: homotopy, verification and optional CSV export.
pub fn cmd_solve(
    problem: &Problem,
    operator: Option<Operator>,
    intervals: Option<usize>,
    csv_out: Option<&Path>,
) -> Result<Outcome, CliError> {
    let solved = solve_problem(problem, operator, intervals)?;
    if let Some(path) = csv_out {
        write_solution_csv(path, &solved.spec, &solved.report.solution)?;
    }
    let report = json!({
        "schema": SCHEMA,
        "command": "solve",
        "scenario": problem.scenario.name,
        "seed": problem.seed,
        "solve": solved.report,
        "interior": solved.interior,
    });
    Ok(Outcome {
        exit: solve_exit(&solved.report),
        report,
    })
}

/// `construct-pair`: the blended pair of the scenario's region with its
/// `(H1)` and `(H3)` certificates.
pub fn cmd_construct_pair(problem: &Problem) -> Result<Outcome, CliError> {
    let pair = AdmissiblePair::construct(&problem.region)?;
    let certifier = Certifier::new(&pair, problem.samples, problem.seed);
    let checks = [certifier.h1(), certifier.h2(), certifier.h3()];
    let passed = checks.iter().all(|c| c.passed());
    let report = json!({
        "schema": SCHEMA,
        "command": "construct-pair",
        "scenario": problem.scenario.name,
        "seed": problem.seed,
        "pair": pair.summary(),
        "constants": crate::field::Constants::new(&pair),
        "checks": checks,
        "passed": passed,
    });
    Ok(Outcome {
        exit: if passed {
            Exit::Ok
        } else {
            Exit::HypothesisFail
        },
        report,
    })
}

/// The built-in example: `x' = -2x e^{-y}`, `y' = -y e^{-x}` on `[0, 1]`,
/// `∫u = (1, 1)`, `R` the closed ball of radius 2 in `(t, x, y)`.
pub const EXAMPLE_SCENARIO: &str = r#"{
  "name": "ball-integral-example",
  "interval": [0, 1],
  "dimension": 2,
  "field": ["-2*x1*exp(-x2)", "-x2*exp(-x1)"],
  "region": {"ball": {"center": [0, 0, 0], "radius": 2}},
  "pair": "half_squared_distance",
  "functional": {"density": "1"},
  "r": [1, 1],
  "bc": "cg2",
  "solver": {"N": 400, "operator": "Kp"},
  "checks": ["H0", "H1", "H3", "H4"]
}"#;

/// Largest admissible `||(t, u(t))||` in the example.
pub const EXAMPLE_NORM_BOUND: f64 = 2.0 + 1e-6;
/// Largest admissible `||∫u - r||` in the example.
pub const EXAMPLE_BC_BOUND: f64 = 1e-4;

pub fn example_problem(seed: Option<u64>) -> Result<Problem, CliError> {
    Ok(parse_scenario(EXAMPLE_SCENARIO)?.build(true, seed)?)
}

/// `reproduce-example`: solves the built-in example and asserts containment
/// in the ball of radius 2 and the integral condition.
pub fn cmd_reproduce_example(
    seed: Option<u64>,
    csv_out: Option<&Path>,
) -> Result<Outcome, CliError> {
    let problem = example_problem(seed)?;
    let solved = solve_problem(&problem, None, None)?;
    if let Some(path) = csv_out {
        write_solution_csv(path, &solved.spec, &solved.report.solution)?;
    }
    let v = solved.report.verification.as_ref();
    let max_norm = v.map_or(f64::NAN, |v| v.max_space_time_norm);
    let bc = v.map_or(f64::NAN, |v| v.bc_residual);
    let below = max_norm <= EXAMPLE_NORM_BOUND;
    let condition = bc <= EXAMPLE_BC_BOUND;
    let exit = if !solved.report.converged {
        Exit::NonConvergence
    } else if !(below && condition) {
        Exit::ContainmentFail
    } else {
        Exit::Ok
    };
    let c = solved.report.constants;
    let report = json!({
        "schema": SCHEMA,
        "command": "reproduce-example",
        "scenario": problem.scenario.name,
        "seed": problem.seed,
        "notes": [
            format!("C = max(m, 1 + sup||p2||) = max({}, {}) = {}", c.m, 1.0 + c.p2_bound, c.c),
            "field components use exp(-y) and exp(-x)",
        ],
        "max_space_time_norm": max_norm,
        "norm_bound": EXAMPLE_NORM_BOUND,
        "bc_residual": bc,
        "bc_bound": EXAMPLE_BC_BOUND,
        "passed": exit == Exit::Ok,
        "solve": solved.report,
        "interior": solved.interior,
    });
    Ok(Outcome { exit, report })
}

/// Writes `t, x1..xn, h, norm` with `h = h(t, u(t))` and
/// `norm = ||(t, u(t))||`; `u` is in the original coordinates.
pub fn write_solution_csv(
    path: &Path,
    spec: &ProblemSpec,
    u: &SampledPath,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    let n = u.dim();
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.push("h".into());
    header.push("norm".into());
    w.write_record(&header)?;
    let internal = spec.to_internal(u);
    for ((t, x), (_, y)) in u.iter().zip(internal.iter()) {
        let h = spec.pair().h(t, y).unwrap_or(f64::NAN);
        let mut row = vec![t.to_string()];
        row.extend(x.iter().map(|v| v.to_string()));
        row.push(h.to_string());
        row.push(norm(&join(t, x)).to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| CliError::CsvShape(e.to_string()))?;
    Ok(())
}

/// Reads the state columns of a solution CSV back onto `grid`.
pub fn read_solution_csv(path: &Path, grid: Grid) -> Result<SampledPath, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let n = header.iter().filter(|h| h.starts_with('x')).count();
    let mut values = Vec::new();
    let mut rows = 0;
    for record in r.records() {
        let record = record?;
        for i in 1..=n {
            let v: f64 = record[i]
                .parse()
                .map_err(|_| CliError::CsvShape(format!("bad number {:?}", &record[i])))?;
            values.push(v);
        }
        rows += 1;
    }
    if rows != grid.len() {
        return Err(CliError::CsvShape(format!(
            "expected {} rows, got {rows}",
            grid.len()
        )));
    }
    Ok(SampledPath::from_values(grid, n, values)?)
}
