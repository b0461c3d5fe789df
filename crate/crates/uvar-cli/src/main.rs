//! `uvar` — upper and lower variance under multiple probability measures.
//!
//! Four subcommands over headered CSV input (file or stdin):
//!
//! * `variance` — exact upper/lower variance of a moment family;
//! * `qp`       — exact `max lambda'kappa - (lambda'mu)^2` over the simplex,
//!   second moments may be arbitrary;
//! * `oracle`   — brute-force verifiers (ternary search, simplex grid);
//! * `estimate` — per-group sample moments from raw observations.
//!
//! Exit codes: 0 success, 2 bad input, 1 internal invariant violation.

mod input;
mod report;

use std::fs::File;
use std::io::{self, Read};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use input::{CliError, MomentColumns};
use report::{EstimateReport, EstimatedGroup, GridReport, OracleReport, SolverReport};
use uvar::{
    estimate, exact, oracle, qp, ExactError, MomentEntry, MomentSet, OracleConfig, OracleError,
    QpError, QpInstance, Witness,
};

const MAX_K_GRID_ENV: &str = "UVAR_MAX_K_GRID";

#[derive(Parser)]
#[command(
    name = "uvar",
    version,
    about = "Exact upper/lower variance under multiple probability measures and the matching simplex quadratic program"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Input CSV path, or `-` for standard input.
    #[arg(long, global = true, default_value = "-")]
    input: String,

    /// Input layout: `moments` (label,mean,second_moment),
    /// `moments-variance` (label,mean,variance) or `samples` (label,value).
    #[arg(long, global = true, value_enum)]
    kind: Option<InputKind>,

    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    output: OutputFormat,

    /// Simplex grid denominator for the oracle's grid sweep.
    #[arg(long, global = true, default_value_t = 200)]
    grid_n: u32,

    /// Bracket-width stop for the oracle's ternary search.
    #[arg(long, global = true, default_value_t = 1e-12)]
    tol_mu: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Upper and lower variance via the exact closed form.
    Variance,
    /// Exact simplex quadratic program (accepts negative variance margins).
    Qp,
    /// Brute-force cross-checks: ternary search and simplex grid.
    Oracle,
    /// Sample means and variances per labelled group.
    Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputKind {
    Moments,
    MomentsVariance,
    Samples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Plain,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            println!("{report}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Variance => run_variance(cli),
        Command::Qp => run_qp(cli),
        Command::Oracle => run_oracle(cli),
        Command::Estimate => run_estimate(cli),
    }
}

fn open_input(path: &str) -> Result<Box<dyn Read>, CliError> {
    if path == "-" {
        Ok(Box::new(io::stdin()))
    } else {
        let file = File::open(path).map_err(|err| {
            CliError::validation(format!("cannot open `{path}`: {err}"))
        })?;
        Ok(Box::new(file))
    }
}

fn required_kind(cli: &Cli) -> Result<InputKind, CliError> {
    cli.kind.ok_or_else(|| {
        CliError::validation("missing --kind (moments, moments-variance or samples)")
    })
}

/// Loads moment entries in input order, estimating them first when the
/// input is raw samples.
fn load_entries(cli: &Cli, kind: InputKind) -> Result<Vec<MomentEntry>, CliError> {
    let reader = open_input(&cli.input)?;
    match kind {
        InputKind::Moments => input::read_moment_entries(reader, MomentColumns::SecondMoment),
        InputKind::MomentsVariance => {
            input::read_moment_entries(reader, MomentColumns::Variance)
        }
        InputKind::Samples => {
            let table = input::read_samples(reader)?;
            let ms = estimate::estimate_moments(&table)?;
            // Back to first-appearance group order.
            let mut entries = vec![None; ms.len()];
            for sorted in 0..ms.len() {
                entries[ms.input_position(sorted)] = Some(ms.entry(sorted).clone());
            }
            Ok(entries.into_iter().map(Option::unwrap).collect())
        }
    }
}

fn exact_error(err: ExactError) -> CliError {
    match err {
        ExactError::NegativeVariance { .. } | ExactError::IndexOutOfRange { .. } => {
            CliError::validation(err.to_string())
        }
        ExactError::InvariantViolation { .. } => CliError::Invariant {
            message: err.to_string(),
        },
    }
}

fn qp_error(err: QpError) -> CliError {
    match err {
        QpError::Solver(inner) => exact_error(inner),
        other => CliError::validation(other.to_string()),
    }
}

fn oracle_error(err: OracleError) -> CliError {
    CliError::validation(err.to_string())
}

fn run_variance(cli: &Cli) -> Result<String, CliError> {
    let kind = required_kind(cli)?;
    let entries = load_entries(cli, kind)?;
    let ms = MomentSet::build(entries)?;
    let solved = exact::upper_variance(&ms).map_err(exact_error)?;

    let lambda = (0..ms.len())
        .map(|input_pos| {
            let sorted = ms.sorted_position(input_pos);
            (
                ms.entry(sorted).label().to_string(),
                solved.lambda_star.weights()[sorted],
            )
        })
        .collect();
    let (witness_kind, witness_labels) = witness_labels_in_input_order(&ms, solved.witness);

    let report = SolverReport {
        upper_variance: solved.upper_variance,
        lower_variance: solved.lower_variance,
        mu_star: solved.mu_star,
        lambda,
        witness_kind,
        witness_labels,
        shift_applied: 0.0,
    };
    Ok(match cli.output {
        OutputFormat::Json => report.to_json(),
        OutputFormat::Plain => report.to_plain(),
    })
}

fn witness_labels_in_input_order(
    ms: &MomentSet,
    witness: Witness,
) -> (&'static str, Vec<String>) {
    match witness {
        Witness::Single(s) => ("single", vec![ms.entry(s).label().to_string()]),
        Witness::Pair(s, t) => {
            let mut pair = [
                (ms.input_position(s), ms.entry(s).label().to_string()),
                (ms.input_position(t), ms.entry(t).label().to_string()),
            ];
            pair.sort_by_key(|(pos, _)| *pos);
            ("pair", pair.into_iter().map(|(_, label)| label).collect())
        }
    }
}

fn run_qp(cli: &Cli) -> Result<String, CliError> {
    let kind = required_kind(cli)?;
    let columns = match kind {
        InputKind::Moments => MomentColumns::SecondMoment,
        InputKind::MomentsVariance => MomentColumns::Variance,
        InputKind::Samples => {
            return Err(CliError::validation(
                "qp accepts only --kind moments or moments-variance",
            ))
        }
    };
    let entries = input::read_moment_entries(open_input(&cli.input)?, columns)?;
    let labels: Vec<String> = entries.iter().map(|e| e.label().to_string()).collect();
    let inst = QpInstance::new(
        entries.iter().map(|e| e.mean()).collect(),
        entries.iter().map(|e| e.second_moment()).collect(),
    )
    .map_err(qp_error)?;
    let solved = qp::solve(&inst).map_err(qp_error)?;

    let weights = solved.lambda_star.weights();
    let lambda: Vec<(String, f64)> = labels
        .iter()
        .cloned()
        .zip(weights.iter().copied())
        .collect();
    let (witness_kind, witness_labels) = match solved.witness {
        Witness::Single(i) => ("single", vec![labels[i].clone()]),
        Witness::Pair(i, j) => ("pair", vec![labels[i].clone(), labels[j].clone()]),
    };
    // The optimal mixture's mean is the optimal center of the (possibly
    // shifted) minimax problem.
    let mu_star: f64 = weights
        .iter()
        .zip(inst.mu())
        .map(|(&w, &m)| w * m)
        .sum();
    let lower: f64 = inst
        .mu()
        .iter()
        .zip(inst.kappa())
        .map(|(&m, &k)| k - m * m)
        .fold(f64::INFINITY, f64::min);

    let report = SolverReport {
        upper_variance: solved.value,
        lower_variance: lower,
        mu_star,
        lambda,
        witness_kind,
        witness_labels,
        shift_applied: solved.shift_applied,
    };
    Ok(match cli.output {
        OutputFormat::Json => report.to_json(),
        OutputFormat::Plain => report.to_plain(),
    })
}

fn run_oracle(cli: &Cli) -> Result<String, CliError> {
    let kind = required_kind(cli)?;
    let entries = load_entries(cli, kind)?;
    let labels: Vec<String> = entries.iter().map(|e| e.label().to_string()).collect();

    let cfg = OracleConfig {
        tol_mu: cli.tol_mu,
        grid_n: cli.grid_n,
        max_k_grid: max_k_grid_from_env()?,
    };

    let ms = MomentSet::build(entries.clone())?;
    let search = oracle::minimax_oracle(&ms, &cfg).map_err(oracle_error)?;

    // Grid sweep over the entries in input order; skipped (not an error)
    // when the measure count exceeds the configured limit.
    let inst = QpInstance::new(
        entries.iter().map(|e| e.mean()).collect(),
        entries.iter().map(|e| e.second_moment()).collect(),
    )
    .map_err(qp_error)?;
    let grid = match oracle::simplex_grid(&inst, &cfg) {
        Ok(solution) => Some(GridReport {
            value: solution.value,
            grid_n: cfg.grid_n,
            lipschitz_bound: solution.lipschitz_bound,
            lambda: labels
                .iter()
                .cloned()
                .zip(solution.weights.weights().iter().copied())
                .collect(),
        }),
        Err(OracleError::KTooLargeForGrid { .. }) => None,
        Err(err) => return Err(oracle_error(err)),
    };

    let report = OracleReport {
        minimax_value: search.value,
        mu_star: search.mu_star,
        iterations: search.iterations,
        grid,
    };
    Ok(match cli.output {
        OutputFormat::Json => report.to_json(),
        OutputFormat::Plain => report.to_plain(),
    })
}

fn max_k_grid_from_env() -> Result<usize, CliError> {
    match std::env::var(MAX_K_GRID_ENV) {
        Ok(raw) => raw.parse::<usize>().map_err(|_| {
            CliError::validation(format!(
                "{MAX_K_GRID_ENV} must be a positive integer, got `{raw}`"
            ))
        }),
        Err(std::env::VarError::NotPresent) => Ok(OracleConfig::default().max_k_grid),
        Err(err) => Err(CliError::validation(format!("{MAX_K_GRID_ENV}: {err}"))),
    }
}

fn run_estimate(cli: &Cli) -> Result<String, CliError> {
    if let Some(kind) = cli.kind {
        if kind != InputKind::Samples {
            return Err(CliError::validation(
                "estimate accepts only --kind samples",
            ));
        }
    }
    let table = input::read_samples(open_input(&cli.input)?)?;
    // Validates group sizes and label shapes.
    estimate::estimate_moments(&table)?;

    // Report the two-pass variance directly rather than unpacking it from
    // the second moment, which sheds precision when the mean dominates.
    let moments = table
        .groups()
        .map(|(label, values)| {
            let (mean, variance) =
                estimate::two_pass_mean_variance(values).expect("validated group");
            EstimatedGroup {
                label: label.to_string(),
                mean,
                variance,
                second_moment: variance + mean * mean,
            }
        })
        .collect();
    let report = EstimateReport { moments };
    Ok(match cli.output {
        OutputFormat::Json => report.to_json(),
        OutputFormat::Plain => report.to_plain(),
    })
}
