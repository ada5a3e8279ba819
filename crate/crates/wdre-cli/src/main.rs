//! Command-line front end for the robust-estimation toolkit.
//!
//! One subcommand per operation: the two orders of play (`solve-maxmin`,
//! `solve-minmax`), the saddle certificate (`check-saddle`), worst-case
//! evaluation of a fixed estimator (`worst-case`), the scalar regression
//! that separates the two orders (`counterexample`), and the numbered
//! studies (`experiment`). Machine-readable output goes to `--out` or
//! stdout and follows the JSON schemas under `schemas/`; diagnostics go
//! to stderr.
//!
//! Exit codes: 0 success, 1 regression or embedded-assertion failure,
//! 2 usage error, 3 solver failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use wdre_core::experiments::io::{write_records_csv, write_summary_json, ExperimentSummary};
use wdre_core::experiments::{
    run_bound_comparison, run_counterexample, run_robustness_trial, run_sweep_rho,
    ExperimentConfig, ExperimentError,
};
use wdre_core::sdp::SolveOptions;
use wdre_core::wdre::{
    certificate_report, check_saddle_nsc_with_tol, solve_maxmin_with, solve_minmax_with,
    worst_case_mse_with, SaddleCertificate, WdreError,
};
use wdre_core::{AffineEstimator, GaussianSpec, ProblemInstance};

#[derive(Parser)]
#[command(
    name = "wdre",
    version,
    about = "Distributionally robust estimation over Gelbrich ambiguity sets",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the adversary-first program: optimal value, responding
    /// estimator, and the saddle certificate.
    SolveMaxmin(CertifiedSolveArgs),
    /// Solve the estimator-first program: robust estimator and the
    /// least-favorable Gaussian pair.
    SolveMinmax(SolveArgs),
    /// Run both solves and report values, multipliers, and both saddle
    /// verdicts for one instance.
    CheckSaddle(CertifiedSolveArgs),
    /// Worst-case MSE of an affine estimator over the ambiguity set,
    /// with the attaining Gaussian pair.
    WorstCase(WorstCaseArgs),
    /// Scalar regression pinning the instance where the two orders of
    /// play provably differ.
    Counterexample(CounterexampleArgs),
    /// Run a numbered study: 1 noise-radius sweep, 2 saddle-boundary
    /// comparison, 3 robustness under estimated nominals.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Instance JSON file (fields H, mu_x, mu_w, Sigma_x, Sigma_w, rho_x, rho_w).
    #[arg(long, value_name = "PATH")]
    instance: PathBuf,
    /// Write the JSON report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Relative duality-gap tolerance of the interior-point solver.
    #[arg(long, value_name = "F64", default_value_t = SolveOptions::default().gap_tol)]
    gap_tol: f64,
}

#[derive(Args)]
struct CertifiedSolveArgs {
    #[command(flatten)]
    solve: SolveArgs,
    /// Eigenvalue tolerance of the saddle verdict; the default scales
    /// with the certificate matrix.
    #[arg(long, value_name = "F64")]
    tol_psd: Option<f64>,
}

#[derive(Args)]
struct WorstCaseArgs {
    #[command(flatten)]
    solve: SolveArgs,
    /// Estimator JSON file (fields A, b); defaults to the robust
    /// estimator synthesized from the instance.
    #[arg(long, value_name = "PATH")]
    estimator: Option<PathBuf>,
}

#[derive(Args)]
struct CounterexampleArgs {
    /// Write the JSON report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Which study to run: 1 noise-radius sweep, 2 saddle-boundary
    /// comparison, 3 robustness study.
    #[arg(value_name = "ID", value_parser = clap::value_parser!(u8).range(1..=3))]
    id: u8,
    /// Directory for the records CSV and summary JSON; without it the
    /// records table prints to stdout and the summary to stderr.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Experiment config JSON file; explicit flags override its fields.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Common state/observation dimension.
    #[arg(long, value_name = "INT")]
    dim: Option<usize>,
    /// Master seed for instance and trial streams.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Trial count for the robustness study.
    #[arg(long, value_name = "INT")]
    trials: Option<usize>,
    /// Eigenvalue tolerance of the saddle verdicts inside the study.
    #[arg(long, value_name = "F64")]
    tol_psd: Option<f64>,
    /// Published-scale sizes (dimension 20, 3000 trials); explicit
    /// --dim/--trials still win.
    #[arg(long)]
    full_scale: bool,
}

/// Failure carrying its exit code: 1 regression, 2 usage, 3 solver.
enum Failure {
    Regression(String),
    Usage(String),
    Solver(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Regression(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Solver(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Regression(msg) | Failure::Usage(msg) | Failure::Solver(msg) => msg,
        }
    }
}

impl From<WdreError> for Failure {
    fn from(err: WdreError) -> Self {
        match err {
            WdreError::SolverFailed { .. }
            | WdreError::RankReductionFailed { .. }
            | WdreError::NoRoot { .. } => Failure::Solver(err.to_string()),
            WdreError::Model(_) | WdreError::AssumptionViolated { .. } => {
                Failure::Usage(err.to_string())
            }
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(err: ExperimentError) -> Self {
        match err {
            ExperimentError::RegressionFailure { .. } => Failure::Regression(err.to_string()),
            ExperimentError::InvalidConfig { .. } | ExperimentError::Model(_) => {
                Failure::Usage(err.to_string())
            }
            ExperimentError::Wdre(inner) => inner.into(),
            ExperimentError::Io(_) => Failure::Usage(err.to_string()),
            ExperimentError::Csv(_) | ExperimentError::Json(_) => Failure::Solver(err.to_string()),
        }
    }
}

/// Output of `solve-maxmin`: the adversary-first value, the estimator
/// answering the least-favorable pair, and the full certificate.
/// `saddle_exists` is null when the nominal covariances are only
/// positive semidefinite and the exact verdict is not available.
#[derive(Serialize)]
struct MaxminReport {
    value: f64,
    estimator: AffineEstimator,
    saddle_exists: Option<bool>,
    certificate: SaddleCertificate,
}

/// Output of `solve-minmax`: the robust estimator, its guaranteed MSE,
/// and the least-favorable Gaussian pair attaining it.
#[derive(Serialize)]
struct MinmaxReport {
    value: f64,
    estimator: AffineEstimator,
    lf_x: GaussianSpec,
    lf_w: GaussianSpec,
}

/// Output of `worst-case`: the evaluated estimator, its worst-case MSE,
/// and the Gaussian pair attaining it.
#[derive(Serialize)]
struct WorstCaseReport {
    value: f64,
    estimator: AffineEstimator,
    argmax_x: GaussianSpec,
    argmax_w: GaussianSpec,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::SolveMaxmin(args) => run_solve_maxmin(args),
        Command::SolveMinmax(args) => run_solve_minmax(args),
        Command::CheckSaddle(args) => run_check_saddle(args),
        Command::WorstCase(args) => run_worst_case(args),
        Command::Counterexample(args) => run_counterexample_cmd(args),
        Command::Experiment(args) => run_experiment(args),
    }
}

fn run_solve_maxmin(args: CertifiedSolveArgs) -> Result<(), Failure> {
    let instance = load_instance(&args.solve.instance)?;
    let opts = solve_options(&args.solve);
    let solution = solve_maxmin_with(&instance.ambiguity, &instance.model, &opts)?;
    let saddle_exists = if solution.certificate.nominals_positive_definite {
        Some(check_saddle_nsc_with_tol(&solution.certificate, args.tol_psd)?.exists)
    } else {
        None
    };
    eprintln!(
        "adversary-first value {:.9}, nsc margin {:.3e}",
        solution.value, solution.certificate.nsc_margin
    );
    let report = MaxminReport {
        value: solution.value,
        estimator: solution.estimator,
        saddle_exists,
        certificate: solution.certificate,
    };
    emit_json(&report, args.solve.out.as_deref())
}

fn run_solve_minmax(args: SolveArgs) -> Result<(), Failure> {
    let instance = load_instance(&args.instance)?;
    let opts = solve_options(&args);
    let synthesis = solve_minmax_with(&instance.ambiguity, &instance.model, &opts)?;
    eprintln!("estimator-first value {:.9}", synthesis.value);
    let report = MinmaxReport {
        value: synthesis.value,
        estimator: synthesis.estimator,
        lf_x: synthesis.lf_x,
        lf_w: synthesis.lf_w,
    };
    emit_json(&report, args.out.as_deref())
}

fn run_check_saddle(args: CertifiedSolveArgs) -> Result<(), Failure> {
    let instance = load_instance(&args.solve.instance)?;
    let opts = solve_options(&args.solve);
    let report = certificate_report(&instance.ambiguity, &instance.model, args.tol_psd, &opts)?;
    match report.saddle_exists {
        Some(exists) => eprintln!(
            "saddle {}: values {:.9} / {:.9}, margin {:.3e}",
            if exists { "exists" } else { "does not exist" },
            report.value_maxmin,
            report.value_minmax,
            report.nsc_margin
        ),
        None => eprintln!(
            "nominal covariances are singular; exact verdict unavailable (values {:.9} / {:.9})",
            report.value_maxmin, report.value_minmax
        ),
    }
    emit_json(&report, args.solve.out.as_deref())
}

fn run_worst_case(args: WorstCaseArgs) -> Result<(), Failure> {
    let instance = load_instance(&args.solve.instance)?;
    let opts = solve_options(&args.solve);
    let estimator = match &args.estimator {
        Some(path) => load_estimator(path)?,
        None => {
            eprintln!("no --estimator given; evaluating the robust estimator");
            solve_minmax_with(&instance.ambiguity, &instance.model, &opts)?.estimator
        }
    };
    let wc = worst_case_mse_with(&estimator, &instance.ambiguity, &instance.model, &opts)?;
    eprintln!("worst-case mse {:.9}", wc.value);
    let report = WorstCaseReport {
        value: wc.value,
        estimator,
        argmax_x: wc.argmax_x,
        argmax_w: wc.argmax_w,
    };
    emit_json(&report, args.solve.out.as_deref())
}

fn run_counterexample_cmd(args: CounterexampleArgs) -> Result<(), Failure> {
    let report = run_counterexample()?;
    eprintln!(
        "adversary-first {:.9} < estimator-first {:.9}; worst case of its estimator {:.9}",
        report.value_maxmin, report.value_minmax, report.value_worstcase
    );
    emit_json(&report, args.out.as_deref())
}

fn run_experiment(args: ExperimentArgs) -> Result<(), Failure> {
    let config = resolve_config(&args)?;
    eprintln!(
        "experiment {}: dim {}, seed {}, trials {}",
        args.id, config.dim, config.seed, config.trials
    );
    match args.id {
        1 => {
            let outcome = run_sweep_rho(&config)?;
            let summary =
                ExperimentSummary::new("sweep_rho", &config, outcome.failures.len(), outcome.assertions);
            finish_experiment(&outcome.records, summary, args.out.as_deref())
        }
        2 => {
            let outcome = run_bound_comparison(&config)?;
            let summary = ExperimentSummary::new("bound_comparison", &config, 0, outcome.assertions);
            finish_experiment(&outcome.records, summary, args.out.as_deref())
        }
        3 => {
            let outcome = run_robustness_trial(&config)?;
            let summary = ExperimentSummary::new(
                "robustness",
                &config,
                outcome.failures.len(),
                outcome.assertions,
            );
            finish_experiment(&outcome.records, summary, args.out.as_deref())
        }
        _ => unreachable!("clap bounds the id to 1..=3"),
    }
}

/// Builds the effective config: file or defaults, then `--full-scale`
/// sizes, then explicit flags. Later layers win.
fn resolve_config(args: &ExperimentArgs) -> Result<ExperimentConfig, Failure> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|err| {
                Failure::Usage(format!("cannot read config file {}: {err}", path.display()))
            })?;
            serde_json::from_str(&text).map_err(|err| {
                Failure::Usage(format!("invalid config JSON in {}: {err}", path.display()))
            })?
        }
        None => ExperimentConfig::default(),
    };
    if args.full_scale {
        let published = ExperimentConfig::full_scale();
        config.dim = published.dim;
        config.trials = published.trials;
    }
    if let Some(dim) = args.dim {
        config.dim = dim;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    if let Some(tol) = args.tol_psd {
        config.tol_psd = Some(tol);
    }
    config.validate().map_err(Failure::from)?;
    Ok(config)
}

/// Writes records and summary (to `--out` as files, otherwise records to
/// stdout and summary to stderr), echoes each embedded assertion, and
/// turns any failed assertion into exit code 1.
fn finish_experiment<R: Serialize>(
    records: &[R],
    summary: ExperimentSummary,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let name = summary.experiment.clone();
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|err| {
                Failure::Usage(format!("cannot create output directory {}: {err}", dir.display()))
            })?;
            let csv_path = dir.join(format!("{name}_records.csv"));
            let json_path = dir.join(format!("{name}_summary.json"));
            write_records_csv(&csv_path, records).map_err(Failure::from)?;
            write_summary_json(&json_path, &summary).map_err(Failure::from)?;
            eprintln!("wrote {} and {}", csv_path.display(), json_path.display());
        }
        None => {
            print!("{}", records_as_csv(records)?);
            eprintln!(
                "{}",
                serde_json::to_string_pretty(&summary)
                    .map_err(|err| Failure::Solver(format!("cannot serialize summary: {err}")))?
            );
        }
    }
    for assertion in &summary.assertions {
        eprintln!(
            "assertion {}: {} ({})",
            assertion.name,
            if assertion.pass { "pass" } else { "FAIL" },
            assertion.detail
        );
    }
    if summary.failures > 0 {
        eprintln!(
            "{} work item(s) failed to solve; see the summary",
            summary.failures
        );
    }
    if summary.all_passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = summary
            .assertions
            .iter()
            .filter(|a| !a.pass)
            .map(|a| a.name.as_str())
            .collect();
        Err(Failure::Regression(format!(
            "embedded assertions failed: {}",
            failed.join(", ")
        )))
    }
}

fn solve_options(args: &SolveArgs) -> SolveOptions {
    SolveOptions {
        gap_tol: args.gap_tol,
        ..SolveOptions::default()
    }
}

fn load_instance(path: &Path) -> Result<ProblemInstance, Failure> {
    let text = fs::read_to_string(path).map_err(|err| {
        Failure::Usage(format!("cannot read instance file {}: {err}", path.display()))
    })?;
    serde_json::from_str(&text).map_err(|err| {
        Failure::Usage(format!("invalid instance JSON in {}: {err}", path.display()))
    })
}

fn load_estimator(path: &Path) -> Result<AffineEstimator, Failure> {
    let text = fs::read_to_string(path).map_err(|err| {
        Failure::Usage(format!("cannot read estimator file {}: {err}", path.display()))
    })?;
    serde_json::from_str(&text).map_err(|err| {
        Failure::Usage(format!("invalid estimator JSON in {}: {err}", path.display()))
    })
}

/// Serializes records into CSV text with the header row naming the
/// record fields.
fn records_as_csv<R: Serialize>(records: &[R]) -> Result<String, Failure> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for record in records {
        writer
            .serialize(record)
            .map_err(|err| Failure::Solver(format!("cannot serialize records: {err}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|err| Failure::Solver(format!("cannot flush records: {err}")))?;
    String::from_utf8(bytes).map_err(|err| Failure::Solver(format!("records not UTF-8: {err}")))
}

/// Pretty-prints the report to `--out` or stdout, newline-terminated.
fn emit_json<T: Serialize>(report: &T, out: Option<&Path>) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|err| Failure::Solver(format!("cannot serialize report: {err}")))?;
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text).map_err(|err| {
            Failure::Usage(format!("cannot write output file {}: {err}", path.display()))
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
