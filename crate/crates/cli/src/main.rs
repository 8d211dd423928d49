//! Command-line surface: `estimate` (classifier accuracies and class
//! imbalance from an unlabeled prediction CSV), `predict` (ensemble labels),
//! and `simulate` (synthetic experiment harnesses).
//!
//! Exit codes: 0 success, 1 usage error, 2 input parse error, 3 estimator
//! degeneracy. Errors go to stderr as JSON objects unless --human is set.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use unsemble::data::{parse_prediction_csv, parse_prediction_csv_transposed, DataError, Encoding};
use unsemble::ensemble::{em_refine, majority_vote, ml_predict, sml_predict, EmOptions};
use unsemble::exec::with_threads;
use unsemble::imbalance::{ImbalanceError, ImbalanceMethod, LikelihoodOptions};
use unsemble::moments::sample_covariance;
use unsemble::pipeline::{estimate_accuracies, isml_predict, PipelineOutput};
use unsemble::simulation::{
    run_ensemble_comparison, run_imbalance_experiment, run_mae_vs_m_experiment,
    EnsembleComparisonConfig, ExperimentResult, ImbalanceExperimentConfig, MaeVsMConfig,
};
use unsemble::spectral::estimate_v;

#[derive(Parser)]
#[command(name = "unsemble", version, about = "Unsupervised classifier accuracy estimation and ensembling")]
struct Cli {
    /// Print errors as human-readable text instead of JSON objects
    #[arg(long, global = true)]
    human: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the class imbalance and per-classifier accuracies
    Estimate(EstimateArgs),
    /// Predict labels with an unsupervised ensemble rule
    Predict(PredictArgs),
    /// Run a synthetic experiment scenario
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum EncodingArg {
    /// labels are -1 / +1
    PmOne,
    /// labels are 0 / 1
    ZeroOne,
}

#[derive(Args)]
struct InputArgs {
    /// Prediction CSV (rows = classifiers, columns = instances)
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "pm-one")]
    encoding: EncodingArg,
    /// Input file holds the transposed orientation (rows = instances)
    #[arg(long)]
    transpose: bool,
}

#[derive(Args)]
struct EstimatorArgs {
    /// Stay-away margin from b = +/-1
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Clipping floor for the accuracy estimates
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    /// Grid spacing of the likelihood scan
    #[arg(long, default_value_t = 1e-3)]
    grid_step: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimateMethod {
    Tensor,
    Likelihood,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "both")]
    method: EstimateMethod,
    #[command(flatten)]
    estimator: EstimatorArgs,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: OutputFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum PredictRule {
    Mv,
    Sml,
    Isml,
    IsmlEm,
}

#[derive(Clone, Copy, ValueEnum)]
enum BMethod {
    Tensor,
    Likelihood,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Ensemble rule
    #[arg(long, value_enum, default_value = "isml")]
    method: PredictRule,
    /// Imbalance estimator behind the i-SML accuracies
    #[arg(long, value_enum, default_value = "likelihood")]
    b_method: BMethod,
    #[command(flatten)]
    estimator: EstimatorArgs,
    /// Output path (stdout when omitted); one `label,score` row per instance
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario name: imbalance | ensemble | mae-vs-m
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Trials per experiment cell
    #[arg(long)]
    trials: Option<usize>,
    /// Instances per trial (ensemble and mae-vs-m scenarios)
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// Comma-separated n grid (imbalance scenario)
    #[arg(long)]
    n_values: Option<String>,
    /// Comma-separated b grid (imbalance scenario)
    #[arg(long)]
    b_values: Option<String>,
    /// Comma-separated ensemble sizes (mae-vs-m scenario)
    #[arg(long)]
    m_values: Option<String>,
    /// Worker threads (default: one per core)
    #[arg(long)]
    threads: Option<usize>,
    /// CSV output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the raw per-trial values in plot-data form
    #[arg(long)]
    plot_out: Option<PathBuf>,
    #[command(flatten)]
    estimator: EstimatorArgs,
}

struct CliError {
    exit: u8,
    code: String,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { exit: 1, code: "Usage".into(), message: message.into() }
    }

    fn parse(code: impl Into<String>, message: impl Into<String>) -> Self {
        Self { exit: 2, code: code.into(), message: message.into() }
    }

    fn degenerate(code: impl Into<String>, message: impl Into<String>) -> Self {
        Self { exit: 3, code: code.into(), message: message.into() }
    }
}

fn data_error_code(e: &DataError) -> &'static str {
    match e {
        DataError::RaggedRows { .. } => "RaggedRows",
        DataError::BadToken { .. } => "BadToken",
        DataError::BadLabel { .. } => "BadLabel",
        DataError::EmptyCell { .. } => "EmptyCell",
        DataError::TooFewClassifiers { .. } => "TooFewClassifiers",
        DataError::NoInstances => "NoInstances",
    }
}

fn imbalance_error_code(e: &ImbalanceError) -> &'static str {
    match e {
        ImbalanceError::DegenerateDesign { .. } => "DegenerateDesign",
        ImbalanceError::Spectral(_) => "DegenerateSpectrum",
        ImbalanceError::Moments(_) => "InsufficientSamples",
    }
}

fn print_error(human: bool, err: &CliError) {
    if human {
        eprintln!("error ({}): {}", err.code, err.message);
    } else {
        let obj = serde_json::json!({ "error": { "code": err.code, "message": err.message } });
        eprintln!("{obj}");
    }
}

fn load_matrix(args: &InputArgs) -> Result<unsemble::PredictionMatrix, CliError> {
    let text = fs::read_to_string(&args.input)
        .map_err(|e| CliError::parse("Io", format!("{}: {e}", args.input.display())))?;
    let encoding = match args.encoding {
        EncodingArg::PmOne => Encoding::PmOne,
        EncodingArg::ZeroOne => Encoding::ZeroOne,
    };
    let parsed = if args.transpose {
        parse_prediction_csv_transposed(&text, encoding)
    } else {
        parse_prediction_csv(&text, encoding)
    };
    parsed.map_err(|e| CliError::parse(data_error_code(&e), e.to_string()))
}

fn check_estimator_args(a: &EstimatorArgs) -> Result<LikelihoodOptions, CliError> {
    if !(a.delta > 0.0 && a.delta < 0.5) {
        return Err(CliError::usage(format!("--delta must be in (0, 0.5), got {}", a.delta)));
    }
    if !(a.eps > 0.0 && a.eps < 0.5) {
        return Err(CliError::usage(format!("--eps must be in (0, 0.5), got {}", a.eps)));
    }
    if a.grid_step <= 0.0 {
        return Err(CliError::usage(format!("--grid-step must be positive, got {}", a.grid_step)));
    }
    Ok(LikelihoodOptions { delta: a.delta, grid_step: a.grid_step, eps: a.eps })
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| CliError::parse("Io", format!("{}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct ClassifierReport {
    psi: f64,
    eta: f64,
    pi: f64,
    clipped: bool,
}

#[derive(Serialize)]
struct MethodReport {
    method: String,
    b: f64,
    delta: f64,
    classifiers: Vec<ClassifierReport>,
    v: Vec<f64>,
    residual: f64,
}

fn method_report(out: &PipelineOutput) -> MethodReport {
    MethodReport {
        method: out.estimate.method.to_string(),
        b: out.estimate.b,
        delta: out.estimate.delta,
        classifiers: (0..out.acc.len())
            .map(|i| ClassifierReport {
                psi: out.acc.psi[i],
                eta: out.acc.eta[i],
                pi: out.acc.pi[i],
                clipped: out.acc.clipped[i],
            })
            .collect(),
        v: out.spectral.v.clone(),
        residual: out.spectral.residual,
    }
}

fn reports_to_csv(reports: &[MethodReport]) -> String {
    let mut s = String::from("method,b,delta,classifier,psi,eta,pi,clipped,v,residual\n");
    for r in reports {
        for (i, c) in r.classifiers.iter().enumerate() {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.method, r.b, r.delta, i, c.psi, c.eta, c.pi, c.clipped, r.v[i], r.residual
            ));
        }
    }
    s
}

fn cmd_estimate(human: bool, args: &EstimateArgs) -> Result<u8, CliError> {
    let opts = check_estimator_args(&args.estimator)?;
    let z = load_matrix(&args.input)?;
    let methods = match args.method {
        EstimateMethod::Tensor => vec![ImbalanceMethod::Tensor],
        EstimateMethod::Likelihood => vec![ImbalanceMethod::Likelihood],
        EstimateMethod::Both => vec![ImbalanceMethod::Tensor, ImbalanceMethod::Likelihood],
    };
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for method in methods {
        match estimate_accuracies(&z, method, &opts) {
            Ok(out) => reports.push(method_report(&out)),
            Err(e) => failures.push(CliError::degenerate(
                imbalance_error_code(&e),
                format!("{method}: {e}"),
            )),
        }
    }
    let content = match args.format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&reports).expect("report serializes");
            s.push('\n');
            s
        }
        OutputFormat::Csv => reports_to_csv(&reports),
    };
    write_output(&args.out, &content)?;
    for f in &failures {
        print_error(human, f);
    }
    Ok(if failures.is_empty() { 0 } else { 3 })
}

fn cmd_predict(args: &PredictArgs) -> Result<u8, CliError> {
    let opts = check_estimator_args(&args.estimator)?;
    let z = load_matrix(&args.input)?;
    let b_method = match args.b_method {
        BMethod::Tensor => ImbalanceMethod::Tensor,
        BMethod::Likelihood => ImbalanceMethod::Likelihood,
    };
    let degen = |e: ImbalanceError| CliError::degenerate(imbalance_error_code(&e), e.to_string());
    let pred = match args.method {
        PredictRule::Mv => majority_vote(&z),
        PredictRule::Sml => {
            let cov = sample_covariance(&z).map_err(|e| degen(e.into()))?;
            let sv = estimate_v(&cov).map_err(|e| degen(e.into()))?;
            sml_predict(&z, &sv.v)
        }
        PredictRule::Isml => isml_predict(&z, b_method, &opts).map_err(degen)?.0,
        PredictRule::IsmlEm => {
            let (_, out) = isml_predict(&z, b_method, &opts).map_err(degen)?;
            let em = em_refine(&z, &out.acc, &EmOptions { eps: opts.eps, ..EmOptions::default() });
            ml_predict(&z, &em.acc).expect("EM output is clipped")
        }
    };
    let mut content = String::new();
    for (label, score) in pred.labels.iter().zip(&pred.scores) {
        content.push_str(&format!("{label},{score}\n"));
    }
    write_output(&args.out, &content)?;
    Ok(0)
}

fn parse_list<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>, CliError> {
    raw.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<T>()
                .map_err(|_| CliError::usage(format!("cannot parse {what} entry {tok:?}")))
        })
        .collect()
}

fn simulate_summary(result: &ExperimentResult) -> String {
    let mut s = String::new();
    for c in &result.cells {
        s.push_str(&format!(
            "{} {}: mean {:.6} std {:.6} trials {} failures {}\n",
            c.config, c.metric, c.mean, c.std, c.trials, c.failures
        ));
    }
    s
}

fn cmd_simulate(args: &SimulateArgs) -> Result<u8, CliError> {
    let opts = check_estimator_args(&args.estimator)?;
    let result = match args.scenario.as_str() {
        "imbalance" => {
            let mut cfg = ImbalanceExperimentConfig {
                seed: args.seed,
                lik_opts: opts,
                ..Default::default()
            };
            if let Some(t) = args.trials {
                cfg.trials = t;
            }
            if let Some(raw) = &args.n_values {
                cfg.n_values = parse_list(raw, "--n-values")?;
            }
            if let Some(raw) = &args.b_values {
                cfg.b_values = parse_list(raw, "--b-values")?;
            }
            with_threads(args.threads, || run_imbalance_experiment(&cfg))
        }
        "ensemble" => {
            let mut cfg =
                EnsembleComparisonConfig::heterogeneous(args.n, args.trials.unwrap_or(30), args.seed);
            cfg.lik_opts = opts;
            with_threads(args.threads, || run_ensemble_comparison(&cfg))
        }
        "mae-vs-m" => {
            let mut cfg = MaeVsMConfig {
                seed: args.seed,
                n: args.n,
                delta: args.estimator.delta,
                ..Default::default()
            };
            if let Some(t) = args.trials {
                cfg.trials = t;
            }
            if let Some(raw) = &args.m_values {
                cfg.m_values = parse_list(raw, "--m-values")?;
            }
            with_threads(args.threads, || run_mae_vs_m_experiment(&cfg))
        }
        other => return Err(CliError::usage(format!("unknown scenario {other:?}"))),
    };
    write_output(&args.out, &result.to_csv())?;
    if let Some(path) = &args.plot_out {
        fs::write(path, result.to_plot_data())
            .map_err(|e| CliError::parse("Io", format!("{}: {e}", path.display())))?;
    }
    if args.out.is_some() {
        print!("{}", simulate_summary(&result));
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version are not errors
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    let outcome = match &cli.command {
        Command::Estimate(args) => cmd_estimate(cli.human, args),
        Command::Predict(args) => cmd_predict(args),
        Command::Simulate(args) => cmd_simulate(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            print_error(cli.human, &e);
            ExitCode::from(e.exit)
        }
    }
}
