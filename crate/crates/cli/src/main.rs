//! `cyberdef` — one binary tying together the attack/defense simulator, the
//! flow-record detection pipeline, and the alert service.
//!
//! Exit codes: 0 success, 1 usage (bad flags, unknown scenario or variant),
//! 2 data/validation (schema, parse, metric, model-format, or configuration
//! problems), 3 I/O (unreadable/unwritable files, busy ports).

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use cyberdef_core::detect::{self, TrainConfig};
use cyberdef_core::flows::{self, SynthSpec};
use cyberdef_core::scenario::{self, ScenarioSpec};
use cyberdef_core::serve::{self, ServeConfig, ServiceCore, SopTable};
use cyberdef_core::sim::{self, RunSummary};
use cyberdef_core::Error;
use serde::Serialize;

/// Environment variable that overrides `--api-key-file` for `serve`.
const API_KEY_ENV: &str = "CYBERDEF_API_KEY";

/// Permutation-importance repeats used by `detect eval`.
const EVAL_REPEATS: usize = 5;

#[derive(Parser)]
#[command(
    name = "cyberdef",
    version,
    about = "Agent-based cyber attack simulation and flow-record threat detection",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run or sweep attack/defense simulations
    #[command(subcommand)]
    Sim(SimCommand),
    /// Generate data, train, evaluate, and apply detection models
    #[command(subcommand)]
    Detect(DetectCommand),
    /// Serve a trained model over HTTP with alerting and feedback
    Serve(ServeArgs),
}

#[derive(Subcommand)]
enum SimCommand {
    /// Run one scenario variant with one seed
    Run(SimRunArgs),
    /// Run every variant of a builtin scenario across seeds 1..=N
    Sweep(SimSweepArgs),
}

#[derive(Args)]
struct SimRunArgs {
    /// Builtin scenario id (s1, s2, s3, s4) or path to a scenario file
    #[arg(long)]
    scenario: String,
    /// 0-based variant index within a builtin scenario's suite
    #[arg(long, default_value_t = 0)]
    variant: usize,
    /// Random seed
    #[arg(long)]
    seed: u64,
    /// Output directory for the time-series CSV and summary JSON
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimSweepArgs {
    /// Builtin scenario id (s1, s2, s3, s4)
    #[arg(long)]
    scenario: String,
    /// Number of seeds; every variant runs with seeds 1..=N
    #[arg(long)]
    seeds: u64,
    /// Output directory for the sweep CSV
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum DetectCommand {
    /// Write a synthetic labeled flow CSV
    Synth(SynthArgs),
    /// Train a model on a labeled flow CSV and save it
    Train(TrainArgs),
    /// Evaluate a model on a labeled flow CSV
    Eval(EvalArgs),
    /// Batch-score a flow CSV with a saved model
    Predict(PredictArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
    /// Number of rows to generate
    #[arg(long, default_value_t = 44489)]
    rows: usize,
    /// Random seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    /// Labeled flow CSV to train on
    #[arg(long)]
    data: PathBuf,
    /// Where to write the trained model
    #[arg(long)]
    model: PathBuf,
    /// Random seed for the validation split
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Drop identifier-correlated features (IPs, timestamp, ports, protocol)
    #[arg(long)]
    exclude_identifiers: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Labeled flow CSV to evaluate on
    #[arg(long)]
    data: PathBuf,
    /// Trained model file
    #[arg(long)]
    model: PathBuf,
    /// Optional path for the JSON evaluation report
    #[arg(long)]
    report: Option<PathBuf>,
    /// Random seed for permutation importance
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct PredictArgs {
    /// Flow CSV to score (labels not required)
    #[arg(long)]
    data: PathBuf,
    /// Trained model file
    #[arg(long)]
    model: PathBuf,
    /// Output CSV of per-record predictions
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    /// Trained model file
    #[arg(long)]
    model: PathBuf,
    /// TCP port to bind (0 picks an ephemeral port)
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// File holding the API key; the CYBERDEF_API_KEY environment variable
    /// takes precedence when set
    #[arg(long)]
    api_key_file: Option<PathBuf>,
    /// JSON file mapping severities to playbook ids:
    /// {"low": "...", "medium": "...", "high": "..."}
    #[arg(long)]
    sop_table: Option<PathBuf>,
    /// Directory for the alert and feedback NDJSON logs
    #[arg(long, default_value = "cyberdef-logs")]
    log_dir: PathBuf,
    /// Bind address
    #[arg(long, default_value = "127.0.0.1")]
    bind: String,
}

/// CLI failures split by exit code: usage problems (1) versus core errors
/// (2 for data/validation, 3 for I/O).
enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

fn core_exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => 3,
        _ => 2,
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Sim(SimCommand::Run(args)) => sim_run(args),
        Command::Sim(SimCommand::Sweep(args)) => sim_sweep(args),
        Command::Detect(DetectCommand::Synth(args)) => detect_synth(args),
        Command::Detect(DetectCommand::Train(args)) => detect_train(args),
        Command::Detect(DetectCommand::Eval(args)) => detect_eval(args),
        Command::Detect(DetectCommand::Predict(args)) => detect_predict(args),
        Command::Serve(args) => serve_command(args),
    };
    match result {
        Ok(()) => {}
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(1);
        }
        Err(CliError::Core(e)) => {
            eprintln!("error: {e}");
            std::process::exit(core_exit_code(&e));
        }
    }
}

// ---------------------------------------------------------------------------
// sim
// ---------------------------------------------------------------------------

/// Resolves a scenario argument: builtin suite id + variant index, or a
/// scenario file path (variant must stay 0 for files).
fn resolve_scenario(scenario: &str, variant: usize) -> Result<ScenarioSpec, CliError> {
    if let Some(suite) = scenario::builtin_suite(scenario) {
        return suite
            .variants
            .get(variant)
            .map(|(_, spec)| spec.clone())
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "variant {variant} is out of range for `{scenario}`: \
                     {} variants (0-based)",
                    suite.variants.len()
                ))
            });
    }
    let path = Path::new(scenario);
    if path.exists() {
        if variant != 0 {
            return Err(CliError::Usage(
                "--variant applies only to builtin scenario ids".to_string(),
            ));
        }
        return Ok(scenario::load_scenario_file(path)?);
    }
    Err(CliError::Usage(format!(
        "unknown scenario `{scenario}`: expected one of {} or a scenario file path",
        scenario::builtin_ids().join(", ")
    )))
}

/// File-name-safe version of a scenario name.
fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

/// The summary record written next to each run's time series.
#[derive(Serialize)]
struct RunRecord<'a> {
    scenario: &'a str,
    seed: u64,
    parameters: &'a ScenarioSpec,
    summary: &'a RunSummary,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn sim_run(args: SimRunArgs) -> Result<(), CliError> {
    let spec = resolve_scenario(&args.scenario, args.variant)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;

    let result = sim::run(&spec, args.seed)?;
    let stem = format!("{}_seed{}", sanitize(&spec.name), args.seed);
    let series_path = args.out.join(format!("{stem}.csv"));
    let summary_path = args.out.join(format!("{stem}_summary.json"));
    scenario::write_timeseries_csv(&result, &series_path)?;
    write_json(
        &summary_path,
        &RunRecord {
            scenario: &spec.name,
            seed: args.seed,
            parameters: &spec,
            summary: &result.summary,
        },
    )?;

    let s = &result.summary;
    let pct = |count: usize| 100.0 * count as f64 / spec.node_count as f64;
    println!("scenario: {} (seed {})", spec.name, args.seed);
    println!("ticks: {}", result.ticks.len());
    println!(
        "peak infected: {} of {} ({:.1}%)",
        s.peak_infected,
        spec.node_count,
        pct(s.peak_infected)
    );
    println!(
        "final infected: {} of {} ({:.1}%)",
        s.final_infected,
        spec.node_count,
        pct(s.final_infected)
    );
    println!("mean health: {:.4}", s.mean_health);
    match s.time_to_containment {
        Some(t) => println!("contained at tick: {t}"),
        None => println!("contained at tick: never"),
    }
    println!("time series: {}", series_path.display());
    println!("summary: {}", summary_path.display());
    Ok(())
}

fn sim_sweep(args: SimSweepArgs) -> Result<(), CliError> {
    let Some(suite) = scenario::builtin_suite(&args.scenario) else {
        return Err(CliError::Usage(format!(
            "unknown scenario `{}`: sweep accepts builtin ids ({})",
            args.scenario,
            scenario::builtin_ids().join(", ")
        )));
    };
    if args.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".to_string()));
    }
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;

    let seeds: Vec<u64> = (1..=args.seeds).collect();
    let sweep = scenario::sweep(&suite, &seeds)?;
    let csv_path = args.out.join(format!("{}_sweep.csv", suite.id));
    scenario::write_sweep_csv(&sweep, &csv_path)?;

    println!(
        "sweep {}: {} variants x {} seeds = {} runs",
        suite.id,
        suite.variants.len(),
        args.seeds,
        sweep.rows.len()
    );
    println!(
        "{:<14} {:>5} {:>10} {:>11} {:>12} {:>10}",
        suite.axis, "runs", "mean_peak", "mean_final", "mean_health", "contained"
    );
    for a in &sweep.aggregates {
        println!(
            "{:<14} {:>5} {:>10.4} {:>11.4} {:>12.4} {:>10}",
            a.axis_value,
            a.runs,
            a.mean_peak_fraction,
            a.mean_final_fraction,
            a.mean_health,
            a.contained_runs
        );
    }
    println!("rows: {}", csv_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// detect
// ---------------------------------------------------------------------------

fn ensure_parent_dir(path: &Path) -> Result<(), Error> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    Ok(())
}

fn detect_synth(args: SynthArgs) -> Result<(), CliError> {
    let ds = flows::synthesize(&SynthSpec {
        rows: args.rows,
        seed: args.seed,
        ..SynthSpec::default()
    })?;
    ensure_parent_dir(&args.out)?;
    flows::write_flows_csv(&ds, &args.out)?;

    let mut per_class: std::collections::BTreeMap<&str, usize> = std::collections::BTreeMap::new();
    for r in &ds.records {
        *per_class
            .entry(r.label.as_deref().unwrap_or(""))
            .or_default() += 1;
    }
    println!("rows: {}", ds.records.len());
    for (label, count) in per_class {
        println!("  {label}: {count}");
    }
    println!("data: {}", args.out.display());
    Ok(())
}

fn detect_train(args: TrainArgs) -> Result<(), CliError> {
    let data = flows::read_flows_csv(&args.data)?;
    let config = TrainConfig {
        include_identifiers: !args.exclude_identifiers,
        ..TrainConfig::default()
    };
    let model = detect::train(&data, &config, args.seed)?;
    ensure_parent_dir(&args.model)?;
    detect::save_model(&model, &args.model)?;

    println!(
        "trained on {} records, {} classes, {} features",
        data.records.len(),
        model.class_order.len(),
        model.params.feature_order.len()
    );
    println!(
        "{:<16} {:>20} {:>9}",
        "candidate", "validation macro-F1", "selected"
    );
    for c in &model.selection_report {
        println!(
            "{:<16} {:>20.6} {:>9}",
            c.name,
            c.validation_macro_f1,
            if c.selected { "*" } else { "" }
        );
    }
    println!("model version: {}", model.version);
    println!("model: {}", args.model.display());
    Ok(())
}

fn detect_eval(args: EvalArgs) -> Result<(), CliError> {
    let data = flows::read_flows_csv(&args.data)?;
    let model = detect::load_model(&args.model)?;
    let report = detect::evaluate(&model, &data, EVAL_REPEATS, args.seed)?;

    if let Some(report_path) = &args.report {
        ensure_parent_dir(report_path)?;
        write_json(report_path, &report)?;
    }

    println!(
        "evaluated {} records with model {}",
        report.evaluated, model.version
    );
    println!();
    println!("{}", report.confusion);
    println!("micro F1: {:.6}", report.f1_micro);
    println!("macro F1: {:.6}", report.f1_macro);
    println!("ROC AUC (macro OVR): {:.6}", report.roc_auc);
    println!("PR AUC (macro OVR): {:.6}", report.pr_auc);
    println!("log loss: {:.6}", report.log_loss);
    println!("top features by permutation importance:");
    for imp in report.importances.iter().take(10) {
        println!("  {:<28} {:+.6}", imp.feature, imp.mean_drop);
    }
    if let Some(report_path) = &args.report {
        println!("report: {}", report_path.display());
    }
    Ok(())
}

fn detect_predict(args: PredictArgs) -> Result<(), CliError> {
    let model = detect::load_model(&args.model)?;
    ensure_parent_dir(&args.out)?;
    let report = detect::batch_predict(&model, &args.data, &args.out)?;
    println!("{report}");
    println!("output: {}", args.out.display());
    if report.failed > 0 {
        let mut sidecar = args.out.as_os_str().to_owned();
        sidecar.push(".failures.txt");
        println!("failures: {}", PathBuf::from(sidecar).display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// serve
// ---------------------------------------------------------------------------

/// The API key: environment variable first, key file second.
fn resolve_api_key(args: &ServeArgs) -> Result<String, CliError> {
    if let Ok(value) = std::env::var(API_KEY_ENV) {
        let trimmed = value.trim().to_string();
        if !trimmed.is_empty() {
            return Ok(trimmed);
        }
    }
    let Some(path) = &args.api_key_file else {
        return Err(CliError::Usage(format!(
            "provide --api-key-file or set {API_KEY_ENV}"
        )));
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let key = text.trim().to_string();
    if key.is_empty() {
        return Err(CliError::Core(Error::Config(format!(
            "API key file {} is empty",
            path.display()
        ))));
    }
    Ok(key)
}

fn load_sop_table(path: &Path) -> Result<SopTable, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let table: SopTable = serde_json::from_str(&text).map_err(|e| {
        Error::parse(
            path.to_string_lossy().into_owned(),
            e.line(),
            format!("invalid SOP table: {e}"),
        )
    })?;
    Ok(table)
}

fn serve_command(args: ServeArgs) -> Result<(), CliError> {
    let model = detect::load_model(&args.model)?;
    let api_key = resolve_api_key(&args)?;
    let mut cfg = ServeConfig::new(api_key, &args.log_dir);
    cfg.bind_addr = args.bind.clone();
    cfg.port = args.port;
    if let Some(sop_path) = &args.sop_table {
        cfg.sop_table = load_sop_table(sop_path)?;
    }
    let core = ServiceCore::new(model, cfg)?;

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::io("tokio-runtime", e))?;
    runtime.block_on(async move {
        let handle = serve::serve(Arc::new(core)).await?;
        // Arm the interrupt handler before announcing readiness so that a
        // supervisor reacting to the address line always gets a graceful
        // shutdown, even if this process is slow to be scheduled again.
        let interrupted = interrupt_signal()?;
        // One write, errors ignored: a launcher that stops reading stdout
        // (e.g. `cyberdef serve | head -1`) must not bring the service down.
        let banner = format!(
            "listening on http://{}\nmodel version: {}\nalert log: {}\nfeedback log: {}\nstop with Ctrl-C\n",
            handle.addr,
            handle.core.model_version(),
            handle.core.alert_log_path().display(),
            handle.core.feedback_log_path().display(),
        );
        let mut stdout = std::io::stdout();
        let _ = stdout.write_all(banner.as_bytes());
        let _ = stdout.flush();
        interrupted.await;
        eprintln!("shutting down");
        handle.shutdown().await
    })?;
    Ok(())
}

/// Returns a future that completes on Ctrl-C / SIGINT. On Unix the OS signal
/// handler is installed here, synchronously, not on first poll — callers rely
/// on that ordering to print "ready" only once interruption is safe.
#[cfg(unix)]
fn interrupt_signal() -> Result<impl std::future::Future<Output = ()>, Error> {
    let mut signal = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::interrupt())
        .map_err(|e| Error::io("signal-handler", e))?;
    Ok(async move {
        signal.recv().await;
    })
}

#[cfg(not(unix))]
fn interrupt_signal() -> Result<impl std::future::Future<Output = ()>, Error> {
    Ok(async {
        let _ = tokio::signal::ctrl_c().await;
    })
}
