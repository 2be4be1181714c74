//! `pbmt`: validate models, simulate tests, generate mutants, run campaigns,
//! reduce kill matrices and extract plot data.
//!
//! Results go to stdout. Failures print one JSON object
//! `{"error": <kind>, "message": <text>}` to stderr and exit with status 1.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use pbmt::campaign::{emit_plot_data, resolve_parallelism, run_campaign, write_artifacts, CampaignReport, LoadedCampaign};
use pbmt::dataflow::{validate_model, SimConfig, Simulator, TestCase, Trace};
use pbmt::lang::parse_model;
use pbmt::mutation::{MutationSettings, OperatorRegistry};
use pbmt::scoring::{greedy_reduce, killed_set, KillMatrix, KillMode};

#[derive(Parser)]
#[command(name = "pbmt", version, about = "Property-based mutation testing for dataflow models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and statically check a `.dfm` model.
    Validate { model: PathBuf },
    /// Simulate a test (JSON) under a simulation config (JSON); prints a CSV trace.
    Simulate {
        model: PathBuf,
        test: PathBuf,
        config: PathBuf,
        /// Print every internal signal, not only the model outputs.
        #[arg(long)]
        all_signals: bool,
    },
    /// Generate first-order mutants; prints the manifest.
    Mutate {
        model: PathBuf,
        /// Comma-separated operator names, or `all`.
        ops: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON mutation settings (probe simulation, q_t, overrides).
        #[arg(long)]
        settings: Option<PathBuf>,
    },
    /// Run a campaign and write its artifacts.
    Campaign {
        config: PathBuf,
        #[arg(long)]
        parallelism: Option<usize>,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Greedy reduction of a kill matrix CSV.
    Reduce {
        killmatrix: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Phi)]
        mode: Mode,
    },
    /// Original vs mutant outputs of one cell of a campaign report, as CSV.
    PlotData { report: PathBuf, mutant: String, test: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Phi,
    Strong,
}

struct Failure {
    kind: &'static str,
    message: String,
}

impl Failure {
    fn new(kind: &'static str, message: impl ToString) -> Self {
        Self { kind, message: message.to_string() }
    }
}

impl From<pbmt::campaign::CampaignError> for Failure {
    fn from(e: pbmt::campaign::CampaignError) -> Self {
        Self::new(e.kind(), e)
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new("IoError", format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, kind: &'static str) -> Result<T, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| Failure::new(kind, format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<pbmt::dataflow::Model, Failure> {
    let model = parse_model(&read(path)?).map_err(|e| Failure::new("ModelError", e))?;
    let diags = validate_model(&model);
    if !diags.is_empty() {
        let text: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
        return Err(Failure::new("ModelError", text.join("; ")));
    }
    Ok(model)
}

fn trace_csv(trace: &Trace, signals: &[String]) -> Result<String, Failure> {
    let mut out = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Failure::new("IoError", e);
    out.write_record(std::iter::once("time").chain(signals.iter().map(String::as_str))).map_err(io)?;
    let columns: Vec<&[f64]> = signals.iter().map(|s| trace.signal(s).unwrap_or(&[])).collect();
    for (j, t) in trace.times().iter().enumerate() {
        let row = std::iter::once(t.to_string()).chain(columns.iter().map(|c| c[j].to_string()));
        out.write_record(row).map_err(io)?;
    }
    let bytes = out.into_inner().map_err(|e| Failure::new("IoError", e))?;
    Ok(String::from_utf8(bytes).expect("CSV is UTF-8"))
}

fn validate(model: &Path) -> Result<String, Failure> {
    let text = read(model)?;
    let m = parse_model(&text).map_err(|e| Failure::new("ModelError", e))?;
    let diags: Vec<String> = validate_model(&m).iter().map(|d| d.to_string()).collect();
    if !diags.is_empty() {
        return Err(Failure::new("ModelError", diags.join("; ")));
    }
    Ok(json!({
        "model": m.name,
        "inputs": m.inputs().iter().map(|(n, _)| n).collect::<Vec<_>>(),
        "outputs": m.outputs(),
        "valid": true,
    })
    .to_string())
}

fn simulate(model: &Path, test: &Path, config: &Path, all: bool) -> Result<String, Failure> {
    let m = load_model(model)?;
    let test: TestCase = read_json(test, "TestError")?;
    let cfg: SimConfig = read_json(config, "ConfigError")?;
    cfg.check().map_err(|e| Failure::new("ConfigError", e))?;
    let trace = Simulator::new(&m)
        .and_then(|s| s.run(&test, &cfg))
        .map_err(|e| Failure::new("SimulationError", e))?;
    let signals: Vec<String> = if all { trace.signal_names().map(String::from).collect() } else { m.outputs() };
    trace_csv(&trace, &signals)
}

fn mutate(model: &Path, ops: &str, seed: u64, settings: Option<&Path>) -> Result<String, Failure> {
    let m = load_model(model)?;
    let registry = OperatorRegistry::standard();
    let names: Vec<&str> =
        if ops == "all" { registry.names() } else { ops.split(',').map(str::trim).filter(|s| !s.is_empty()).collect() };
    let settings: MutationSettings = match settings {
        Some(p) => read_json(p, "ConfigError")?,
        None => MutationSettings::default(),
    };
    let set = registry.generate(&m, &names, seed, &settings).map_err(|e| Failure::new("MutationError", e))?;
    Ok(serde_json::to_string_pretty(&set.manifest(&m)).expect("manifest serializes"))
}

fn campaign(config: &Path, parallelism: Option<usize>, out: Option<PathBuf>) -> Result<String, Failure> {
    let loaded = LoadedCampaign::load(config)?;
    let workers = resolve_parallelism(parallelism.or(loaded.config.parallelism));
    let report = run_campaign(&loaded, Some(workers))?;
    let dir = out.unwrap_or_else(|| loaded.output_dir());
    write_artifacts(&report, &dir)?;
    Ok(json!({
        "output_dir": dir.display().to_string(),
        "mutants": report.manifest.mutants.len(),
        "scores": report.scores,
        "invariants_hold": report.invariants.all_hold(),
        "failures": report.failures.len(),
    })
    .to_string())
}

fn reduce(path: &Path, mode: Mode) -> Result<String, Failure> {
    let km = KillMatrix::read_csv(read(path)?.as_bytes()).map_err(|e| Failure::new("IoError", e))?;
    let mode = match mode {
        Mode::Phi => KillMode::Phi,
        Mode::Strong => KillMode::Strong,
    };
    let all: Vec<usize> = (0..km.tests.len()).collect();
    let chosen = greedy_reduce(&km, mode);
    let full = killed_set(&km, mode, &all);
    let reduced = killed_set(&km, mode, &chosen);
    Ok(json!({
        "mode": match mode { KillMode::Phi => "phi", KillMode::Strong => "strong" },
        "full": km.tests.len(),
        "tests": chosen.iter().map(|&t| &km.tests[t]).collect::<Vec<_>>(),
        "killed": reduced.len(),
        "coverage_equal": full == reduced,
    })
    .to_string())
}

fn plot_data(report: &Path, mutant: &str, test: &str) -> Result<String, Failure> {
    let report: CampaignReport = read_json(report, "ConfigError")?;
    Ok(emit_plot_data(&report, mutant, test)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { model } => validate(&model),
        Command::Simulate { model, test, config, all_signals } => simulate(&model, &test, &config, all_signals),
        Command::Mutate { model, ops, seed, settings } => mutate(&model, &ops, seed, settings.as_deref()),
        Command::Campaign { config, parallelism, out } => campaign(&config, parallelism, out),
        Command::Reduce { killmatrix, mode } => reduce(&killmatrix, mode),
        Command::PlotData { report, mutant, test } => plot_data(&report, &mutant, &test),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", json!({ "error": f.kind, "message": f.message }));
            ExitCode::FAILURE
        }
    }
}
