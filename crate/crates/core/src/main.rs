use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde::Serialize;

use covest::experiments::output::{sidecar_path, version_string, Sidecar};
use covest::experiments::{run, write_rows, CheckResult, ConfigError, ExperimentConfig, ExperimentKind, RunOutput};

const EXIT_CONFIG: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Experiment {
    #[value(name = "rates")]
    Rates,
    #[value(name = "compare_hmt")]
    CompareHmt,
    #[value(name = "theory_checks")]
    TheoryChecks,
    #[value(name = "network_sweep")]
    NetworkSweep,
    #[value(name = "lowrank")]
    Lowrank,
}

impl From<Experiment> for ExperimentKind {
    fn from(e: Experiment) -> Self {
        match e {
            Experiment::Rates => ExperimentKind::Rates,
            Experiment::CompareHmt => ExperimentKind::CompareHmt,
            Experiment::TheoryChecks => ExperimentKind::TheoryChecks,
            Experiment::NetworkSweep => ExperimentKind::NetworkSweep,
            Experiment::Lowrank => ExperimentKind::Lowrank,
        }
    }
}

/// Covariance estimation from random per-sample projections: experiment runner.
#[derive(Debug, Parser)]
#[command(name = "covest", version)]
struct Cli {
    experiment: Experiment,
    /// TOML config; omitted keys take the experiment's defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `threads`.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Serialize)]
struct Summary<'a> {
    passed: bool,
    checks: &'a [CheckResult],
    tables: &'a std::collections::BTreeMap<String, serde_json::Value>,
}

#[derive(Serialize)]
struct Report<'a> {
    version: String,
    config: &'a ExperimentConfig,
    passed: bool,
    checks: &'a [CheckResult],
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let kind = cli.experiment.into();
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path, Some(kind))?,
        None => ExperimentConfig::defaults(kind),
    };
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output = Some(out.clone());
    }
    if let Some(t) = cli.threads {
        config.threads = Some(t);
    }
    config.validate()?;
    Ok(config)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), String> {
    let file = File::create(path).map_err(|e| format!("cannot create {}: {e}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value).map_err(|e| format!("{}: {e}", path.display()))
}

fn emit(config: &ExperimentConfig, output: &RunOutput) -> Result<PathBuf, String> {
    if config.experiment == ExperimentKind::TheoryChecks {
        let path = config.output.clone().unwrap_or_else(|| "theory_checks.json".into());
        let report = Report {
            version: version_string(),
            config,
            passed: output.passed(),
            checks: &output.checks,
        };
        write_json(&path, &report)?;
        return Ok(path);
    }
    let path = config
        .output
        .clone()
        .unwrap_or_else(|| format!("{}.csv", config.experiment).into());
    let file = File::create(&path).map_err(|e| format!("cannot create {}: {e}", path.display()))?;
    write_rows(BufWriter::new(file), &output.rows).map_err(|e| format!("{}: {e}", path.display()))?;
    let sidecar = Sidecar {
        version: version_string(),
        config,
        summary: Summary {
            passed: output.passed(),
            checks: &output.checks,
            tables: &output.tables,
        },
    };
    write_json(&sidecar_path(&path), &sidecar)?;
    Ok(path)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("covest: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(t) = config.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("covest: cannot start thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    let output = match run(&config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("covest: {e}");
            return ExitCode::FAILURE;
        }
    };
    let path = match emit(&config, &output) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("covest: {e}");
            return ExitCode::FAILURE;
        }
    };
    for c in output.checks.iter().filter(|c| !c.passed) {
        eprintln!("FAIL {}: estimate {} ({})", c.name, c.estimate, c.detail);
    }
    println!("{} rows, {} checks -> {}", output.rows.len(), output.checks.len(), path.display());
    if output.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK)
    }
}
