use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use ruralmesh_core::engine::RunOptions;
use ruralmesh_core::{has_errors, run_with, validate_scenario, RunReport, ScenarioConfig, Severity, SimError, SimTime};

const EXIT_PARSE: u8 = 2;
const EXIT_SCENARIO: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

#[derive(Parser)]
#[command(name = "ruralmesh", version, about = "Rural kiosk / data-ferry network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and print its findings.
    Validate { scenario: PathBuf },
    /// Simulate a scenario and write the JSON report.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value_t = 24.0)]
        until_hours: f64,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Report path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        event_log: bool,
    },
    /// Summarize a report written by `run`.
    Report {
        report: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
}

/// A failure carrying its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Self {
            code,
            error: error.into(),
        }
    }
}

fn load(path: &Path) -> Result<ScenarioConfig, Failure> {
    ScenarioConfig::load(path)
        .with_context(|| format!("cannot load scenario {}", path.display()))
        .map_err(|e| Failure::new(EXIT_PARSE, e))
}

fn validate(path: &Path) -> Result<(), Failure> {
    let cfg = load(path)?;
    let findings = validate_scenario(&cfg);
    for f in &findings {
        println!("{f}");
    }
    if has_errors(&findings) {
        let n = findings.iter().filter(|f| f.severity == Severity::Error).count();
        return Err(Failure::new(EXIT_SCENARIO, anyhow::anyhow!("{n} error(s) in {}", path.display())));
    }
    println!("ok: {} finding(s), no errors", findings.len());
    Ok(())
}

fn run(path: &Path, until_hours: f64, seed: Option<u64>, out: Option<&Path>, event_log: bool) -> Result<(), Failure> {
    if !(until_hours.is_finite() && until_hours >= 0.0) {
        return Err(Failure::new(EXIT_PARSE, anyhow::anyhow!("--until-hours must be a non-negative number")));
    }
    let mut cfg = load(path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    for f in validate_scenario(&cfg).iter().filter(|f| f.severity == Severity::Warning) {
        warn!("{}", f.message);
    }
    let opts = RunOptions::until(SimTime::from_hours(until_hours)).with_event_log(event_log);
    let report = run_with(cfg, opts).map_err(|e| match e {
        SimError::InvalidScenario(findings) => {
            for f in &findings {
                eprintln!("{f}");
            }
            Failure::new(EXIT_SCENARIO, anyhow::anyhow!("scenario {} is invalid", path.display()))
        }
        other => Failure::new(EXIT_RUNTIME, other),
    })?;
    info!("{} events executed", report.events_executed);
    let mut json = report.to_json_pretty();
    json.push('\n');
    match out {
        Some(p) => fs::write(p, json)
            .with_context(|| format!("cannot write {}", p.display()))
            .map_err(|e| Failure::new(EXIT_RUNTIME, e)),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn report(path: &Path, format: Format) -> Result<(), Failure> {
    let parsed = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .and_then(|s| RunReport::from_json_str(&s).with_context(|| format!("{} is not a run report", path.display())))
        .map_err(|e| Failure::new(EXIT_PARSE, e))?;
    match format {
        Format::Text => print!("{}", parsed.to_text()),
        Format::Csv => print!("{}", parsed.to_csv()),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RURALMESH_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { scenario } => validate(scenario),
        Command::Run {
            scenario,
            until_hours,
            seed,
            out,
            event_log,
        } => run(scenario, *until_hours, *seed, out.as_deref(), *event_log),
        Command::Report { report: path, format } => report(path, *format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
