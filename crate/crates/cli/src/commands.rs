use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use csfpv_core::estimation::{fit_bolus_response, fit_compliance, BolusKnowns, ComplianceFitOptions, FitReport};
use csfpv_core::io::{figure_to_csv, parse_trace_csv, trace_to_csv};
use csfpv_core::scenario::SteadyStateReport;
use csfpv_core::validation::{run_suite, Perturbation};
use csfpv_core::{figure_data, run, typical, ComplianceKind, SolverChoice};

use crate::config::{model_flag, RunConfig};
use crate::error::CliError;

pub fn defaults_table() -> String {
    let mut out = format!("{:<8}  {:>10}  unit\n", "symbol", "value");
    for (symbol, value, unit) in typical::TABLE {
        let _ = writeln!(out, "{symbol:<8}  {value:>10}  {unit}");
    }
    out
}

/// Writes through a temporary file in the destination directory, then renames.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Writes to stdout; a closed pipe ends output quietly.
pub fn emit(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::io("<stdout>", e)),
        _ => Ok(()),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub struct SimulateArgs {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub solver: Option<SolverChoice>,
    pub dump_config: Option<PathBuf>,
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    scenario: &'a str,
    solver: SolverChoice,
    samples: usize,
    final_pressure: f64,
    max_rel_discrepancy: Option<f64>,
    #[serde(flatten)]
    steady_state: &'a SteadyStateReport,
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let text = read(&args.config)?;
    let mut cfg = RunConfig::parse(&text).map_err(|e| CliError::Config {
        path: args.config.clone(),
        message: e.to_string(),
    })?;
    if let Some(solver) = args.solver {
        cfg.output.solver = solver;
    }
    if let Some(path) = &args.dump_config {
        write_atomic(path, cfg.effective()?.to_toml().as_bytes())?;
    }
    let scenario = cfg.scenario()?;
    let output = run(&scenario)?;
    for w in &output.report.warnings {
        eprintln!("warning: {w}");
    }
    let trace = output.primary();
    let csv = trace_to_csv(trace);
    match &args.out {
        Some(path) => write_atomic(path, csv.as_bytes())?,
        None => emit(&csv)?,
    }
    if let Some(path) = &args.report {
        let report = SimulateReport {
            scenario: &scenario.name,
            solver: scenario.solver,
            samples: trace.len(),
            final_pressure: trace.last().map_or(f64::NAN, |(_, p)| p),
            max_rel_discrepancy: output.max_rel_discrepancy,
            steady_state: &output.report,
        };
        let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
        json.push('\n');
        write_atomic(path, json.as_bytes())?;
    }
    Ok(())
}

pub fn figures(dir: &Path, only: Option<u32>) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let ids: Vec<u32> = match only {
        Some(id) => vec![id],
        None => (1..=7).collect(),
    };
    for id in ids {
        let fig = figure_data(id)?;
        let path = dir.join(format!("fig{id}.csv"));
        write_atomic(&path, figure_to_csv(&fig).as_bytes())?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

pub struct FitArgs {
    pub trace: PathBuf,
    pub model: String,
    pub delta_v: Option<f64>,
    pub from: Option<f64>,
    pub r_a: Option<f64>,
}

pub fn fit(args: &FitArgs) -> Result<(), CliError> {
    let kind = model_flag(&args.model).ok_or_else(|| CliError::Config {
        path: args.trace.clone(),
        message: format!("unknown model `{}`", args.model),
    })?;
    let name = args.trace.display().to_string();
    let mut trace = parse_trace_csv(&read(&args.trace)?, &name)?;
    if let Some(from) = args.from {
        trace = trace.from_time(from)?;
    }
    let report: FitReport = match (kind, args.delta_v) {
        (ComplianceKind::Hyperbolic, Some(dv)) => {
            let knowns = BolusKnowns {
                absorption_resistance: args.r_a,
                ..Default::default()
            };
            fit_bolus_response(&trace, dv, &knowns)?
        }
        _ => {
            let mut opts = ComplianceFitOptions::default();
            if let Some(r_a) = args.r_a {
                opts.absorption_resistance = r_a;
            }
            fit_compliance(&trace, kind, &opts)?
        }
    };
    if !report.converged {
        eprintln!("warning: fit stopped before converging");
    }
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    emit(&json)
}

pub fn validate(perturb: Option<&str>, size: f64) -> Result<(), CliError> {
    let perturbation = perturb.map(|t| Perturbation::new(t, size)).transpose()?;
    let summary = run_suite(perturbation.as_ref());
    emit(&summary.table())?;
    if summary.all_passed() {
        emit(&format!("all {} checks passed\n", summary.checks.len()))
    } else {
        Err(CliError::ValidationFailed(summary.failures().map(|c| c.name.clone()).collect()))
    }
}
