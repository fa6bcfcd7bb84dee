//! Configuration, orchestration and result files for the `mmtier` binary.

pub mod config;
pub mod error;
pub mod sweep;
pub mod topology;
pub mod validate;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use config::{parse_config, ExperimentConfig, Mode, Parsed};
pub use error::CliError;
use sweep::{Optimum, SweepResult, SweepRow};
use validate::ValidationReport;

pub const TOOL: &str = "mmtier";

/// JSON companion of a sweep: results plus everything needed to rerun it.
#[derive(Serialize)]
struct Provenance<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    mode: &'static str,
    config: &'a ExperimentConfig,
    config_text: String,
    #[serde(flatten)]
    body: T,
}

#[derive(Serialize)]
struct SweepBody<'a> {
    rows: &'a [SweepRow],
    optimum: &'a [Optimum],
}

#[derive(Serialize)]
struct ValidationBody<'a> {
    passed: bool,
    checks: &'a [validate::Check],
}

fn provenance<T: Serialize>(cfg: &ExperimentConfig, body: T) -> Provenance<'_, T> {
    Provenance {
        tool: TOOL,
        version: env!("CARGO_PKG_VERSION"),
        mode: cfg.mode.as_str(),
        config: cfg,
        config_text: cfg.to_text(),
        body,
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display().to_string(), e))
}

fn write_bytes(path: PathBuf, bytes: &[u8]) -> Result<PathBuf, CliError> {
    fs::write(&path, bytes).map_err(|e| CliError::io(path.display().to_string(), e))?;
    Ok(path)
}

/// CSV with a header row even when `rows` is empty.
fn csv_bytes<T: Serialize>(rows: &[T], header: &[&str]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Config(format!("csv serialization: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Config(format!("csv serialization: {e}")))
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|e| CliError::Config(format!("json serialization: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub const SWEEP_HEADER: [&str; 11] = [
    "tau_db",
    "k",
    "coverage_analytic",
    "coverage_mc",
    "mc_ci",
    "mc_abs_diff",
    "latency",
    "throughput",
    "quad_error",
    "tail_bound",
    "error",
];

pub const OPTIMUM_HEADER: [&str; 4] = ["tau_db", "k_opt", "throughput", "error"];

/// `sweep.csv`, `sweep.json` and, in throughput mode, `optimum.csv`.
pub fn write_sweep(cfg: &ExperimentConfig, result: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut written = vec![
        write_bytes(dir.join("sweep.csv"), &csv_bytes(&result.rows, &SWEEP_HEADER)?)?,
        write_bytes(
            dir.join("sweep.json"),
            &json_bytes(&provenance(
                cfg,
                SweepBody {
                    rows: &result.rows,
                    optimum: &result.optimum,
                },
            ))?,
        )?,
    ];
    if cfg.mode == Mode::Throughput {
        written.push(write_bytes(
            dir.join("optimum.csv"),
            &csv_bytes(&result.optimum, &OPTIMUM_HEADER)?,
        )?);
    }
    Ok(written)
}

/// `validation.txt`, `validation.json` and the sweep used as coverage evidence.
pub fn write_validation(
    cfg: &ExperimentConfig,
    report: &ValidationReport,
    rows: &[SweepRow],
    dir: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let body = ValidationBody {
        passed: report.passed(),
        checks: &report.checks,
    };
    Ok(vec![
        write_bytes(dir.join("validation.txt"), report.to_text().as_bytes())?,
        write_bytes(dir.join("validation.json"), &json_bytes(&provenance(cfg, body))?)?,
        write_bytes(dir.join("sweep.csv"), &csv_bytes(rows, &SWEEP_HEADER)?)?,
    ])
}

/// Result of one subcommand, for the caller to report.
#[derive(Debug)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
    /// Error the run finished with after writing its files.
    pub failure: Option<CliError>,
}

/// Runs `cfg.mode` and writes its files into `dir`.
pub fn run(cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    ensure_dir(dir)?;
    match cfg.mode {
        Mode::Coverage | Mode::Throughput => {
            let result = sweep::run_sweep(cfg)?;
            let files = write_sweep(cfg, &result, dir)?;
            let failed = result.failed_rows();
            let mut summary = format!("{} grid points evaluated, {failed} failed\n", result.rows.len());
            for o in &result.optimum {
                match o.k_opt {
                    Some(k) => summary.push_str(&format!("tau_db = {}: k_opt = {k}\n", o.tau_db)),
                    None => summary.push_str(&format!("tau_db = {}: no optimum\n", o.tau_db)),
                }
            }
            let failure = (failed > 0).then(|| CliError::Numerical(format!("{failed} grid points failed to evaluate")));
            Ok(RunOutcome {
                files,
                summary,
                failure,
            })
        }
        Mode::Topology => {
            let (topo, files) = topology::emit_topology(cfg, dir)?;
            let mut summary = format!("{} tiers\n", topo.tiers.len());
            for (i, t) in topo.tiers.iter().enumerate() {
                summary.push_str(&format!("tier {i}: {} points\n", t.len()));
            }
            Ok(RunOutcome {
                files,
                summary,
                failure: None,
            })
        }
        Mode::Validate => {
            let (report, rows) = validate::run_validate(cfg)?;
            let files = write_validation(cfg, &report, &rows, dir)?;
            let failure = (!report.passed()).then(|| {
                let names: Vec<&str> = report
                    .checks
                    .iter()
                    .filter(|c| c.gating && !c.passed)
                    .map(|c| c.name.as_str())
                    .collect();
                CliError::Validation(names.join(", "))
            });
            Ok(RunOutcome {
                files,
                summary: report.to_text(),
                failure,
            })
        }
    }
}
