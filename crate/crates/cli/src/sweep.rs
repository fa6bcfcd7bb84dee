//! Coverage and throughput sweeps over a `(tau_db, k)` grid.

use mmtier::analytics::{evaluate_point, optimal_gain, CoverageResult};
use mmtier::montecarlo::empirical_coverage_grid;
use mmtier::par::{map_indices, Execution};
use serde::Serialize;

use crate::config::{ExperimentConfig, Mode};
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub tau_db: f64,
    pub k: usize,
    pub coverage_analytic: Option<f64>,
    pub coverage_mc: Option<f64>,
    /// Half-width of the 95% Wilson interval.
    pub mc_ci: Option<f64>,
    pub mc_abs_diff: Option<f64>,
    /// Hop count; empty when `k` does not split the relay density evenly.
    pub latency: Option<usize>,
    pub throughput: Option<f64>,
    pub quad_error: Option<f64>,
    pub tail_bound: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Optimum {
    pub tau_db: f64,
    pub k_opt: Option<usize>,
    pub throughput: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Filled in throughput mode only.
    pub optimum: Vec<Optimum>,
}

impl SweepResult {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
            + self.optimum.iter().filter(|o| o.error.is_some()).count()
    }
}

/// Evaluates the whole grid, `tau_db` outermost. Quadrature failures are kept
/// in the affected row and the sweep carries on.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult, CliError> {
    cfg.validate()?;
    let beam = cfg.beam()?;
    let net = cfg.network();
    let quad = cfg.quad();
    let taus = cfg.taus_linear();
    let cells = cfg.tau_db.len() * cfg.k.len();

    let analytic: Vec<Result<CoverageResult, mmtier::Error>> =
        map_indices(Execution::Parallel, cells as u64, 1, |idx| {
            let (i, j) = (idx as usize / cfg.k.len(), idx as usize % cfg.k.len());
            evaluate_point(taus[i], cfg.k[j], &net, &cfg.channel, &beam, &quad)
        });

    let mc = match cfg.sim()? {
        Some(sim) => Some(empirical_coverage_grid(
            &taus,
            &cfg.k,
            cfg.lambda0,
            &cfg.mc_channel(),
            &beam,
            &sim,
        )?),
        None => None,
    };

    let rows = analytic
        .into_iter()
        .enumerate()
        .map(|(idx, res)| {
            let (i, j) = (idx / cfg.k.len(), idx % cfg.k.len());
            let sim = mc.as_ref().map(|g| g[i][j]);
            let mut row = SweepRow {
                tau_db: cfg.tau_db[i],
                k: cfg.k[j],
                coverage_analytic: None,
                coverage_mc: sim.map(|p| p.estimate),
                mc_ci: sim.map(|p| p.ci_halfwidth),
                mc_abs_diff: None,
                latency: None,
                throughput: None,
                quad_error: None,
                tail_bound: None,
                error: None,
            };
            match res {
                Ok(point) => {
                    row.coverage_analytic = Some(point.coverage);
                    row.mc_abs_diff = sim.map(|p| (point.coverage - p.estimate).abs());
                    row.latency = point.latency;
                    row.throughput = Some(point.throughput);
                    row.quad_error = Some(point.quad_error);
                    row.tail_bound = Some(point.tail_bound);
                }
                Err(e) => {
                    log::warn!("tau_db = {}, k = {}: {e}", row.tau_db, row.k);
                    row.error = Some(e.to_string());
                }
            }
            row
        })
        .collect();

    let optimum = if cfg.mode == Mode::Throughput {
        cfg.tau_db
            .iter()
            .zip(&taus)
            .map(
                |(&tau_db, &tau)| match optimal_gain(tau, &net, &cfg.channel, &beam, &quad) {
                    Ok((k, t)) => Optimum {
                        tau_db,
                        k_opt: Some(k),
                        throughput: Some(t),
                        error: None,
                    },
                    Err(e) => Optimum {
                        tau_db,
                        k_opt: None,
                        throughput: None,
                        error: Some(e.to_string()),
                    },
                },
            )
            .collect()
    } else {
        Vec::new()
    };
    Ok(SweepResult { rows, optimum })
}
