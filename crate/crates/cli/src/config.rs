//! Flat `key = value` experiment configuration.
//!
//! One assignment per line, `#` starts a comment, list values are comma
//! separated. Angles are in degrees and gains in dB; both are kept in those
//! units here and converted when the core parameter structs are built, so a
//! parsed config serializes back to exactly the same text.

use std::fmt::Write as _;
use std::str::FromStr;

use mmtier::analytics::{intensity_from_r0, r0_from_intensity, HopPolicy, NetworkParams, QuadratureSpec};
use mmtier::channel::{beam_gain_pmf, db_to_linear, BeamParams, BlockageModel, ChannelParams, DEFAULT_BLOCKAGE_MU};
use mmtier::montecarlo::SimConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Coverage,
    Throughput,
    Topology,
    Validate,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Coverage => "coverage",
            Mode::Throughput => "throughput",
            Mode::Topology => "topology",
            Mode::Validate => "validate",
        }
    }
}

impl FromStr for Mode {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "coverage" => Ok(Mode::Coverage),
            "throughput" => Ok(Mode::Throughput),
            "topology" => Ok(Mode::Topology),
            "validate" => Ok(Mode::Validate),
            other => Err(CliError::Config(format!("unknown mode `{other}`"))),
        }
    }
}

/// Minimum Monte Carlo trials accepted by `validate`.
pub const VALIDATE_MIN_TRIALS: u64 = 10_000;
/// Minimum Monte Carlo trials for a sweep with simulation columns.
pub const SWEEP_MIN_TRIALS: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// `Λ_0` (points/m²).
    pub lambda0: f64,
    /// `Λ_A` (points/m²).
    pub lambda_total: f64,
    pub rf_chains: usize,
    pub bandwidth_hz: f64,
    /// Multiplexing gain used when building a topology.
    pub gain_per_hop: usize,
    pub floor_hops: bool,
    pub channel: ChannelParams,
    pub theta_a_deg: f64,
    pub g_main_db: f64,
    pub g_side_db: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub truncation_radius_m: f64,
    /// Zero disables the simulation columns of a sweep.
    pub mc_trials: u64,
    pub mc_window_m: f64,
    pub seed: u64,
    pub batch_size: usize,
    pub topology_window_m: f64,
    pub topology_guard_m: f64,
    pub envelope_sims: usize,
    pub laplace_tuples: usize,
    pub tau_db: Vec<f64>,
    pub k: Vec<usize>,
    /// Replaces `alpha_nlos` on the simulation side only. Exists to check
    /// that `validate` notices a mismatch.
    pub debug_mc_alpha_nlos: Option<f64>,
}

/// Parse result plus non-fatal warnings.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

fn join<T: std::fmt::Display>(values: &[T]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

#[derive(Default)]
struct Raw {
    mode: Option<Mode>,
    lambda0: Option<f64>,
    r0_m: Option<f64>,
    lambda_total: Option<f64>,
    lambda_ratio: Option<f64>,
    rf_chains: Option<usize>,
    bandwidth_hz: Option<f64>,
    gain_per_hop: Option<usize>,
    floor_hops: Option<bool>,
    alpha_los: Option<f64>,
    alpha_nlos: Option<f64>,
    beta: Option<f64>,
    blockage: Option<String>,
    mu_m: Option<f64>,
    los_radius_m: Option<f64>,
    los_prob: Option<f64>,
    noise_power: Option<f64>,
    theta_a_deg: Option<f64>,
    g_main_db: Option<f64>,
    g_side_db: Option<f64>,
    rel_tol: Option<f64>,
    abs_tol: Option<f64>,
    truncation_radius_m: Option<f64>,
    mc_trials: Option<u64>,
    mc_window_m: Option<f64>,
    seed: Option<u64>,
    batch_size: Option<usize>,
    topology_window_m: Option<f64>,
    topology_guard_m: Option<f64>,
    envelope_sims: Option<usize>,
    laplace_tuples: Option<usize>,
    tau_db: Option<Vec<f64>>,
    k: Option<Vec<usize>>,
    debug_mc_alpha_nlos: Option<f64>,
}

fn set<T>(slot: &mut Option<T>, key: &str, value: T) -> Result<(), CliError> {
    if slot.is_some() {
        return Err(CliError::Config(format!("`{key}` given twice")));
    }
    *slot = Some(value);
    Ok(())
}

impl Raw {
    fn assign(&mut self, key: &str, v: &str) -> Result<(), CliError> {
        match key {
            "mode" => set(&mut self.mode, key, v.parse()?),
            "lambda0" => set(&mut self.lambda0, key, parse_value(key, v)?),
            "r0_m" => set(&mut self.r0_m, key, parse_value(key, v)?),
            "lambda_total" => set(&mut self.lambda_total, key, parse_value(key, v)?),
            "lambda_ratio" => set(&mut self.lambda_ratio, key, parse_value(key, v)?),
            "rf_chains" => set(&mut self.rf_chains, key, parse_value(key, v)?),
            "bandwidth_hz" => set(&mut self.bandwidth_hz, key, parse_value(key, v)?),
            "gain_per_hop" => set(&mut self.gain_per_hop, key, parse_value(key, v)?),
            "floor_hops" => set(&mut self.floor_hops, key, parse_value(key, v)?),
            "alpha_los" => set(&mut self.alpha_los, key, parse_value(key, v)?),
            "alpha_nlos" => set(&mut self.alpha_nlos, key, parse_value(key, v)?),
            "beta" => set(&mut self.beta, key, parse_value(key, v)?),
            "blockage" => set(&mut self.blockage, key, v.to_string()),
            "mu_m" => set(&mut self.mu_m, key, parse_value(key, v)?),
            "los_radius_m" => set(&mut self.los_radius_m, key, parse_value(key, v)?),
            "los_prob" => set(&mut self.los_prob, key, parse_value(key, v)?),
            "noise_power" => set(&mut self.noise_power, key, parse_value(key, v)?),
            "theta_a_deg" => set(&mut self.theta_a_deg, key, parse_value(key, v)?),
            "g_main_db" => set(&mut self.g_main_db, key, parse_value(key, v)?),
            "g_side_db" => set(&mut self.g_side_db, key, parse_value(key, v)?),
            "rel_tol" => set(&mut self.rel_tol, key, parse_value(key, v)?),
            "abs_tol" => set(&mut self.abs_tol, key, parse_value(key, v)?),
            "truncation_radius_m" => set(&mut self.truncation_radius_m, key, parse_value(key, v)?),
            "mc_trials" => set(&mut self.mc_trials, key, parse_value(key, v)?),
            "mc_window_m" => set(&mut self.mc_window_m, key, parse_value(key, v)?),
            "seed" => set(&mut self.seed, key, parse_value(key, v)?),
            "batch_size" => set(&mut self.batch_size, key, parse_value(key, v)?),
            "topology_window_m" => set(&mut self.topology_window_m, key, parse_value(key, v)?),
            "topology_guard_m" => set(&mut self.topology_guard_m, key, parse_value(key, v)?),
            "envelope_sims" => set(&mut self.envelope_sims, key, parse_value(key, v)?),
            "laplace_tuples" => set(&mut self.laplace_tuples, key, parse_value(key, v)?),
            "tau_db" => set(&mut self.tau_db, key, parse_list(key, v)?),
            "k" => set(&mut self.k, key, parse_list(key, v)?),
            "debug_mc_alpha_nlos" => set(&mut self.debug_mc_alpha_nlos, key, parse_value(key, v)?),
            other => Err(CliError::Config(format!("unknown key `{other}`"))),
        }
    }
}

const R0_MISMATCH: f64 = 1e-3;

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<Parsed, CliError> {
    let mut raw = Raw::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
        raw.assign(key.trim(), value.trim())?;
    }
    let mut warnings = Vec::new();

    let lambda0 = match (raw.lambda0, raw.r0_m) {
        (Some(l), Some(r0)) => {
            let implied = intensity_from_r0(r0);
            if ((l - implied) / implied).abs() > R0_MISMATCH {
                return Err(CliError::Config(format!(
                    "lambda0 = {l} disagrees with r0_m = {r0} (implies {implied})"
                )));
            }
            l
        }
        (Some(l), None) => l,
        (None, Some(r0)) => intensity_from_r0(r0),
        (None, None) => intensity_from_r0(100.0),
    };
    if !(lambda0 > 0.0) || !lambda0.is_finite() {
        return Err(CliError::Config(format!("lambda0 must be positive, got {lambda0}")));
    }
    let r0 = r0_from_intensity(lambda0);
    let lambda_total = match (raw.lambda_total, raw.lambda_ratio) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "give either lambda_total or lambda_ratio, not both".into(),
            ));
        }
        (Some(l), None) => l,
        (None, Some(ratio)) => ratio * lambda0,
        (None, None) => 13.0 * lambda0,
    };

    let blockage = match raw.blockage.as_deref() {
        None => {
            warnings.push(format!(
                "no `blockage` given; using exponential blockage with mu_m = {DEFAULT_BLOCKAGE_MU}"
            ));
            BlockageModel::Exponential {
                mu: raw.mu_m.unwrap_or(DEFAULT_BLOCKAGE_MU),
            }
        }
        Some("exponential") => BlockageModel::Exponential {
            mu: raw.mu_m.unwrap_or(DEFAULT_BLOCKAGE_MU),
        },
        Some("los_ball") => BlockageModel::LosBall {
            radius: raw
                .los_radius_m
                .ok_or_else(|| CliError::Config("blockage = los_ball needs los_radius_m".into()))?,
        },
        Some("constant") => BlockageModel::Constant {
            p: raw
                .los_prob
                .ok_or_else(|| CliError::Config("blockage = constant needs los_prob".into()))?,
        },
        Some(other) => return Err(CliError::Config(format!("unknown blockage model `{other}`"))),
    };
    let stray = match blockage {
        BlockageModel::Exponential { .. } => [("los_radius_m", raw.los_radius_m), ("los_prob", raw.los_prob)],
        BlockageModel::LosBall { .. } => [("mu_m", raw.mu_m), ("los_prob", raw.los_prob)],
        BlockageModel::Constant { .. } => [("mu_m", raw.mu_m), ("los_radius_m", raw.los_radius_m)],
    };
    if let Some((key, _)) = stray.iter().find(|(_, v)| v.is_some()) {
        return Err(CliError::Config(format!(
            "`{key}` does not apply to the chosen blockage model"
        )));
    }

    let channel = ChannelParams {
        alpha_los: raw.alpha_los.unwrap_or(2.0),
        alpha_nlos: raw.alpha_nlos.unwrap_or(4.0),
        beta: raw.beta.unwrap_or(1.0),
        blockage,
        noise_power: raw.noise_power.unwrap_or(0.0),
    };
    let truncation_radius_m = raw.truncation_radius_m.unwrap_or(50.0 * r0);
    let config = ExperimentConfig {
        mode: raw.mode.unwrap_or_default(),
        lambda0,
        lambda_total,
        rf_chains: raw.rf_chains.unwrap_or(12),
        bandwidth_hz: raw.bandwidth_hz.unwrap_or(1.0),
        gain_per_hop: raw.gain_per_hop.unwrap_or(1),
        floor_hops: raw.floor_hops.unwrap_or(false),
        channel,
        theta_a_deg: raw.theta_a_deg.unwrap_or(30.0),
        g_main_db: raw.g_main_db.unwrap_or(20.0),
        g_side_db: raw.g_side_db.unwrap_or(0.0),
        rel_tol: raw.rel_tol.unwrap_or(1e-6),
        abs_tol: raw.abs_tol.unwrap_or(1e-9),
        truncation_radius_m,
        mc_trials: raw.mc_trials.unwrap_or(10_000),
        mc_window_m: raw.mc_window_m.unwrap_or(truncation_radius_m),
        seed: raw.seed.unwrap_or(1),
        batch_size: raw.batch_size.unwrap_or(256),
        topology_window_m: raw.topology_window_m.unwrap_or(10.0 * r0),
        topology_guard_m: raw.topology_guard_m.unwrap_or(5.0 * r0),
        envelope_sims: raw.envelope_sims.unwrap_or(200),
        laplace_tuples: raw.laplace_tuples.unwrap_or(20),
        tau_db: raw
            .tau_db
            .unwrap_or_else(|| vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]),
        k: raw.k.unwrap_or_else(|| vec![1, 3, 6, 9, 12]),
        debug_mc_alpha_nlos: raw.debug_mc_alpha_nlos,
    };
    config.validate()?;
    Ok(Parsed { config, warnings })
}

impl ExperimentConfig {
    /// Reference defaults (r0 = 100 m, Λ_A = 13 Λ_0).
    pub fn reference_default() -> Self {
        parse_config("blockage = exponential\n")
            .expect("built-in defaults are valid")
            .config
    }

    pub fn r0(&self) -> f64 {
        r0_from_intensity(self.lambda0)
    }

    pub fn hop_policy(&self) -> HopPolicy {
        if self.floor_hops {
            HopPolicy::Floor
        } else {
            HopPolicy::Exact
        }
    }

    pub fn network(&self) -> NetworkParams {
        NetworkParams {
            lambda_total: self.lambda_total,
            lambda_tier0: self.lambda0,
            rf_chains: self.rf_chains,
            bandwidth: self.bandwidth_hz,
            gain_per_hop: self.gain_per_hop,
            hop_policy: self.hop_policy(),
        }
    }

    pub fn beam(&self) -> Result<BeamParams, CliError> {
        Ok(BeamParams::from_degrees(
            self.theta_a_deg,
            db_to_linear(self.g_main_db),
            db_to_linear(self.g_side_db),
            self.rf_chains,
        )?)
    }

    pub fn quad(&self) -> QuadratureSpec {
        QuadratureSpec {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            truncation_radius: self.truncation_radius_m,
        }
    }

    /// Channel seen by the simulator; differs from [`Self::channel`] only
    /// under the debug hook.
    pub fn mc_channel(&self) -> ChannelParams {
        match self.debug_mc_alpha_nlos {
            Some(alpha) => ChannelParams {
                alpha_nlos: alpha,
                ..self.channel
            },
            None => self.channel,
        }
    }

    /// Simulation settings, or `None` when `mc_trials = 0`.
    pub fn sim(&self) -> Result<Option<SimConfig>, CliError> {
        if self.mc_trials == 0 {
            return Ok(None);
        }
        let sim = SimConfig::new(self.mc_window_m, self.mc_trials, self.seed, &self.quad())?;
        Ok(Some(sim.with_batch_size(self.batch_size)))
    }

    pub fn taus_linear(&self) -> Vec<f64> {
        self.tau_db.iter().map(|&t| db_to_linear(t)).collect()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.channel.validate()?;
        self.mc_channel().validate()?;
        let beam = self.beam()?;
        self.network().validate()?;
        self.quad().validate()?;
        if self.tau_db.is_empty() || self.tau_db.iter().any(|t| !t.is_finite()) {
            return Err(CliError::Config(
                "tau_db must be a non-empty list of finite values".into(),
            ));
        }
        if self.k.is_empty() {
            return Err(CliError::Config("k must be a non-empty list".into()));
        }
        for &k in &self.k {
            beam_gain_pmf(&beam, k)?;
        }
        if self.mc_trials > 0 && self.mc_trials < SWEEP_MIN_TRIALS {
            return Err(CliError::Config(format!(
                "mc_trials = {} is below {SWEEP_MIN_TRIALS}; use 0 to skip simulation",
                self.mc_trials
            )));
        }
        if self.mode == Mode::Validate && self.mc_trials < VALIDATE_MIN_TRIALS {
            return Err(CliError::Config(format!(
                "validate needs mc_trials >= {VALIDATE_MIN_TRIALS}, got {}",
                self.mc_trials
            )));
        }
        if self.batch_size == 0 {
            return Err(CliError::Config("batch_size must be at least 1".into()));
        }
        if !(self.mc_window_m >= self.truncation_radius_m) {
            return Err(CliError::Config(format!(
                "mc_window_m = {} is smaller than truncation_radius_m = {}",
                self.mc_window_m, self.truncation_radius_m
            )));
        }
        if !(self.topology_window_m > 0.0) || !(self.topology_guard_m >= 0.0) {
            return Err(CliError::Config(
                "topology window must be positive and guard non-negative".into(),
            ));
        }
        if self.envelope_sims < 2 {
            return Err(CliError::Config("envelope_sims must be at least 2".into()));
        }
        if self.mode == Mode::Validate && self.laplace_tuples == 0 {
            return Err(CliError::Config("laplace_tuples must be at least 1".into()));
        }
        Ok(())
    }

    /// Canonical text form; [`parse_config`] reads it back unchanged.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |key: &str, value: String| {
            let _ = writeln!(out, "{key} = {value}");
        };
        line("mode", self.mode.as_str().into());
        line("lambda0", self.lambda0.to_string());
        line("lambda_total", self.lambda_total.to_string());
        line("rf_chains", self.rf_chains.to_string());
        line("bandwidth_hz", self.bandwidth_hz.to_string());
        line("gain_per_hop", self.gain_per_hop.to_string());
        line("floor_hops", self.floor_hops.to_string());
        line("alpha_los", self.channel.alpha_los.to_string());
        line("alpha_nlos", self.channel.alpha_nlos.to_string());
        line("beta", self.channel.beta.to_string());
        match self.channel.blockage {
            BlockageModel::Exponential { mu } => {
                line("blockage", "exponential".into());
                line("mu_m", mu.to_string());
            }
            BlockageModel::LosBall { radius } => {
                line("blockage", "los_ball".into());
                line("los_radius_m", radius.to_string());
            }
            BlockageModel::Constant { p } => {
                line("blockage", "constant".into());
                line("los_prob", p.to_string());
            }
        }
        line("noise_power", self.channel.noise_power.to_string());
        line("theta_a_deg", self.theta_a_deg.to_string());
        line("g_main_db", self.g_main_db.to_string());
        line("g_side_db", self.g_side_db.to_string());
        line("rel_tol", self.rel_tol.to_string());
        line("abs_tol", self.abs_tol.to_string());
        line("truncation_radius_m", self.truncation_radius_m.to_string());
        line("mc_trials", self.mc_trials.to_string());
        line("mc_window_m", self.mc_window_m.to_string());
        line("seed", self.seed.to_string());
        line("batch_size", self.batch_size.to_string());
        line("topology_window_m", self.topology_window_m.to_string());
        line("topology_guard_m", self.topology_guard_m.to_string());
        line("envelope_sims", self.envelope_sims.to_string());
        line("laplace_tuples", self.laplace_tuples.to_string());
        line("tau_db", join(&self.tau_db));
        line("k", join(&self.k));
        if let Some(alpha) = self.debug_mc_alpha_nlos {
            line("debug_mc_alpha_nlos", alpha.to_string());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r0_sets_intensity() {
        let cfg = parse_config("r0_m = 100\nblockage = exponential\n").unwrap().config;
        assert!((cfg.lambda0 - 3.1831e-5).abs() < 1e-9);
        assert_eq!(cfg.lambda0, 1.0 / (std::f64::consts::PI * 1e4));
    }

    #[test]
    fn db_gains_convert() {
        let cfg = parse_config("g_main_db = 20\nblockage = exponential").unwrap().config;
        assert_eq!(cfg.beam().unwrap().g_main, 100.0);
    }

    #[test]
    fn missing_blockage_warns() {
        let parsed = parse_config("r0_m = 200").unwrap();
        assert_eq!(
            parsed.config.channel.blockage,
            BlockageModel::Exponential {
                mu: DEFAULT_BLOCKAGE_MU
            }
        );
        assert_eq!(parsed.warnings.len(), 1);
    }

    #[test]
    fn rejects_bad_documents() {
        for bad in [
            "colour = blue",
            "r0_m = 100\nlambda0 = 1e-4",
            "r0_m = 100\nr0_m = 100",
            "just words",
            "k = 1, 13",
            "blockage = fog",
            "blockage = los_ball",
            "blockage = exponential\nlos_prob = 0.5",
            "mc_trials = 50",
            "mode = validate\nmc_trials = 5000",
            "lambda_ratio = 0.5",
            "mc_window_m = 10",
        ] {
            assert!(parse_config(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn consistent_r0_and_lambda_accepted() {
        let l = intensity_from_r0(100.0) * (1.0 + 5e-4);
        let cfg = parse_config(&format!("r0_m = 100\nlambda0 = {l}\nblockage = exponential")).unwrap();
        assert_eq!(cfg.config.lambda0, l);
    }

    #[test]
    fn round_trip_is_identity() {
        let texts = [
            "r0_m = 200\nblockage = exponential\nmu_m = 90",
            "blockage = los_ball\nlos_radius_m = 70\ntau_db = -3.5, 7\nk = 2, 4\nfloor_hops = true\ngain_per_hop = 5",
            "blockage = constant\nlos_prob = 0.3\nnoise_power = 1e-12\nmode = validate\ndebug_mc_alpha_nlos = 3.3",
        ];
        for text in texts {
            let a = parse_config(text).unwrap().config;
            let b = parse_config(&a.to_text()).unwrap();
            assert_eq!(a, b.config);
            assert!(b.warnings.is_empty());
            assert_eq!(a.to_text(), b.config.to_text());
        }
    }
}
