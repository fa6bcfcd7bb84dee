//! Brute-force simulator of the per-hop typical-receiver experiment.
//!
//! The receiver sits at the origin. Each trial samples the scheduled
//! transmitters as a PPP on a disk, marks every point LOS or NLOS, serves the
//! receiver from the strongest average-power AP and treats the rest as
//! interferers. Nothing here calls into [`crate::analytics`] except to size
//! the window, so the estimates are an independent check on the closed forms.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analytics::QuadratureSpec;
use crate::channel::{beam_gain_pmf, linear_to_db, sample_fading, BeamParams, ChannelParams, GainPmf, LinkState};
use crate::geometry::{poisson_count, Point};
use crate::par::{map_indices, Execution};
use crate::rng::{domain, stream, subdomain};
use crate::stats::{mean_and_standard_error, wilson_interval, Proportion, Z95};
use crate::{Error, Result};

/// Largest tolerated fraction of trials that drew an empty window.
pub const MAX_EMPTY_RATE: f64 = 1e-4;

const DEFAULT_BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Radius of the simulation disk around the receiver (meters).
    pub window_radius: f64,
    pub trials: u64,
    pub master_seed: u64,
    /// Minimum number of consecutive trials handed to one worker.
    pub batch_size: usize,
    #[serde(default)]
    pub execution: Execution,
}

impl SimConfig {
    /// Checked constructor: the window has to reach at least as far as the
    /// truncation radius of the analytics it is compared against.
    pub fn new(window_radius: f64, trials: u64, master_seed: u64, quad: &QuadratureSpec) -> Result<Self> {
        quad.validate()?;
        if !(window_radius >= quad.truncation_radius) {
            return Err(Error::invalid(
                "window_radius",
                format!(
                    "{window_radius} m is smaller than the truncation radius {} m",
                    quad.truncation_radius
                ),
            ));
        }
        let cfg = SimConfig {
            window_radius,
            trials,
            master_seed,
            batch_size: DEFAULT_BATCH,
            execution: Execution::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Window equal to the truncation radius.
    pub fn matching(quad: &QuadratureSpec, trials: u64, master_seed: u64) -> Result<Self> {
        Self::new(quad.truncation_radius, trials, master_seed, quad)
    }

    pub fn with_execution(self, execution: Execution) -> Self {
        SimConfig { execution, ..self }
    }

    pub fn with_batch_size(self, batch_size: usize) -> Self {
        SimConfig { batch_size, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window_radius > 0.0) || !self.window_radius.is_finite() {
            return Err(Error::invalid("window_radius", "must be a positive length"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials", "need at least one trial"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be at least 1"));
        }
        Ok(())
    }

    fn require_trials(&self, min: u64) -> Result<()> {
        self.validate()?;
        if self.trials < min {
            return Err(Error::invalid(
                "trials",
                format!("{} below the minimum of {min}", self.trials),
            ));
        }
        Ok(())
    }

    fn map<T: Send, F: Fn(u64) -> T + Sync + Send>(&self, f: F) -> Vec<T> {
        map_indices(self.execution, self.trials, self.batch_size, f)
    }
}

/// An AP in polar coordinates around the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimAp {
    pub distance: f64,
    pub angle: f64,
    pub state: LinkState,
}

impl SimAp {
    pub fn position(&self) -> Point {
        Point::polar(Point::ORIGIN, self.distance, self.angle)
    }
}

/// One trial's APs with the receiver at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopRealization {
    pub serving: SimAp,
    pub interferers: Vec<SimAp>,
    /// Empty windows redrawn before this realization was accepted.
    pub resamples: u32,
}

impl HopRealization {
    /// Whether no interferer offers more average power than the serving AP.
    pub fn satisfies_exclusion(&self, channel: &ChannelParams) -> bool {
        let r = self.serving.distance;
        let excl = channel.exclusion_radius(r, self.serving.state);
        self.interferers.iter().all(|ap| {
            let bound = if ap.state == self.serving.state { r } else { excl };
            ap.distance >= bound * (1.0 - 1e-12)
        })
    }
}

fn sample_state<R: Rng + ?Sized>(r: f64, channel: &ChannelParams, rng: &mut R) -> LinkState {
    if rng.random::<f64>() < channel.blockage.p_los(r) {
        LinkState::Los
    } else {
        LinkState::Nlos
    }
}

fn draw_aps<R: Rng + ?Sized>(lambda0: f64, channel: &ChannelParams, radius: f64, rng: &mut R) -> Vec<SimAp> {
    let n = poisson_count(lambda0 * PI * radius * radius, rng);
    (0..n)
        .filter_map(|_| {
            let distance = radius * rng.random::<f64>().sqrt();
            let angle = 2.0 * PI * rng.random::<f64>();
            // A point exactly on the receiver has no defined path loss.
            (distance > 0.0).then(|| SimAp {
                distance,
                angle,
                state: sample_state(distance, channel, rng),
            })
        })
        .collect()
}

/// Samples one hop realization, redrawing empty windows.
pub fn realize_hop<R: Rng + ?Sized>(
    lambda0: f64,
    channel: &ChannelParams,
    sim: &SimConfig,
    rng: &mut R,
) -> Result<HopRealization> {
    if !(lambda0 > 0.0) || !lambda0.is_finite() {
        return Err(Error::invalid("lambda0", format!("{lambda0} must be positive")));
    }
    channel.validate()?;
    sim.validate()?;
    Ok(realize_unchecked(lambda0, channel, sim, rng))
}

fn realize_unchecked<R: Rng + ?Sized>(
    lambda0: f64,
    channel: &ChannelParams,
    sim: &SimConfig,
    rng: &mut R,
) -> HopRealization {
    let mut resamples = 0u32;
    loop {
        let mut aps = draw_aps(lambda0, channel, sim.window_radius, rng);
        if aps.is_empty() {
            resamples = resamples.saturating_add(1);
            if resamples == u32::MAX {
                panic!("window never contains an AP; intensity or radius is effectively zero");
            }
            continue;
        }
        let best = aps
            .iter()
            .enumerate()
            .map(|(i, ap)| (i, channel.path_gain(ap.distance, ap.state)))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc })
            .0;
        let serving = aps.swap_remove(best);
        let real = HopRealization {
            serving,
            interferers: aps,
            resamples,
        };
        assert!(real.satisfies_exclusion(channel), "association picked a weaker AP");
        return real;
    }
}

/// Linear SINR with fresh fading and interferer beam gains drawn from `pmf`.
///
/// Returns `+∞` when there is neither noise nor interference.
pub fn compute_sinr<R: Rng + ?Sized>(
    real: &HopRealization,
    channel: &ChannelParams,
    beam: &BeamParams,
    pmf: &GainPmf,
    rng: &mut R,
) -> f64 {
    let signal =
        sample_fading(rng) * beam.g_main * beam.g_main * channel.path_gain(real.serving.distance, real.serving.state);
    let mut interference = 0.0;
    for ap in &real.interferers {
        let h = sample_fading(rng);
        let g = pmf.sample(rng);
        interference += h * g * channel.path_gain(ap.distance, ap.state);
    }
    let denom = channel.noise_power + interference;
    if denom == 0.0 {
        f64::INFINITY
    } else {
        signal / denom
    }
}

/// Per-trial outcome of a coverage run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinrRecord {
    pub trial: u64,
    pub sinr: f64,
    pub serving_state: LinkState,
    pub serving_distance: f64,
}

struct TrialOutcome {
    resamples: u32,
    sinr: Vec<f64>,
    serving_state: LinkState,
    serving_distance: f64,
}

/// Runs `sim.trials` realizations and, in each, draws one SINR per requested
/// gain. Gain `k` always consumes the stream keyed by `(SINR, k)`, so a
/// single-gain run reproduces the matching column of a multi-gain run.
fn run_trials(
    gains: &[usize],
    lambda0: f64,
    channel: &ChannelParams,
    beam: &BeamParams,
    sim: &SimConfig,
) -> Result<Vec<TrialOutcome>> {
    if !(lambda0 > 0.0) || !lambda0.is_finite() {
        return Err(Error::invalid("lambda0", format!("{lambda0} must be positive")));
    }
    channel.validate()?;
    let pmfs: Vec<GainPmf> = gains.iter().map(|&k| beam_gain_pmf(beam, k)).collect::<Result<_>>()?;
    let outcomes = sim.map(|trial| {
        let mut rng = stream(sim.master_seed, domain::REALIZATION, trial);
        let real = realize_unchecked(lambda0, channel, sim, &mut rng);
        let sinr = gains
            .iter()
            .zip(&pmfs)
            .map(|(&k, pmf)| {
                let mut rng = stream(sim.master_seed, subdomain(domain::SINR, k as u64), trial);
                compute_sinr(&real, channel, beam, pmf, &mut rng)
            })
            .collect();
        TrialOutcome {
            resamples: real.resamples,
            sinr,
            serving_state: real.serving.state,
            serving_distance: real.serving.distance,
        }
    });
    check_empty_rate(outcomes.iter().map(|o| o.resamples), sim)?;
    Ok(outcomes)
}

fn check_empty_rate(resamples: impl Iterator<Item = u32>, sim: &SimConfig) -> Result<()> {
    let empty: u64 = resamples.map(u64::from).sum();
    if empty > 0 {
        log::debug!("{empty} empty windows redrawn over {} trials", sim.trials);
    }
    let rate = empty as f64 / (empty + sim.trials) as f64;
    if rate > MAX_EMPTY_RATE {
        return Err(Error::WindowTooSmall(format!(
            "{empty} of {} draws had no AP in a {} m window (rate {rate:.2e}); enlarge the window",
            empty + sim.trials,
            sim.window_radius
        )));
    }
    Ok(())
}

fn coverage_fraction(sinr: impl Iterator<Item = f64>, tau: f64, trials: u64) -> Proportion {
    let covered = sinr.filter(|&s| s > tau).count() as u64;
    wilson_interval(covered, trials, Z95)
}

/// Fraction of trials with SINR above `tau` (linear), with a 95% Wilson
/// interval.
pub fn empirical_coverage(
    tau: f64,
    k: usize,
    lambda0: f64,
    channel: &ChannelParams,
    beam: &BeamParams,
    sim: &SimConfig,
) -> Result<Proportion> {
    sim.require_trials(100)?;
    let outcomes = run_trials(&[k], lambda0, channel, beam, sim)?;
    Ok(coverage_fraction(outcomes.iter().map(|o| o.sinr[0]), tau, sim.trials))
}

/// Coverage on a `(tau, k)` grid from one shared set of realizations.
/// `result[i][j]` belongs to `taus[i]`, `gains[j]`.
pub fn empirical_coverage_grid(
    taus: &[f64],
    gains: &[usize],
    lambda0: f64,
    channel: &ChannelParams,
    beam: &BeamParams,
    sim: &SimConfig,
) -> Result<Vec<Vec<Proportion>>> {
    sim.require_trials(100)?;
    let outcomes = run_trials(gains, lambda0, channel, beam, sim)?;
    Ok(taus
        .iter()
        .map(|&tau| {
            (0..gains.len())
                .map(|j| coverage_fraction(outcomes.iter().map(|o| o.sinr[j]), tau, sim.trials))
                .collect()
        })
        .collect())
}

/// Raw per-trial SINR samples for gain `k`.
pub fn sinr_samples(
    k: usize,
    lambda0: f64,
    channel: &ChannelParams,
    beam: &BeamParams,
    sim: &SimConfig,
) -> Result<Vec<SinrRecord>> {
    sim.validate()?;
    let outcomes = run_trials(&[k], lambda0, channel, beam, sim)?;
    Ok(outcomes
        .into_iter()
        .enumerate()
        .map(|(trial, o)| SinrRecord {
            trial: trial as u64,
            sinr: o.sinr[0],
            serving_state: o.serving_state,
            serving_distance: o.serving_distance,
        })
        .collect())
}

/// CSV with columns `trial,sinr_db,serving_state,serving_distance_m`.
pub fn write_sinr_csv<W: Write>(records: &[SinrRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "trial,sinr_db,serving_state,serving_distance_m")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{}",
            r.trial,
            linear_to_db(r.sinr),
            r.serving_state.as_str(),
            r.serving_distance
        )?;
    }
    Ok(())
}

/// Serving distances and link states from `sim.trials` realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationSamples {
    pub distances: Vec<f64>,
    pub states: Vec<LinkState>,
}

impl AssociationSamples {
    pub fn los_fraction(&self) -> f64 {
        let los = self.states.iter().filter(|&&s| s == LinkState::Los).count();
        los as f64 / self.states.len() as f64
    }

    /// Normalised histogram over `edges`; samples beyond the last edge fall in
    /// the last bin.
    pub fn histogram(&self, edges: &[f64]) -> Result<AssociationHistogram> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("edges", "need at least two strictly increasing edges"));
        }
        let bins = edges.len() - 1;
        let mut los = vec![0u64; bins];
        let mut nlos = vec![0u64; bins];
        for (&d, &s) in self.distances.iter().zip(&self.states) {
            let j = edges.partition_point(|&e| e <= d).saturating_sub(1).min(bins - 1);
            match s {
                LinkState::Los => los[j] += 1,
                LinkState::Nlos => nlos[j] += 1,
            }
        }
        let n = self.distances.len() as f64;
        Ok(AssociationHistogram {
            edges: edges.to_vec(),
            los_mass: los.iter().map(|&c| c as f64 / n).collect(),
            nlos_mass: nlos.iter().map(|&c| c as f64 / n).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationHistogram {
    pub edges: Vec<f64>,
    pub los_mass: Vec<f64>,
    pub nlos_mass: Vec<f64>,
}

impl AssociationHistogram {
    pub fn total_mass(&self) -> f64 {
        self.los_mass.iter().chain(&self.nlos_mass).sum()
    }
}

pub fn association_samples(lambda0: f64, channel: &ChannelParams, sim: &SimConfig) -> Result<AssociationSamples> {
    sim.require_trials(10_000)?;
    if !(lambda0 > 0.0) || !lambda0.is_finite() {
        return Err(Error::invalid("lambda0", format!("{lambda0} must be positive")));
    }
    channel.validate()?;
    let reals = sim.map(|trial| {
        let mut rng = stream(sim.master_seed, domain::REALIZATION, trial);
        let real = realize_unchecked(lambda0, channel, sim, &mut rng);
        (real.resamples, real.serving.distance, real.serving.state)
    });
    check_empty_rate(reals.iter().map(|r| r.0), sim)?;
    Ok(AssociationSamples {
        distances: reals.iter().map(|r| r.1).collect(),
        states: reals.iter().map(|r| r.2).collect(),
    })
}

/// Histogram of serving distances split by serving state, `bins` equal-width
/// bins up to the window radius.
pub fn empirical_association_pdf(
    lambda0: f64,
    channel: &ChannelParams,
    sim: &SimConfig,
    bins: usize,
) -> Result<AssociationHistogram> {
    if bins == 0 {
        return Err(Error::invalid("bins", "need at least one bin"));
    }
    let samples = association_samples(lambda0, channel, sim)?;
    let edges: Vec<f64> = (0..=bins).map(|j| sim.window_radius * j as f64 / bins as f64).collect();
    samples.histogram(&edges)
}

/// Interferer distances and states around a pinned serving AP. Points inside
/// the exclusion region of the serving link are dropped.
fn conditioned_interferers<R: Rng + ?Sized>(
    serving_distance: f64,
    serving_state: LinkState,
    lambda0: f64,
    channel: &ChannelParams,
    radius: f64,
    rng: &mut R,
) -> Vec<(f64, LinkState)> {
    let excl = channel.exclusion_radius(serving_distance, serving_state);
    let n = poisson_count(lambda0 * PI * radius * radius, rng);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        // Only the distance matters at an isotropic receiver.
        let d = radius * rng.random::<f64>().sqrt();
        let state = sample_state(d, channel, rng);
        let bound = if state == serving_state { serving_distance } else { excl };
        if d >= bound {
            out.push((d, state));
        }
    }
    out
}

fn interference<R: Rng + ?Sized>(aps: &[(f64, LinkState)], channel: &ChannelParams, pmf: &GainPmf, rng: &mut R) -> f64 {
    aps.iter()
        .map(|&(d, state)| sample_fading(rng) * pmf.sample(rng) * channel.path_gain(d, state))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub trials: u64,
}

fn check_conditioning(s: f64, serving_distance: f64, lambda0: f64, channel: &ChannelParams) -> Result<()> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::invalid("s", format!("{s} must be a non-negative number")));
    }
    if !(serving_distance > 0.0) || !serving_distance.is_finite() {
        return Err(Error::invalid("serving_distance", "must be positive"));
    }
    if !(lambda0 >= 0.0) || !lambda0.is_finite() {
        return Err(Error::invalid("lambda0", format!("{lambda0} must be non-negative")));
    }
    channel.validate()
}

/// Sample mean of `exp(-s I)` with the serving AP pinned at
/// `serving_distance` in `serving_state`.
#[allow(clippy::too_many_arguments)]
pub fn empirical_laplace(
    s: f64,
    serving_distance: f64,
    serving_state: LinkState,
    k: usize,
    lambda0: f64,
    channel: &ChannelParams,
    beam: &BeamParams,
    sim: &SimConfig,
) -> Result<MeanEstimate> {
    sim.require_trials(10_000)?;
    check_conditioning(s, serving_distance, lambda0, channel)?;
    let pmf = beam_gain_pmf(beam, k)?;
    let values = sim.map(|trial| {
        let mut rng = stream(sim.master_seed, domain::LAPLACE, trial);
        let aps = conditioned_interferers(
            serving_distance,
            serving_state,
            lambda0,
            channel,
            sim.window_radius,
            &mut rng,
        );
        (-s * interference(&aps, channel, &pmf, &mut rng)).exp()
    });
    let (mean, standard_error) = mean_and_standard_error(&values);
    Ok(MeanEstimate {
        mean,
        standard_error,
        trials: sim.trials,
    })
}

/// Coverage conditioned on the serving distance and state.
#[allow(clippy::too_many_arguments)]
pub fn empirical_conditional_coverage(
    tau: f64,
    serving_distance: f64,
    serving_state: LinkState,
    k: usize,
    lambda0: f64,
    channel: &ChannelParams,
    beam: &BeamParams,
    sim: &SimConfig,
) -> Result<Proportion> {
    sim.require_trials(100)?;
    check_conditioning(0.0, serving_distance, lambda0, channel)?;
    let pmf = beam_gain_pmf(beam, k)?;
    let signal_gain = beam.g_main * beam.g_main * channel.path_gain(serving_distance, serving_state);
    let covered = sim.map(|trial| {
        let mut rng = stream(sim.master_seed, domain::LAPLACE, trial);
        let aps = conditioned_interferers(
            serving_distance,
            serving_state,
            lambda0,
            channel,
            sim.window_radius,
            &mut rng,
        );
        let i = interference(&aps, channel, &pmf, &mut rng);
        let signal = sample_fading(&mut rng) * signal_gain;
        let denom = channel.noise_power + i;
        denom == 0.0 || signal / denom > tau
    });
    Ok(wilson_interval(
        covered.iter().filter(|&&c| c).count() as u64,
        sim.trials,
        Z95,
    ))
}
