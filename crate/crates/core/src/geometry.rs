//! Point-process sampling and the tiered AP topology.
//!
//! Tier 0 is a homogeneous PPP. Every later tier is the union of clusters
//! spawned around the scheduled transmitters of the tier before it, with
//! cluster points placed isotropically at serving distances drawn from the
//! association law. Picking one point per cluster yields the next set of
//! scheduled transmitters.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::analytics::{hop_count, NetworkParams, QuadratureSpec, ServingDistanceLaw};
use crate::channel::{BlockageModel, ChannelParams};
use crate::error::ensure_positive;
use crate::par::{map_indices, Execution};
use crate::rng::{domain, stream};
use crate::stats::quantile;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn polar(center: Point, radius: f64, angle: f64) -> Self {
        Point {
            x: center.x + radius * angle.cos(),
            y: center.y + radius * angle.sin(),
        }
    }

    #[inline]
    pub fn distance_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    #[inline]
    pub fn distance(&self, other: &Point) -> f64 {
        self.distance_sq(other).sqrt()
    }
}

/// Disk-shaped observation window with an optional guard annulus that the
/// topology builder samples into but statistics ignore.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub center: Point,
    pub radius: f64,
    #[serde(default)]
    pub guard: f64,
}

impl Window {
    pub fn disk(radius: f64) -> Result<Self> {
        let w = Window {
            center: Point::ORIGIN,
            radius,
            guard: 0.0,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn with_guard(self, guard: f64) -> Result<Self> {
        if !(guard >= 0.0) || !guard.is_finite() {
            return Err(Error::invalid("guard", "must be a non-negative length"));
        }
        Ok(Window { guard, ..self })
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("window radius", self.radius)?;
        if !self.center.x.is_finite() || !self.center.y.is_finite() {
            return Err(Error::invalid("window center", "must be finite"));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.distance_sq(&self.center) <= self.radius * self.radius
    }

    /// Distance from `p` to the window boundary (negative outside).
    pub fn border_distance(&self, p: &Point) -> f64 {
        self.radius - p.distance(&self.center)
    }

    /// The window enlarged by its guard annulus, guard removed.
    pub fn sampling_disk(&self) -> Window {
        Window {
            center: self.center,
            radius: self.radius + self.guard,
            guard: 0.0,
        }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let r = self.radius * rng.random::<f64>().sqrt();
        let theta = 2.0 * PI * rng.random::<f64>();
        Point::polar(self.center, r, theta)
    }
}

/// Default topology window radius as a multiple of `r0`.
pub const DEFAULT_WINDOW_FACTOR: f64 = 10.0;

/// Homogeneous PPP of the given intensity on the window disk.
pub fn sample_ppp<R: Rng + ?Sized>(intensity: f64, window: &Window, rng: &mut R) -> Result<Vec<Point>> {
    if !(intensity >= 0.0) || !intensity.is_finite() {
        return Err(Error::invalid("intensity", format!("{intensity} must be non-negative")));
    }
    window.validate()?;
    let n = poisson_count(intensity * window.area(), rng);
    Ok((0..n).map(|_| window.sample_uniform(rng)).collect())
}

pub(crate) fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as usize
}

/// Independently marks each point LOS with probability `P_L(|p - origin|)`.
pub fn split_by_los<R: Rng + ?Sized>(
    points: &[Point],
    origin: Point,
    blockage: &BlockageModel,
    rng: &mut R,
) -> (Vec<Point>, Vec<Point>) {
    let mut los = Vec::new();
    let mut nlos = Vec::new();
    for p in points {
        if rng.random::<f64>() < blockage.p_los(p.distance(&origin)) {
            los.push(*p);
        } else {
            nlos.push(*p);
        }
    }
    (los, nlos)
}

/// A radial distance distribution that cluster points are drawn from.
pub trait RadialLaw {
    fn sample_radius<R: Rng + ?Sized>(&self, rng: &mut R) -> f64;
}

impl RadialLaw for ServingDistanceLaw {
    fn sample_radius<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample(rng)
    }
}

/// `k` i.i.d. points placed isotropically around `center`.
pub fn sample_cluster<L: RadialLaw, R: Rng + ?Sized>(
    center: Point,
    k: usize,
    law: &L,
    rng: &mut R,
) -> Result<Vec<Point>> {
    if k == 0 {
        return Err(Error::invalid("k", "cluster size must be at least 1"));
    }
    Ok((0..k)
        .map(|_| {
            let r = law.sample_radius(rng);
            let theta = 2.0 * PI * rng.random::<f64>();
            Point::polar(center, r, theta)
        })
        .collect())
}

/// Picks one member uniformly at random from every cluster; with no cluster
/// map (tier 0) every point is scheduled. Returns indices into the tier.
pub fn select_scheduled<R: Rng + ?Sized>(
    tier_len: usize,
    clusters: Option<&[Vec<usize>]>,
    rng: &mut R,
) -> Result<Vec<usize>> {
    match clusters {
        None => Ok((0..tier_len).collect()),
        Some(map) => map
            .iter()
            .map(|members| {
                if members.is_empty() {
                    return Err(Error::Degenerate("empty cluster in cluster map".into()));
                }
                let pick = if members.len() == 1 {
                    0
                } else {
                    rng.random_range(0..members.len())
                };
                let idx = members[pick];
                if idx >= tier_len {
                    return Err(Error::Degenerate(format!(
                        "cluster member {idx} outside tier of {tier_len}"
                    )));
                }
                Ok(idx)
            })
            .collect(),
    }
}

/// Realised topology: tiers `Φ_0..Φ_M`, scheduled subsets `φ_0..φ_{M-1}` and
/// the receiver clusters of every scheduled transmitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierTopology {
    pub window: Window,
    pub tiers: Vec<Vec<Point>>,
    /// `scheduled[i]` indexes into `tiers[i]`.
    pub scheduled: Vec<Vec<usize>>,
    /// `clusters[i][j]` lists the members (indices into `tiers[i + 1]`) of the
    /// cluster spawned by the `j`-th scheduled point of tier `i`.
    pub clusters: Vec<Vec<Vec<usize>>>,
    /// Multiplexing gain of every hop.
    pub gains: Vec<usize>,
    /// Intensity not assigned to any tier when the hop count was floored.
    pub residual_intensity: f64,
}

impl TierTopology {
    /// Number of relay tiers `M`.
    pub fn hops(&self) -> usize {
        self.tiers.len() - 1
    }

    /// Checks the structural invariants of the construction.
    pub fn validate(&self) -> Result<()> {
        let m = self.hops();
        if self.scheduled.len() != m || self.clusters.len() != m || self.gains.len() != m {
            return Err(Error::Degenerate("tier, schedule and cluster counts disagree".into()));
        }
        for i in 0..m {
            let sched = &self.scheduled[i];
            if sched.iter().any(|&j| j >= self.tiers[i].len()) {
                return Err(Error::Degenerate(format!("φ_{i} is not a subset of Φ_{i}")));
            }
            if self.clusters[i].len() != sched.len() {
                return Err(Error::Degenerate(format!(
                    "hop {i}: one cluster per scheduled point expected"
                )));
            }
            let mut seen = vec![false; self.tiers[i + 1].len()];
            for members in &self.clusters[i] {
                if members.len() != self.gains[i] {
                    return Err(Error::Degenerate(format!("hop {i}: cluster size differs from k_{i}")));
                }
                for &y in members {
                    if y >= seen.len() || seen[y] {
                        return Err(Error::Degenerate(format!(
                            "hop {i}: clusters do not partition Φ_{}",
                            i + 1
                        )));
                    }
                    seen[y] = true;
                }
            }
            if seen.iter().any(|s| !s) {
                return Err(Error::Degenerate(format!(
                    "Φ_{} is not the union of its clusters",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// All points of all tiers.
    pub fn union(&self) -> Vec<Point> {
        self.tiers.iter().flatten().copied().collect()
    }

    /// Points of tier `i` inside the nominal window.
    pub fn tier_in_window(&self, i: usize) -> Vec<Point> {
        self.tiers[i]
            .iter()
            .filter(|p| self.window.contains(p))
            .copied()
            .collect()
    }

    /// CSV dump: `tier,x,y,scheduled`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "tier,x,y,scheduled")?;
        for (i, tier) in self.tiers.iter().enumerate() {
            let mut flags = vec![false; tier.len()];
            if let Some(sched) = self.scheduled.get(i) {
                for &j in sched {
                    flags[j] = true;
                }
            }
            for (p, s) in tier.iter().zip(flags) {
                writeln!(out, "{},{},{},{}", i, p.x, p.y, u8::from(s))?;
            }
        }
        Ok(())
    }

    /// Gnuplot-style column file: one `x y` block per tier, blocks separated
    /// by two blank lines so `index i` selects tier `i`.
    pub fn write_blocks<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (i, tier) in self.tiers.iter().enumerate() {
            if i > 0 {
                writeln!(out)?;
                writeln!(out)?;
            }
            writeln!(out, "# tier {i} ({} points)", tier.len())?;
            for p in tier {
                writeln!(out, "{} {}", p.x, p.y)?;
            }
        }
        Ok(())
    }
}

/// Per-hop gains for a uniform multiplexing gain, honouring the hop policy.
pub fn uniform_gains(net: &NetworkParams) -> Result<(Vec<usize>, f64)> {
    net.validate()?;
    let hc = hop_count(net.lambda_total, net.lambda_tier0, net.gain_per_hop, net.hop_policy)?;
    Ok((vec![net.gain_per_hop; hc.hops], hc.residual_intensity))
}

/// Builds the tiered topology with uniform gain `net.gain_per_hop`.
///
/// Tier 0 is sampled on the window enlarged by its guard annulus; cluster
/// points that land outside are kept.
pub fn build_tier_topology<R: Rng + ?Sized>(
    net: &NetworkParams,
    channel: &ChannelParams,
    window: &Window,
    rng: &mut R,
) -> Result<TierTopology> {
    let (gains, residual) = uniform_gains(net)?;
    channel.validate()?;
    let law = ServingDistanceLaw::new(
        net.lambda_tier0,
        channel,
        &QuadratureSpec::for_intensity(net.lambda_tier0),
    )?;
    let mut topo = build_with_gains(&gains, net.lambda_tier0, net.rf_chains, &law, window, rng)?;
    topo.residual_intensity = residual;
    Ok(topo)
}

/// Builds a topology with explicit per-hop gains and a pre-tabulated
/// serving-distance law.
pub fn build_with_gains<L: RadialLaw, R: Rng + ?Sized>(
    gains: &[usize],
    lambda0: f64,
    rf_chains: usize,
    law: &L,
    window: &Window,
    rng: &mut R,
) -> Result<TierTopology> {
    window.validate()?;
    if let Some(&bad) = gains.iter().find(|&&k| k == 0 || k > rf_chains) {
        return Err(Error::invalid("k_i", format!("{bad} outside 1..={rf_chains}")));
    }
    let tier0 = sample_ppp(lambda0, &window.sampling_disk(), rng)?;
    let mut tiers = vec![tier0];
    let mut scheduled = Vec::with_capacity(gains.len());
    let mut clusters = Vec::with_capacity(gains.len());
    let mut previous_clusters: Option<Vec<Vec<usize>>> = None;
    for &k in gains {
        let current = tiers.last().expect("tier 0 exists");
        let sched = select_scheduled(current.len(), previous_clusters.as_deref(), rng)?;
        let mut next = Vec::with_capacity(sched.len() * k);
        let mut hop_clusters = Vec::with_capacity(sched.len());
        for &x in &sched {
            let start = next.len();
            next.extend(sample_cluster(current[x], k, law, rng)?);
            hop_clusters.push((start..next.len()).collect::<Vec<_>>());
        }
        scheduled.push(sched);
        previous_clusters = Some(hop_clusters.clone());
        clusters.push(hop_clusters);
        tiers.push(next);
    }
    let topo = TierTopology {
        window: *window,
        tiers,
        scheduled,
        clusters,
        gains: gains.to_vec(),
        residual_intensity: 0.0,
    };
    debug_assert!(topo.validate().is_ok());
    Ok(topo)
}

/// Border-corrected Ripley's K of the points inside `window` at each radius.
///
/// Only points at least `r` from the boundary serve as centres for radius
/// `r`; neighbours are counted among all points in the window.
pub fn ripley_k(points: &[Point], window: &Window, radii: &[f64]) -> Result<Vec<f64>> {
    window.validate()?;
    let mut inside: Vec<Point> = points.iter().filter(|p| window.contains(p)).copied().collect();
    if inside.len() < 2 {
        return Err(Error::Degenerate(format!(
            "Ripley's K needs ≥ 2 points, got {}",
            inside.len()
        )));
    }
    if let Some(&bad) = radii.iter().find(|&&r| !(r > 0.0) || r >= window.radius) {
        return Err(Error::invalid("radii", format!("{bad} must lie in (0, window radius)")));
    }
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    inside.sort_by(|a, b| a.x.total_cmp(&b.x));
    let n = inside.len();
    let lambda_hat = n as f64 / window.area();

    let mut centres = vec![0usize; radii.len()];
    let mut pairs = vec![0u64; radii.len()];
    let radii_sq: Vec<f64> = radii.iter().map(|r| r * r).collect();
    for (i, p) in inside.iter().enumerate() {
        let b = window.border_distance(p);
        let eligible: Vec<bool> = radii.iter().map(|&r| b >= r).collect();
        if !eligible.iter().any(|&e| e) {
            continue;
        }
        for (c, &e) in centres.iter_mut().zip(&eligible) {
            *c += usize::from(e);
        }
        let mut count_neighbours = |q: &Point| {
            let d2 = p.distance_sq(q);
            for ((pc, &r2), &e) in pairs.iter_mut().zip(&radii_sq).zip(&eligible) {
                if e && d2 <= r2 {
                    *pc += 1;
                }
            }
        };
        for q in inside[i + 1..].iter().take_while(|q| q.x - p.x <= r_max) {
            count_neighbours(q);
        }
        for q in inside[..i].iter().rev().take_while(|q| p.x - q.x <= r_max) {
            count_neighbours(q);
        }
    }
    radii
        .iter()
        .zip(centres.iter().zip(&pairs))
        .map(|(&r, (&c, &pc))| {
            if c == 0 {
                Err(Error::Degenerate(format!("no point lies {r} m inside the window")))
            } else {
                Ok(pc as f64 / (c as f64 * lambda_hat))
            }
        })
        .collect()
}

/// Global (max-deviation) envelope for Ripley's K under complete spatial
/// randomness, on the variance-stabilised scale `L(r) = sqrt(K(r)/π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrEnvelope {
    pub radii: Vec<f64>,
    /// Mean of `L(r)` over the reference patterns.
    pub center: Vec<f64>,
    /// Half-width of the band on the `L` scale.
    pub critical: f64,
    /// One-sided critical value for `L` rising above the centre.
    pub upper_critical: f64,
    pub level: f64,
    pub simulations: usize,
}

impl CsrEnvelope {
    /// Reference patterns hold exactly `n` uniform points (CSR conditioned on
    /// the observed count).
    pub fn simulate(
        n: usize,
        window: &Window,
        radii: &[f64],
        simulations: usize,
        level: f64,
        seed: u64,
        execution: Execution,
    ) -> Result<Self> {
        if simulations < 2 {
            return Err(Error::invalid("simulations", "need at least two reference patterns"));
        }
        let window = Window { guard: 0.0, ..*window };
        let curves: Vec<Result<Vec<f64>>> = map_indices(execution, simulations as u64, 1, |i| {
            let mut rng = stream(seed, domain::ENVELOPE, i);
            let pts: Vec<Point> = (0..n).map(|_| window.sample_uniform(&mut rng)).collect();
            ripley_k(&pts, &window, radii).map(|k| k.iter().map(|v| (v / PI).sqrt()).collect())
        });
        let curves: Vec<Vec<f64>> = curves.into_iter().collect::<Result<_>>()?;
        let center: Vec<f64> = (0..radii.len())
            .map(|j| curves.iter().map(|c| c[j]).sum::<f64>() / simulations as f64)
            .collect();
        let deviations: Vec<f64> = curves
            .iter()
            .map(|c| c.iter().zip(&center).map(|(l, m)| (l - m).abs()).fold(0.0, f64::max))
            .collect();
        let rises: Vec<f64> = curves
            .iter()
            .map(|c| {
                c.iter()
                    .zip(&center)
                    .map(|(l, m)| l - m)
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        Ok(CsrEnvelope {
            radii: radii.to_vec(),
            center,
            critical: quantile(&deviations, level),
            upper_critical: quantile(&rises, level),
            level,
            simulations,
        })
    }

    pub fn k_bounds(&self) -> Vec<(f64, f64)> {
        self.center
            .iter()
            .map(|&m| {
                let lo = (m - self.critical).max(0.0);
                let hi = m + self.critical;
                (PI * lo * lo, PI * hi * hi)
            })
            .collect()
    }

    /// Largest deviation of an observed K curve from the envelope centre, on
    /// the `L` scale.
    pub fn deviation(&self, k_values: &[f64]) -> f64 {
        k_values
            .iter()
            .zip(&self.center)
            .map(|(k, m)| ((k / PI).sqrt() - m).abs())
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, k_values: &[f64]) -> bool {
        self.deviation(k_values) <= self.critical
    }

    /// Largest rise of `L` above the centre at radii below `max_radius`.
    pub fn rise(&self, k_values: &[f64], max_radius: f64) -> f64 {
        self.radii
            .iter()
            .zip(k_values)
            .zip(&self.center)
            .filter(|((&r, _), _)| r < max_radius)
            .map(|((_, k), m)| (k / PI).sqrt() - m)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// One-sided test for clustering: whether `L` rises above the upper
    /// critical value at some radius below `max_radius`.
    pub fn exceeds_above(&self, k_values: &[f64], max_radius: f64) -> bool {
        self.rise(k_values, max_radius) > self.upper_critical
    }
}
