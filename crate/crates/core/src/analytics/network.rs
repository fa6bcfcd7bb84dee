use serde::{Deserialize, Serialize};

use super::coverage::{coverage_probability, CoverageValue};
use super::QuadratureSpec;
use crate::channel::{BeamParams, ChannelParams};
use crate::error::ensure_positive;
use crate::{Error, Result};

/// What to do when `(Λ_A - Λ_0) / (k Λ_0)` is not an integer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HopPolicy {
    /// Reject the configuration.
    #[default]
    Exact,
    /// Round the hop count down and report the unused intensity.
    Floor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    /// Total AP intensity `Λ_A` (points/m²).
    pub lambda_total: f64,
    /// Backhaul tier intensity `Λ_0` (points/m²).
    pub lambda_tier0: f64,
    pub rf_chains: usize,
    /// Per-AP bandwidth in Hz.
    pub bandwidth: f64,
    /// Multiplexing gain used on every hop.
    pub gain_per_hop: usize,
    pub hop_policy: HopPolicy,
}

impl NetworkParams {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("lambda_tier0", self.lambda_tier0)?;
        ensure_positive("lambda_total", self.lambda_total)?;
        if self.lambda_total < self.lambda_tier0 {
            return Err(Error::Infeasible(format!(
                "Λ_A = {:e} is below Λ_0 = {:e}",
                self.lambda_total, self.lambda_tier0
            )));
        }
        if self.rf_chains == 0 {
            return Err(Error::invalid("rf_chains", "need at least one RF chain"));
        }
        if self.gain_per_hop == 0 || self.gain_per_hop > self.rf_chains {
            return Err(Error::invalid(
                "gain_per_hop",
                format!("{} outside 1..={}", self.gain_per_hop, self.rf_chains),
            ));
        }
        ensure_positive("bandwidth", self.bandwidth)
    }

    /// `Λ_A / Λ_0`.
    pub fn density_ratio(&self) -> f64 {
        self.lambda_total / self.lambda_tier0
    }
}

/// Latency sandwich `(Λ_A/(KΛ_0) - 1/K, Λ_A/Λ_0 - 1)`.
pub fn latency_bounds(lambda_total: f64, lambda0: f64, rf_chains: usize) -> Result<(f64, f64)> {
    ensure_positive("lambda0", lambda0)?;
    if !(lambda_total >= lambda0) {
        return Err(Error::Infeasible(format!(
            "Λ_A = {lambda_total:e} is below Λ_0 = {lambda0:e}"
        )));
    }
    if rf_chains == 0 {
        return Err(Error::invalid("rf_chains", "need at least one RF chain"));
    }
    let relays = lambda_total / lambda0 - 1.0;
    Ok((relays / rf_chains as f64, relays))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopCount {
    pub hops: usize,
    /// Intensity left unassigned when the hop count was floored (points/m²).
    pub residual_intensity: f64,
}

const INTEGER_SLACK: f64 = 1e-9;

/// Number of relay hops `M = (Λ_A - Λ_0) / (k Λ_0)`.
pub fn hop_count(lambda_total: f64, lambda0: f64, k: usize, policy: HopPolicy) -> Result<HopCount> {
    ensure_positive("lambda0", lambda0)?;
    if !(lambda_total >= lambda0) {
        return Err(Error::Infeasible(format!(
            "Λ_A = {lambda_total:e} is below Λ_0 = {lambda0:e}"
        )));
    }
    if k == 0 {
        return Err(Error::invalid("k", "multiplexing gain must be at least 1"));
    }
    let exact = (lambda_total / lambda0 - 1.0) / k as f64;
    let nearest = exact.round();
    if (exact - nearest).abs() <= INTEGER_SLACK * nearest.max(1.0) {
        return Ok(HopCount {
            hops: nearest as usize,
            residual_intensity: 0.0,
        });
    }
    match policy {
        HopPolicy::Exact => Err(Error::Infeasible(format!(
            "(Λ_A - Λ_0)/(k Λ_0) = {exact} is not an integer for k = {k}"
        ))),
        HopPolicy::Floor => {
            let hops = exact.floor() as usize;
            Ok(HopCount {
                hops,
                residual_intensity: (lambda_total - lambda0) - hops as f64 * k as f64 * lambda0,
            })
        }
    }
}

/// `W k Λ_0 C log2(1 + τ)`.
pub fn throughput_from_coverage(bandwidth: f64, k: usize, lambda0: f64, coverage: f64, tau: f64) -> f64 {
    bandwidth * k as f64 * lambda0 * coverage * (1.0 + tau).log2()
}

/// Network throughput (bits/s per m²) for a uniform multiplexing gain `k`.
pub fn throughput(
    k: usize,
    tau: f64,
    net: &NetworkParams,
    channel: &ChannelParams,
    beam: &BeamParams,
    quad: &QuadratureSpec,
) -> Result<(f64, CoverageValue)> {
    ensure_positive("bandwidth", net.bandwidth)?;
    let coverage = coverage_probability(tau, k, net.lambda_tier0, channel, beam, quad)?;
    Ok((
        throughput_from_coverage(net.bandwidth, k, net.lambda_tier0, coverage.value, tau),
        coverage,
    ))
}

/// Exhaustive argmax over `k ∈ 1..=rf_chains` restricted to `feasible`,
/// breaking ties toward the smaller gain.
pub fn optimal_gain_by<P, F>(rf_chains: usize, feasible: P, mut evaluate: F) -> Result<(usize, f64)>
where
    P: Fn(usize) -> bool,
    F: FnMut(usize) -> Result<f64>,
{
    let mut best: Option<(usize, f64)> = None;
    for k in (1..=rf_chains).filter(|&k| feasible(k)) {
        let t = evaluate(k)?;
        if best.is_none_or(|(_, bt)| t > bt) {
            best = Some((k, t));
        }
    }
    best.ok_or_else(|| Error::Infeasible("no multiplexing gain satisfies the hop-count constraint".into()))
}

/// Throughput-maximising multiplexing gain at threshold `tau`.
pub fn optimal_gain(
    tau: f64,
    net: &NetworkParams,
    channel: &ChannelParams,
    beam: &BeamParams,
    quad: &QuadratureSpec,
) -> Result<(usize, f64)> {
    if net.rf_chains == 0 {
        return Err(Error::invalid("rf_chains", "need at least one RF chain"));
    }
    let k_max = net.rf_chains.min(beam.rf_chains);
    optimal_gain_by(
        k_max,
        |k| hop_count(net.lambda_total, net.lambda_tier0, k, net.hop_policy).is_ok(),
        |k| throughput(k, tau, net, channel, beam, quad).map(|(t, _)| t),
    )
}

/// One analytical grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub tau: f64,
    pub k: usize,
    pub coverage: f64,
    /// `None` when the hop count is not an integer for this `k`.
    pub latency: Option<usize>,
    pub throughput: f64,
    pub quad_error: f64,
    pub tail_bound: f64,
}

pub fn evaluate_point(
    tau: f64,
    k: usize,
    net: &NetworkParams,
    channel: &ChannelParams,
    beam: &BeamParams,
    quad: &QuadratureSpec,
) -> Result<CoverageResult> {
    let (t, coverage) = throughput(k, tau, net, channel, beam, quad)?;
    let latency = hop_count(net.lambda_total, net.lambda_tier0, k, net.hop_policy)
        .ok()
        .map(|h| h.hops);
    Ok(CoverageResult {
        tau,
        k,
        coverage: coverage.value,
        latency,
        throughput: t,
        quad_error: coverage.error,
        tail_bound: coverage.tail_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::intensity_from_r0;
    use proptest::prelude::*;

    const L0: f64 = 3.183_098_861_837_907e-5;

    #[test]
    fn reference_latency_instances() {
        let la = 13.0 * L0;
        assert_eq!(hop_count(la, L0, 1, HopPolicy::Exact).unwrap().hops, 12);
        assert_eq!(hop_count(la, L0, 6, HopPolicy::Exact).unwrap().hops, 2);
        assert_eq!(hop_count(la, L0, 12, HopPolicy::Exact).unwrap().hops, 1);
        assert_eq!(latency_bounds(la, L0, 12).unwrap(), (1.0, 12.0));
    }

    #[test]
    fn latency_bound_corner_cases() {
        let (lo, hi) = latency_bounds(7.0 * L0, L0, 1).unwrap();
        assert_eq!(lo, hi);
        assert_eq!(latency_bounds(L0, L0, 12).unwrap(), (0.0, 0.0));
        assert!(latency_bounds(0.5 * L0, L0, 12).is_err());
    }

    #[test]
    fn non_integer_hops_rejected_or_floored() {
        let la = 13.0 * L0;
        assert!(matches!(
            hop_count(la, L0, 5, HopPolicy::Exact),
            Err(Error::Infeasible(_))
        ));
        let floored = hop_count(la, L0, 5, HopPolicy::Floor).unwrap();
        assert_eq!(floored.hops, 2);
        assert!((floored.residual_intensity - 2.0 * L0).abs() < 1e-12 * L0.max(1.0));
    }

    #[test]
    fn throughput_unit_plug_in() {
        assert_eq!(throughput_from_coverage(1.0, 1, 1.0, 1.0, 1.0), 1.0);
    }

    #[test]
    fn optimal_gain_corner_cases() {
        assert_eq!(optimal_gain_by(1, |_| true, |_| Ok(0.3)).unwrap().0, 1);
        // Constant coverage: throughput linear in k.
        let c = 0.7;
        let best = optimal_gain_by(12, |_| true, |k| Ok(throughput_from_coverage(1.0, k, 1.0, c, 1.0))).unwrap();
        assert_eq!(best.0, 12);
        // Ties go to the smaller gain.
        assert_eq!(optimal_gain_by(5, |_| true, |_| Ok(1.0)).unwrap().0, 1);
        assert!(optimal_gain_by(5, |_| false, |_| Ok(1.0)).is_err());
    }

    #[test]
    fn network_params_validation() {
        let good = NetworkParams {
            lambda_total: 13.0 * L0,
            lambda_tier0: L0,
            rf_chains: 12,
            bandwidth: 1e9,
            gain_per_hop: 1,
            hop_policy: HopPolicy::Exact,
        };
        assert!(good.validate().is_ok());
        assert!(NetworkParams {
            lambda_total: 0.5 * L0,
            ..good
        }
        .validate()
        .is_err());
        assert!(NetworkParams {
            gain_per_hop: 13,
            ..good
        }
        .validate()
        .is_err());
        assert!(NetworkParams { bandwidth: 0.0, ..good }.validate().is_err());
        assert!((intensity_from_r0(100.0) / L0 - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn hop_count_within_latency_bounds(k in 1usize..=12, m in 0usize..40, r0 in 10.0f64..500.0) {
            let lambda0 = intensity_from_r0(r0);
            let lambda_total = lambda0 * (1.0 + (k * m) as f64);
            let hops = hop_count(lambda_total, lambda0, k, HopPolicy::Exact).unwrap().hops;
            prop_assert_eq!(hops, m);
            let (lo, hi) = latency_bounds(lambda_total, lambda0, 12).unwrap();
            prop_assert!(hops as f64 >= lo - 1e-9 && hops as f64 <= hi + 1e-9);
        }
    }
}
