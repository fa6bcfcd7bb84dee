//! Simulation-backed checks across modules.

use mmtier::analytics::{
    conditional_coverage, intensity_from_r0, HopPolicy, NetworkParams, QuadratureSpec, ServingDistanceLaw,
};
use mmtier::channel::{BeamParams, ChannelParams, LinkState};
use mmtier::geometry::{build_tier_topology, ripley_k, CsrEnvelope, Point, Window};
use mmtier::montecarlo::{association_samples, empirical_conditional_coverage, SimConfig};
use mmtier::par::Execution;
use mmtier::rng::{domain, stream};

fn reference_beam() -> BeamParams {
    BeamParams::from_degrees(30.0, 100.0, 1.0, 12).unwrap()
}

fn network(r0: f64, k: usize) -> NetworkParams {
    let lambda0 = intensity_from_r0(r0);
    NetworkParams {
        lambda_total: 13.0 * lambda0,
        lambda_tier0: lambda0,
        rf_chains: 12,
        bandwidth: 1.0,
        gain_per_hop: k,
        hop_policy: HopPolicy::Exact,
    }
}

#[test]
fn scheduled_relays_look_like_a_ppp_for_k6() {
    let net = network(100.0, 6);
    let window = Window::disk(1000.0).unwrap().with_guard(500.0).unwrap();
    let mut rng = stream(11, domain::TOPOLOGY, 6);
    let topo = build_tier_topology(&net, &ChannelParams::default(), &window, &mut rng).unwrap();
    let scheduled: Vec<Point> = topo.scheduled[1].iter().map(|&j| topo.tiers[1][j]).collect();
    let inside = scheduled.iter().filter(|p| window.contains(p)).count();
    // Count is Poisson with mean Λ_0 · area = 100.
    assert!((inside as f64 - 100.0).abs() < 4.0 * 10.0, "{inside} scheduled relays");

    let radii: Vec<f64> = (1..=10).map(|j| 5.0 * j as f64).collect();
    let k = ripley_k(&scheduled, &window, &radii).unwrap();
    let env = CsrEnvelope::simulate(inside, &window, &radii, 199, 0.99, 5, Execution::Parallel).unwrap();
    assert!(env.contains(&k), "deviation {} > {}", env.deviation(&k), env.critical);
}

#[test]
fn conditional_coverage_matches_simulation() {
    let channel = ChannelParams::default();
    let lambda0 = intensity_from_r0(100.0);
    let quad = QuadratureSpec::for_intensity(lambda0);
    let sim = SimConfig::matching(&quad, 20_000, 3).unwrap();
    let beam = reference_beam();
    for (tau, r, state, k) in [
        (1.0, 50.0, LinkState::Los, 6),
        (10.0, 80.0, LinkState::Los, 1),
        (0.1, 40.0, LinkState::Nlos, 12),
        (3.0, 30.0, LinkState::Nlos, 3),
    ] {
        let analytic = conditional_coverage(tau, r, k, state, lambda0, &channel, &beam, &quad)
            .unwrap()
            .value;
        let mc = empirical_conditional_coverage(tau, r, state, k, lambda0, &channel, &beam, &sim).unwrap();
        assert!(
            (analytic - mc.estimate).abs() <= 0.02,
            "tau {tau}, r {r}, {state:?}, k {k}: {analytic} vs {}",
            mc.estimate
        );
    }
}

#[test]
fn simulated_los_share_matches_the_law() {
    let channel = ChannelParams::default();
    for r0 in [100.0, 200.0] {
        let lambda0 = intensity_from_r0(r0);
        let quad = QuadratureSpec::for_intensity(lambda0);
        let law = ServingDistanceLaw::new(lambda0, &channel, &quad).unwrap();
        let sim = SimConfig::matching(&quad, 20_000, 9).unwrap();
        let samples = association_samples(lambda0, &channel, &sim).unwrap();
        let p = law.los_fraction();
        let se = (p * (1.0 - p) / samples.states.len() as f64).sqrt();
        assert!(
            (samples.los_fraction() - p).abs() <= 4.0 * se,
            "r0 {r0}: simulated {} vs analytic {p}",
            samples.los_fraction()
        );
    }
}
