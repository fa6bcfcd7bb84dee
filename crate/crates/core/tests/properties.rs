use mmtier::analytics::{hop_count, HopPolicy};
use mmtier::geometry::{ripley_k, sample_ppp, select_scheduled, Window};
use mmtier::rng::{domain, stream};
use mmtier::stats::wilson_interval;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ppp_points_stay_in_the_disk(seed in any::<u64>(), radius in 10.0..500.0f64) {
        let window = Window::disk(radius).unwrap();
        let pts = sample_ppp(50.0 / window.area(), &window, &mut stream(seed, domain::TOPOLOGY, 0)).unwrap();
        prop_assert!(pts.iter().all(|p| window.contains(p)));
    }

    #[test]
    fn ripley_k_is_nonnegative_and_nondecreasing(seed in any::<u64>()) {
        let window = Window::disk(100.0).unwrap();
        let pts = sample_ppp(200.0 / window.area(), &window, &mut stream(seed, domain::ENVELOPE, 0)).unwrap();
        prop_assume!(pts.len() >= 2);
        let radii = [5.0, 10.0, 20.0, 40.0];
        let k = ripley_k(&pts, &window, &radii).unwrap();
        prop_assert!(k[0] >= 0.0);
        prop_assert!(k.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn one_member_per_cluster_is_scheduled(seed in any::<u64>(), sizes in prop::collection::vec(1usize..8, 1..20)) {
        let mut clusters = Vec::new();
        let mut next = 0;
        for s in &sizes {
            clusters.push((next..next + s).collect::<Vec<usize>>());
            next += s;
        }
        let picked = select_scheduled(next, Some(&clusters), &mut stream(seed, domain::TOPOLOGY, 1)).unwrap();
        prop_assert_eq!(picked.len(), clusters.len());
        for (p, c) in picked.iter().zip(&clusters) {
            prop_assert!(c.contains(p));
        }
    }

    #[test]
    fn exact_hop_counts_recover_the_density(hops in 0usize..40, k in 1usize..16, lambda0 in 1e-7..1e-3f64) {
        let lambda_total = lambda0 * (1.0 + (hops * k) as f64);
        let m = hop_count(lambda_total, lambda0, k, HopPolicy::Exact).unwrap();
        prop_assert_eq!(m.hops, hops);
    }

    #[test]
    fn wilson_interval_brackets_the_estimate(trials in 1u64..100_000, frac in 0.0..=1.0f64) {
        let successes = (frac * trials as f64).floor() as u64;
        let p = wilson_interval(successes, trials, 1.96);
        prop_assert!(p.ci_lower <= p.estimate && p.estimate <= p.ci_upper);
        prop_assert!(p.ci_lower >= 0.0 && p.ci_upper <= 1.0);
    }
}
