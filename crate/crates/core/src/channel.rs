//! Link-level models: LOS blockage, path loss, Rayleigh fading and the
//! three-level beamforming gain induced by sectored analog beams.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_at_least, ensure_positive};
use crate::{Error, Result};

/// Propagation state of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkState {
    Los,
    Nlos,
}

impl LinkState {
    pub fn other(self) -> LinkState {
        match self {
            LinkState::Los => LinkState::Nlos,
            LinkState::Nlos => LinkState::Los,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LinkState::Los => "los",
            LinkState::Nlos => "nlos",
        }
    }
}

/// Distance-dependent LOS probability `P_L(r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlockageModel {
    /// `P_L(r) = exp(-r / mu)`.
    Exponential { mu: f64 },
    /// LOS inside a ball of the given radius, NLOS outside.
    LosBall { radius: f64 },
    /// Distance-independent LOS probability.
    Constant { p: f64 },
}

impl Default for BlockageModel {
    fn default() -> Self {
        BlockageModel::Exponential {
            mu: DEFAULT_BLOCKAGE_MU,
        }
    }
}

/// Default mean LOS length in meters for the exponential model.
pub const DEFAULT_BLOCKAGE_MU: f64 = 141.4;

impl BlockageModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BlockageModel::Exponential { mu } => ensure_positive("mu", mu),
            BlockageModel::LosBall { radius } => ensure_positive("los_radius", radius),
            BlockageModel::Constant { p } => {
                if (0.0..=1.0).contains(&p) {
                    Ok(())
                } else {
                    Err(Error::invalid("los_prob", format!("{p} is outside [0, 1]")))
                }
            }
        }
    }

    /// `P_L(r)` without argument checks; `r` is assumed non-negative.
    #[inline]
    pub fn p_los(&self, r: f64) -> f64 {
        match *self {
            BlockageModel::Exponential { mu } => (-r / mu).exp(),
            BlockageModel::LosBall { radius } => {
                if r <= radius {
                    1.0
                } else {
                    0.0
                }
            }
            BlockageModel::Constant { p } => p,
        }
    }

    #[inline]
    pub fn p_state(&self, r: f64, state: LinkState) -> f64 {
        match state {
            LinkState::Los => self.p_los(r),
            LinkState::Nlos => 1.0 - self.p_los(r),
        }
    }

    /// Length scale at which `P_L` changes, if it has one.
    pub fn scale(&self) -> Option<f64> {
        match *self {
            BlockageModel::Exponential { mu } => Some(mu),
            BlockageModel::LosBall { radius } => Some(radius),
            BlockageModel::Constant { .. } => None,
        }
    }

    /// Points where `P_L` is discontinuous.
    pub fn discontinuities(&self) -> Option<f64> {
        match *self {
            BlockageModel::LosBall { radius } => Some(radius),
            _ => None,
        }
    }

    /// Upper bound on `∫_R^∞ P(r) r^{1-alpha} dr` for the given state.
    /// Returns `f64::INFINITY` when the tail integral diverges.
    pub fn tail_bound(&self, radius: f64, alpha: f64, state: LinkState) -> f64 {
        let q = 1.0 - alpha;
        // ∫_R^∞ r^q dr
        let power_tail = if q < -1.0 {
            radius.powf(q + 1.0) / (alpha - 2.0)
        } else {
            f64::INFINITY
        };
        match (*self, state) {
            (BlockageModel::Exponential { mu }, LinkState::Los) => {
                if q > -1.0 {
                    let a = q + 1.0;
                    mu.powf(a) * statrs::function::gamma::gamma_ui(a, radius / mu)
                } else {
                    radius.powf(q) * mu * (-radius / mu).exp()
                }
            }
            (BlockageModel::Exponential { .. }, LinkState::Nlos) => power_tail,
            (BlockageModel::LosBall { radius: ball }, LinkState::Los) => {
                if radius >= ball {
                    0.0
                } else if (q + 1.0).abs() < 1e-12 {
                    (ball / radius).ln()
                } else {
                    (ball.powf(q + 1.0) - radius.powf(q + 1.0)) / (q + 1.0)
                }
            }
            (BlockageModel::LosBall { .. }, LinkState::Nlos) => power_tail,
            (BlockageModel::Constant { p }, s) => {
                let w = if s == LinkState::Los { p } else { 1.0 - p };
                if w == 0.0 {
                    0.0
                } else {
                    w * power_tail
                }
            }
        }
    }
}

/// LOS probability of a link of length `r`.
pub fn los_probability(r: f64, blockage: &BlockageModel) -> Result<f64> {
    ensure_at_least("r", r, 0.0)?;
    blockage.validate()?;
    Ok(blockage.p_los(r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub alpha_los: f64,
    pub alpha_nlos: f64,
    /// Linear path-loss intercept.
    pub beta: f64,
    pub blockage: BlockageModel,
    /// Linear noise power (watts).
    pub noise_power: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            alpha_los: 2.0,
            alpha_nlos: 4.0,
            beta: 1.0,
            blockage: BlockageModel::default(),
            noise_power: 0.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("alpha_los", self.alpha_los)?;
        ensure_positive("alpha_nlos", self.alpha_nlos)?;
        if self.alpha_nlos < self.alpha_los {
            return Err(Error::invalid(
                "alpha_nlos",
                format!("{} < alpha_los {}", self.alpha_nlos, self.alpha_los),
            ));
        }
        ensure_positive("beta", self.beta)?;
        ensure_at_least("noise_power", self.noise_power, 0.0)?;
        if !self.noise_power.is_finite() {
            return Err(Error::invalid("noise_power", "must be finite"));
        }
        self.blockage.validate()
    }

    #[inline]
    pub fn exponent(&self, state: LinkState) -> f64 {
        match state {
            LinkState::Los => self.alpha_los,
            LinkState::Nlos => self.alpha_nlos,
        }
    }

    /// Radius below which an AP in `other` state would beat a serving AP of
    /// state `serving` at distance `r` (equal received average power).
    #[inline]
    pub fn exclusion_radius(&self, r: f64, serving: LinkState) -> f64 {
        let ratio = self.exponent(serving) / self.exponent(serving.other());
        if ratio == 1.0 {
            r
        } else {
            r.powf(ratio)
        }
    }

    /// `β r^{-α}` without argument checks.
    #[inline]
    pub fn path_gain(&self, r: f64, state: LinkState) -> f64 {
        self.beta / pow_fast(r, self.exponent(state))
    }
}

/// `r^alpha`, short-circuiting the common integer exponents.
#[inline]
pub(crate) fn pow_fast(r: f64, alpha: f64) -> f64 {
    if alpha == 2.0 {
        r * r
    } else if alpha == 4.0 {
        let r2 = r * r;
        r2 * r2
    } else if alpha == 3.0 {
        r * r * r
    } else {
        r.powf(alpha)
    }
}

/// Linear path loss `β r^{-α(state)}`. `r = 0` is rejected.
pub fn path_loss(r: f64, state: LinkState, params: &ChannelParams) -> Result<f64> {
    ensure_positive("r", r)?;
    params.validate()?;
    Ok(params.path_gain(r, state))
}

/// Sectored beam model.
///
/// The main-lobe width is held as a fraction of the full circle so that
/// widths given in degrees produce exact lobe fractions (30° gives 1/12).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamParams {
    /// `θ_A / 2π`.
    pub lobe_fraction: f64,
    pub g_main: f64,
    pub g_side: f64,
    pub rf_chains: usize,
}

impl BeamParams {
    pub fn from_radians(theta_a: f64, g_main: f64, g_side: f64, rf_chains: usize) -> Result<Self> {
        let beam = BeamParams {
            lobe_fraction: theta_a / (2.0 * PI),
            g_main,
            g_side,
            rf_chains,
        };
        beam.validate()?;
        Ok(beam)
    }

    pub fn from_degrees(theta_deg: f64, g_main: f64, g_side: f64, rf_chains: usize) -> Result<Self> {
        let beam = BeamParams {
            lobe_fraction: theta_deg / 360.0,
            g_main,
            g_side,
            rf_chains,
        };
        beam.validate()?;
        Ok(beam)
    }

    pub fn theta_a(&self) -> f64 {
        self.lobe_fraction * 2.0 * PI
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lobe_fraction > 0.0 && self.lobe_fraction <= 1.0) {
            return Err(Error::invalid("theta_a", "main-lobe width must lie in (0, 2π]"));
        }
        ensure_positive("g_side", self.g_side)?;
        ensure_positive("g_main", self.g_main)?;
        if self.g_main < self.g_side {
            return Err(Error::invalid("g_main", "main-lobe gain below side-lobe gain"));
        }
        if self.rf_chains == 0 {
            return Err(Error::invalid("rf_chains", "need at least one RF chain"));
        }
        if self.lobe_fraction * self.rf_chains as f64 > 1.0 + 1e-12 {
            return Err(Error::invalid("theta_a", "θ_A · K exceeds 2π"));
        }
        Ok(())
    }
}

/// Distribution of the transceiver gain seen from one interferer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainPmf {
    /// `(gain, probability)` for `G_A²`, `G_A g_A`, `g_A²` in that order.
    pub atoms: [(f64, f64); 3],
}

impl GainPmf {
    pub fn probabilities(&self) -> [f64; 3] {
        [self.atoms[0].1, self.atoms[1].1, self.atoms[2].1]
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(g, p)| g * p).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let [(g0, p0), (g1, p1), (g2, _)] = self.atoms;
        if u < p0 {
            g0
        } else if u < p0 + p1 {
            g1
        } else {
            g2
        }
    }
}

/// Beam-gain PMF when each transmitter serves `k` streams.
///
/// With `p = θ_A k / 2π` the probabilities are `p²`, `2p(1-p)` and `(1-p)²`.
pub fn beam_gain_pmf(beam: &BeamParams, k: usize) -> Result<GainPmf> {
    beam.validate()?;
    if k == 0 || k > beam.rf_chains {
        return Err(Error::invalid(
            "k",
            format!("multiplexing gain {k} outside 1..={}", beam.rf_chains),
        ));
    }
    let p = beam.lobe_fraction * k as f64;
    if p > 1.0 + 1e-12 {
        return Err(Error::invalid("k", "θ_A · k exceeds 2π"));
    }
    let p = p.min(1.0);
    let q = 1.0 - p;
    let (gm, gs) = (beam.g_main, beam.g_side);
    Ok(GainPmf {
        atoms: [(gm * gm, p * p), (gm * gs, 2.0 * p * q), (gs * gs, q * q)],
    })
}

/// Unit-mean exponential power gain (Rayleigh amplitude).
#[inline]
pub fn sample_fading<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

/// dB to linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exp_blockage(mu: f64) -> BlockageModel {
        BlockageModel::Exponential { mu }
    }

    #[test]
    fn exponential_los_probability() {
        assert_eq!(los_probability(0.0, &exp_blockage(141.4)).unwrap(), 1.0);
        assert_relative_eq!(
            los_probability(141.4, &exp_blockage(141.4)).unwrap(),
            (-1f64).exp(),
            max_relative = 1e-15
        );
        assert_relative_eq!((-1f64).exp(), 0.367879, epsilon = 1e-6);
    }

    #[test]
    fn los_ball_is_indicator() {
        let b = BlockageModel::LosBall { radius: 50.0 };
        assert_eq!(los_probability(49.9, &b).unwrap(), 1.0);
        assert_eq!(los_probability(50.1, &b).unwrap(), 0.0);
    }

    #[test]
    fn negative_distance_rejected() {
        assert!(los_probability(-1.0, &exp_blockage(10.0)).is_err());
    }

    #[test]
    fn invalid_blockage_rejected() {
        assert!(BlockageModel::Constant { p: 1.5 }.validate().is_err());
        assert!(BlockageModel::Exponential { mu: 0.0 }.validate().is_err());
        assert!(BlockageModel::LosBall { radius: -1.0 }.validate().is_err());
    }

    #[test]
    fn path_loss_examples() {
        let ch = ChannelParams {
            blockage: BlockageModel::Constant { p: 1.0 },
            ..ChannelParams::default()
        };
        assert_relative_eq!(
            path_loss(10.0, LinkState::Los, &ch).unwrap(),
            0.01,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            path_loss(10.0, LinkState::Nlos, &ch).unwrap(),
            1e-4,
            max_relative = 1e-15
        );
        let ch3 = ChannelParams { beta: 3.5, ..ch };
        assert_eq!(path_loss(1.0, LinkState::Los, &ch3).unwrap(), 3.5);
        assert_eq!(path_loss(1.0, LinkState::Nlos, &ch3).unwrap(), 3.5);
        assert!(path_loss(0.0, LinkState::Los, &ch).is_err());
    }

    #[test]
    fn channel_invariants() {
        let bad = ChannelParams {
            alpha_los: 4.0,
            alpha_nlos: 2.0,
            ..ChannelParams::default()
        };
        assert!(bad.validate().is_err());
        assert!(ChannelParams {
            beta: 0.0,
            ..ChannelParams::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn pmf_examples_at_thirty_degrees() {
        let beam = BeamParams::from_degrees(30.0, 100.0, 1.0, 12).unwrap();
        let p12 = beam_gain_pmf(&beam, 12).unwrap().probabilities();
        assert_eq!(p12, [1.0, 0.0, 0.0]);
        let p6 = beam_gain_pmf(&beam, 6).unwrap().probabilities();
        assert_eq!(p6, [0.25, 0.5, 0.25]);
        let p1 = beam_gain_pmf(&beam, 1).unwrap().probabilities();
        let expected = [1.0 / 144.0, 22.0 / 144.0, 121.0 / 144.0];
        for (a, b) in p1.iter().zip(expected) {
            assert_relative_eq!(*a, b, max_relative = 1e-15);
        }
        let atoms = beam_gain_pmf(&beam, 1).unwrap().atoms;
        assert_eq!([atoms[0].0, atoms[1].0, atoms[2].0], [1e4, 100.0, 1.0]);
    }

    #[test]
    fn pmf_rejects_too_many_beams() {
        let beam = BeamParams::from_degrees(30.0, 100.0, 1.0, 12).unwrap();
        assert!(beam_gain_pmf(&beam, 13).is_err());
        assert!(beam_gain_pmf(&beam, 0).is_err());
        // θ_A · K > 2π is caught when the beam is built.
        assert!(BeamParams::from_degrees(40.0, 100.0, 1.0, 12).is_err());
    }

    #[test]
    fn fading_has_unit_mean_and_ln2_median() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut above = 0usize;
        for _ in 0..n {
            let h = sample_fading(&mut rng);
            sum += h;
            if h > std::f64::consts::LN_2 {
                above += 1;
            }
        }
        let mean = sum / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        let frac = above as f64 / n as f64;
        // 4σ binomial band around 1/2
        assert!((frac - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt(), "fraction {frac}");
    }

    #[test]
    fn fading_is_reproducible() {
        let a: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            (0..16).map(|_| sample_fading(&mut rng)).collect()
        };
        let b: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            (0..16).map(|_| sample_fading(&mut rng)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn db_conversion() {
        assert_eq!(db_to_linear(20.0), 100.0);
        assert_eq!(db_to_linear(0.0), 1.0);
        assert_relative_eq!(linear_to_db(100.0), 20.0);
    }

    #[test]
    fn tail_bound_exponential_nlos_alpha4() {
        let b = exp_blockage(141.4);
        assert_relative_eq!(
            b.tail_bound(100.0, 4.0, LinkState::Nlos),
            1.0 / (2.0 * 100.0f64.powi(2))
        );
        // α = 2 NLOS tail diverges.
        assert!(b.tail_bound(100.0, 2.0, LinkState::Nlos).is_infinite());
        // LOS tail with α = 2 converges thanks to blockage.
        let t = b.tail_bound(5000.0, 2.0, LinkState::Los);
        assert!(t > 0.0 && t < 1e-15, "{t}");
    }

    fn blockage_strategy() -> impl Strategy<Value = BlockageModel> {
        prop_oneof![
            (1.0f64..1000.0).prop_map(|mu| BlockageModel::Exponential { mu }),
            (1.0f64..1000.0).prop_map(|radius| BlockageModel::LosBall { radius }),
            (0.0f64..=1.0).prop_map(|p| BlockageModel::Constant { p }),
        ]
    }

    proptest! {
        #[test]
        fn los_and_nlos_probabilities_partition(b in blockage_strategy(), r in 0.0f64..1e4) {
            let pl = b.p_state(r, LinkState::Los);
            let pn = b.p_state(r, LinkState::Nlos);
            prop_assert!((0.0..=1.0).contains(&pl));
            prop_assert!((pl + pn - 1.0).abs() < 1e-15);
        }

        #[test]
        fn los_probability_non_increasing(mu in 1.0f64..1000.0, r in 0.0f64..1e4, dr in 0.0f64..100.0) {
            let e = BlockageModel::Exponential { mu };
            prop_assert!(e.p_los(r + dr) <= e.p_los(r));
            let ball = BlockageModel::LosBall { radius: mu };
            prop_assert!(ball.p_los(r + dr) <= ball.p_los(r));
        }

        #[test]
        fn path_loss_monotone_and_los_dominates(r in 1.0f64..1e4, dr in 1e-3f64..100.0, al in 1.5f64..3.0, extra in 0.0f64..2.0) {
            let ch = ChannelParams { alpha_los: al, alpha_nlos: al + extra, ..ChannelParams::default() };
            for s in [LinkState::Los, LinkState::Nlos] {
                prop_assert!(ch.path_gain(r + dr, s) < ch.path_gain(r, s));
            }
            prop_assert!(ch.path_gain(r, LinkState::Los) >= ch.path_gain(r, LinkState::Nlos));
        }

        #[test]
        fn pmf_sums_to_one(theta_deg in 0.1f64..360.0, k_frac in 0.0f64..1.0) {
            let k_max = ((360.0 / theta_deg).floor() as usize).max(1);
            let beam = BeamParams::from_degrees(theta_deg, 100.0, 1.0, k_max).unwrap();
            let k = 1 + ((k_max - 1) as f64 * k_frac) as usize;
            let pmf = beam_gain_pmf(&beam, k).unwrap();
            let total: f64 = pmf.probabilities().iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            prop_assert!(pmf.probabilities().iter().all(|p| (0.0..=1.0).contains(p)));
        }

        #[test]
        fn expected_gain_non_decreasing_in_k(theta_deg in 1.0f64..60.0, gm_db in 0.0f64..30.0) {
            let k_max = (360.0 / theta_deg).floor() as usize;
            let beam = BeamParams::from_degrees(theta_deg, db_to_linear(gm_db), 1.0, k_max).unwrap();
            let means: Vec<f64> = (1..=k_max).map(|k| beam_gain_pmf(&beam, k).unwrap().mean()).collect();
            prop_assert!(means.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-14)));
        }
    }
}
