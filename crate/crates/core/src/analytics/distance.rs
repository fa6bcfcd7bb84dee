use std::f64::consts::PI;

use rand::Rng;

use super::{ensure_intensity, QuadratureSpec};
use crate::channel::{BlockageModel, ChannelParams, LinkState};
use crate::error::ensure_at_least;
use crate::quadrature::{geometric_breakpoints, integrate_with_breakpoints, Estimate, Tolerance};
use crate::{Error, Result};

fn moment_breakpoints(lower: f64, upper: f64, blockage: &BlockageModel) -> Vec<f64> {
    let mut points = match blockage.scale() {
        Some(scale) => geometric_breakpoints(lower, upper, scale),
        None => vec![lower, upper],
    };
    if let Some(edge) = blockage.discontinuities() {
        if edge > lower && edge < upper {
            points.push(edge);
            points.sort_by(f64::total_cmp);
            points.dedup();
        }
    }
    points
}

/// `∫_0^z P_state(r) r dr` by adaptive quadrature.
pub fn blockage_moment(z: f64, state: LinkState, blockage: &BlockageModel, tol: &Tolerance) -> Result<Estimate> {
    if z <= 0.0 {
        return Ok(Estimate::ZERO);
    }
    if let BlockageModel::Constant { p } = *blockage {
        // Integrand is linear; one Kronrod pass is exact, skip the breakpoints.
        let w = if state == LinkState::Los { p } else { 1.0 - p };
        if w == 0.0 {
            return Ok(Estimate::ZERO);
        }
    }
    let points = moment_breakpoints(0.0, z, blockage);
    integrate_with_breakpoints(|r| blockage.p_state(r, state) * r, &points, tol)
}

/// Density of the distance to the nearest AP in the given state when APs form
/// a PPP of intensity `lambda` and links are blocked independently.
pub fn nearest_distance_pdf(
    z: f64,
    state: LinkState,
    lambda: f64,
    blockage: &BlockageModel,
    quad: &QuadratureSpec,
) -> Result<Estimate> {
    ensure_at_least("z", z, 0.0)?;
    ensure_intensity(lambda)?;
    blockage.validate()?;
    nearest_pdf_unchecked(z, state, lambda, blockage, &quad.tolerance())
}

pub(crate) fn nearest_pdf_unchecked(
    z: f64,
    state: LinkState,
    lambda: f64,
    blockage: &BlockageModel,
    tol: &Tolerance,
) -> Result<Estimate> {
    let p = blockage.p_state(z, state);
    if p == 0.0 || z == 0.0 {
        return Ok(Estimate::ZERO);
    }
    let moment = blockage_moment(z, state, blockage, tol)?;
    Ok(moment.exp_neg(2.0 * PI * lambda).scaled(2.0 * PI * z * lambda * p))
}

/// Joint density of the serving distance and the serving state: the nearest
/// AP in `state` sits at `r` and no AP of the other state is strong enough
/// to take over.
pub fn serving_distance_pdf(
    r: f64,
    state: LinkState,
    lambda: f64,
    channel: &ChannelParams,
    quad: &QuadratureSpec,
) -> Result<Estimate> {
    if !(r > 0.0) {
        return Err(Error::invalid("r", format!("{r} must be positive")));
    }
    ensure_intensity(lambda)?;
    channel.validate()?;
    serving_pdf_unchecked(r, state, lambda, channel, &quad.tolerance())
}

pub(crate) fn serving_pdf_unchecked(
    r: f64,
    state: LinkState,
    lambda: f64,
    channel: &ChannelParams,
    tol: &Tolerance,
) -> Result<Estimate> {
    let nearest = nearest_pdf_unchecked(r, state, lambda, &channel.blockage, tol)?;
    if nearest.value == 0.0 {
        return Ok(Estimate::ZERO);
    }
    let excl = channel.exclusion_radius(r, state);
    let void = blockage_moment(excl, state.other(), &channel.blockage, tol)?.exp_neg(2.0 * PI * lambda);
    Ok(nearest.times(void))
}

/// Breakpoints for integrating the serving-distance law over `[0, upper]`.
pub(crate) fn serving_breakpoints(lambda: f64, channel: &ChannelParams, upper: f64) -> Vec<f64> {
    let r0 = super::r0_from_intensity(lambda);
    let mut points = geometric_breakpoints(0.0, upper, r0);
    if let Some(scale) = channel.blockage.scale() {
        points.extend(geometric_breakpoints(0.0, upper, scale));
    }
    if let Some(edge) = channel.blockage.discontinuities() {
        // The LOS branch jumps at the edge, the NLOS branch where its
        // exclusion radius crosses it.
        points.push(edge);
        points.push(edge.powf(channel.alpha_los / channel.alpha_nlos));
    }
    points.retain(|&x| (0.0..=upper).contains(&x));
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
}

/// Probability that the serving AP is in `state`, integrated up to the
/// truncation radius.
pub fn serving_state_probability(
    state: LinkState,
    lambda: f64,
    channel: &ChannelParams,
    quad: &QuadratureSpec,
) -> Result<Estimate> {
    ensure_intensity(lambda)?;
    channel.validate()?;
    let tol = quad.tolerance();
    let points = serving_breakpoints(lambda, channel, quad.truncation_radius);
    integrate_pdf(&points, &tol, |r| {
        serving_pdf_unchecked(r, state, lambda, channel, &tol)
    })
}

/// Integrates a fallible density, surfacing the first inner failure.
pub(crate) fn integrate_pdf<F>(points: &[f64], tol: &Tolerance, pdf: F) -> Result<Estimate>
where
    F: Fn(f64) -> Result<Estimate>,
{
    let failure = std::cell::RefCell::new(None);
    let worst_rel = std::cell::Cell::new(0.0f64);
    let outer = integrate_with_breakpoints(
        |r| {
            if r <= 0.0 {
                return 0.0;
            }
            match pdf(r) {
                Ok(e) => {
                    if e.value != 0.0 {
                        worst_rel.set(worst_rel.get().max(e.error / e.value.abs()));
                    }
                    e.value
                }
                Err(err) => {
                    failure.borrow_mut().get_or_insert(err);
                    0.0
                }
            }
        },
        points,
        tol,
    )?;
    if let Some(err) = failure.into_inner() {
        return Err(err);
    }
    Ok(Estimate {
        value: outer.value,
        error: outer.error + worst_rel.get() * outer.value.abs(),
    })
}

/// Tabulated serving-distance law (both branches combined), used to place
/// cluster points and to evaluate its CDF cheaply.
///
/// The CDF is stored on a quadratic grid and interpolated with cubic Hermite
/// segments built from the exact density at the nodes.
#[derive(Debug, Clone)]
pub struct ServingDistanceLaw {
    grid: Vec<f64>,
    cdf: Vec<f64>,
    pdf: Vec<f64>,
    total_mass: f64,
    los_mass: f64,
}

const LAW_CELLS: usize = 4096;

impl ServingDistanceLaw {
    pub fn new(lambda: f64, channel: &ChannelParams, quad: &QuadratureSpec) -> Result<Self> {
        ensure_intensity(lambda)?;
        channel.validate()?;
        quad.validate()?;
        let tol = Tolerance::new(quad.rel_tol.min(1e-8), 1e-14);
        let upper = quad.truncation_radius;
        let grid: Vec<f64> = (0..=LAW_CELLS)
            .map(|j| {
                let t = j as f64 / LAW_CELLS as f64;
                upper * t * t
            })
            .collect();
        let density = |r: f64, state| serving_pdf_unchecked(r, state, lambda, channel, &tol);
        let mut pdf = Vec::with_capacity(grid.len());
        for &r in &grid {
            if r == 0.0 {
                pdf.push(0.0);
            } else {
                pdf.push(density(r, LinkState::Los)?.value + density(r, LinkState::Nlos)?.value);
            }
        }
        let mut cdf = Vec::with_capacity(grid.len());
        cdf.push(0.0);
        let mut running = 0.0;
        let mut los_mass = 0.0;
        let mut edges = serving_breakpoints(lambda, channel, upper).into_iter().peekable();
        for cell in grid.windows(2) {
            let (a, b) = (cell[0], cell[1]);
            let mut points = vec![a];
            while let Some(&e) = edges.peek() {
                if e <= a {
                    edges.next();
                } else if e < b {
                    points.push(e);
                    edges.next();
                } else {
                    break;
                }
            }
            points.push(b);
            let los = integrate_pdf(&points, &tol, |r| density(r, LinkState::Los))?.value;
            let nlos = integrate_pdf(&points, &tol, |r| density(r, LinkState::Nlos))?.value;
            los_mass += los;
            running += los + nlos;
            cdf.push(running);
        }
        let total_mass = running;
        if !(total_mass > 0.0) {
            return Err(Error::Degenerate("serving-distance law has no mass".into()));
        }
        for c in &mut cdf {
            *c /= total_mass;
        }
        for f in &mut pdf {
            *f /= total_mass;
        }
        Ok(ServingDistanceLaw {
            grid,
            cdf,
            pdf,
            total_mass,
            los_mass: los_mass / total_mass,
        })
    }

    /// Mass captured below the truncation radius before normalisation.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Probability that the serving link is LOS.
    pub fn los_fraction(&self) -> f64 {
        self.los_mass
    }

    pub fn upper(&self) -> f64 {
        *self.grid.last().expect("grid is non-empty")
    }

    fn cell_of(&self, r: f64) -> usize {
        match self.grid.binary_search_by(|g| g.total_cmp(&r)) {
            Ok(j) => j.min(self.grid.len() - 2),
            Err(j) => j.saturating_sub(1).min(self.grid.len() - 2),
        }
    }

    fn hermite(&self, j: usize, r: f64) -> f64 {
        let (a, b) = (self.grid[j], self.grid[j + 1]);
        let h = b - a;
        let t = (r - a) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * self.cdf[j]
            + (t3 - 2.0 * t2 + t) * h * self.pdf[j]
            + (-2.0 * t3 + 3.0 * t2) * self.cdf[j + 1]
            + (t3 - t2) * h * self.pdf[j + 1];
        v.clamp(self.cdf[j], self.cdf[j + 1])
    }

    pub fn cdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if r >= self.upper() {
            return 1.0;
        }
        self.hermite(self.cell_of(r), r)
    }

    /// Inverse-CDF draw of a serving distance.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let j = match self.cdf.binary_search_by(|c| c.total_cmp(&u)) {
            Ok(j) => j.min(self.grid.len() - 2),
            Err(j) => j.saturating_sub(1).min(self.grid.len() - 2),
        };
        let (mut lo, mut hi) = (self.grid[j], self.grid[j + 1]);
        for _ in 0..48 {
            let mid = 0.5 * (lo + hi);
            if self.hermite(j, mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let r = 0.5 * (lo + hi);
        // Zero-length links have no path loss; nudge off the singularity.
        if r > 0.0 {
            r
        } else {
            self.grid[1] * 1e-6
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::intensity_from_r0;
    use crate::quadrature::integrate;
    use approx::assert_relative_eq;

    fn quad(lambda: f64) -> QuadratureSpec {
        QuadratureSpec::for_intensity(lambda)
    }

    /// Closed form of `∫_0^z e^{-r/μ} r dr`, derived by parts.
    fn exp_los_moment(z: f64, mu: f64) -> f64 {
        mu * mu * (1.0 - (-z / mu).exp() * (1.0 + z / mu))
    }

    /// `∫_0^z (1 - e^{-r/μ}) r dr`; power series near zero where the closed
    /// form cancels.
    fn exp_nlos_moment(z: f64, mu: f64) -> f64 {
        let x = z / mu;
        if x > 1.0 {
            return z * z / 2.0 - exp_los_moment(z, mu);
        }
        let mut term = x * x / 2.0;
        let mut sum = 0.0;
        for n in 3..40 {
            term *= -x / n as f64;
            sum -= term * (n - 1) as f64;
        }
        mu * mu * sum
    }

    #[test]
    fn moment_matches_closed_form() {
        let b = BlockageModel::Exponential { mu: 141.4 };
        let tol = Tolerance::new(1e-10, 1e-14);
        for z in [0.5, 10.0, 141.4, 1000.0, 2.5e7] {
            let los = blockage_moment(z, LinkState::Los, &b, &tol).unwrap();
            let nlos = blockage_moment(z, LinkState::Nlos, &b, &tol).unwrap();
            assert_relative_eq!(los.value, exp_los_moment(z, 141.4), max_relative = 1e-9);
            assert_relative_eq!(nlos.value, exp_nlos_moment(z, 141.4), max_relative = 1e-9);
        }
        let ball = BlockageModel::LosBall { radius: 50.0 };
        let m = blockage_moment(80.0, LinkState::Los, &ball, &tol).unwrap();
        assert_relative_eq!(m.value, 1250.0, max_relative = 1e-12);
    }

    #[test]
    fn no_blockage_gives_rayleigh_law() {
        let lambda = intensity_from_r0(100.0);
        let b = BlockageModel::Constant { p: 1.0 };
        for z in [1.0, 50.0, 100.0, 300.0] {
            let f = nearest_distance_pdf(z, LinkState::Los, lambda, &b, &quad(lambda)).unwrap();
            let expected = 2.0 * PI * lambda * z * (-PI * lambda * z * z).exp();
            assert_relative_eq!(f.value, expected, max_relative = 1e-10);
            assert_eq!(
                nearest_distance_pdf(z, LinkState::Nlos, lambda, &b, &quad(lambda))
                    .unwrap()
                    .value,
                0.0
            );
        }
        // median of the Rayleigh law: sqrt(ln 2 / (π λ))
        let median = (std::f64::consts::LN_2 / (PI * lambda)).sqrt();
        let tol = Tolerance::new(1e-10, 1e-14);
        let half = integrate(
            |z| {
                nearest_distance_pdf(z, LinkState::Los, lambda, &b, &quad(lambda))
                    .unwrap()
                    .value
            },
            0.0,
            median,
            &tol,
        )
        .unwrap();
        assert_relative_eq!(half.value, 0.5, max_relative = 1e-8);
    }

    #[test]
    fn nearest_los_total_mass_matches_null_probability() {
        let mu = 141.4;
        let b = BlockageModel::Exponential { mu };
        for r0 in [100.0, 200.0] {
            let lambda = intensity_from_r0(r0);
            let q = quad(lambda);
            let points = geometric_breakpoints(0.0, 40.0 * mu, mu);
            let mass = integrate_with_breakpoints(
                |z| nearest_distance_pdf(z, LinkState::Los, lambda, &b, &q).unwrap().value,
                &points,
                &q.tolerance(),
            )
            .unwrap();
            let expected = 1.0 - (-2.0 * PI * lambda * mu * mu).exp();
            assert_relative_eq!(mass.value, expected, max_relative = 1e-6);
        }
    }

    #[test]
    fn serving_law_without_blockage_is_rayleigh() {
        let lambda = intensity_from_r0(100.0);
        let ch = ChannelParams {
            blockage: BlockageModel::Constant { p: 1.0 },
            ..ChannelParams::default()
        };
        let q = quad(lambda);
        for r in [5.0, 80.0, 250.0] {
            let los = serving_distance_pdf(r, LinkState::Los, lambda, &ch, &q).unwrap().value;
            assert_relative_eq!(
                los,
                2.0 * PI * lambda * r * (-PI * lambda * r * r).exp(),
                max_relative = 1e-10
            );
            assert_eq!(
                serving_distance_pdf(r, LinkState::Nlos, lambda, &ch, &q).unwrap().value,
                0.0
            );
        }
        let total = serving_state_probability(LinkState::Los, lambda, &ch, &q).unwrap();
        assert_relative_eq!(total.value, 1.0, max_relative = 1e-8);
    }

    #[test]
    fn serving_law_integrates_to_one_with_exponential_blockage() {
        let ch = ChannelParams::default();
        for r0 in [100.0, 200.0] {
            let lambda = intensity_from_r0(r0);
            let q = quad(lambda);
            let los = serving_state_probability(LinkState::Los, lambda, &ch, &q)
                .unwrap()
                .value;
            let nlos = serving_state_probability(LinkState::Nlos, lambda, &ch, &q)
                .unwrap()
                .value;
            assert!((los + nlos - 1.0).abs() < 1e-3, "r0 {r0}: {los} + {nlos}");
            assert!(nlos > 0.0 && los > 0.0);
        }
    }

    #[test]
    fn serving_pdf_rejects_zero_distance() {
        let lambda = intensity_from_r0(100.0);
        let ch = ChannelParams::default();
        assert!(serving_distance_pdf(0.0, LinkState::Los, lambda, &ch, &quad(lambda)).is_err());
        assert!(nearest_distance_pdf(-1.0, LinkState::Los, lambda, &ch.blockage, &quad(lambda)).is_err());
    }

    #[test]
    fn tabulated_law_matches_direct_quadrature() {
        let lambda = intensity_from_r0(100.0);
        let ch = ChannelParams::default();
        let q = quad(lambda);
        let law = ServingDistanceLaw::new(lambda, &ch, &q).unwrap();
        assert!((law.total_mass() - 1.0).abs() < 1e-3);
        let tol = q.tolerance();
        for r in [3.0, 20.0, 75.0, 160.0, 400.0] {
            let points = serving_breakpoints(lambda, &ch, r);
            let los = integrate_pdf(&points, &tol, |x| {
                serving_pdf_unchecked(x, LinkState::Los, lambda, &ch, &tol)
            })
            .unwrap()
            .value;
            let nlos = integrate_pdf(&points, &tol, |x| {
                serving_pdf_unchecked(x, LinkState::Nlos, lambda, &ch, &tol)
            })
            .unwrap()
            .value;
            let direct = (los + nlos) / law.total_mass();
            assert!((law.cdf(r) - direct).abs() < 1e-7, "r {r}: {} vs {direct}", law.cdf(r));
        }
    }
}
