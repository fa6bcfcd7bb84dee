use std::cell::Cell;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::distance::{integrate_pdf, nearest_pdf_unchecked, serving_breakpoints, serving_pdf_unchecked};
use super::laplace::laplace_unchecked;
use super::{ensure_intensity, r0_from_intensity, QuadratureSpec};
use crate::channel::{beam_gain_pmf, pow_fast, BeamParams, ChannelParams, GainPmf, LinkState};
use crate::quadrature::{Estimate, Tolerance};
use crate::{Error, Result};

/// A coverage probability with its quadrature error and truncation bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageValue {
    pub value: f64,
    pub error: f64,
    pub tail_bound: f64,
}

fn ensure_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0) || tau.is_infinite() {
        return Err(Error::invalid(
            "tau",
            format!("{tau} must be a positive finite threshold"),
        ));
    }
    Ok(())
}

/// `P(SINR > τ | serving AP at distance r in state)`: the noise factor times
/// the interference Laplace transform at `s = r^α τ / (G_A² β)`.
#[allow(clippy::too_many_arguments)]
pub fn conditional_coverage(
    tau: f64,
    r: f64,
    k: usize,
    state: LinkState,
    lambda0: f64,
    channel: &ChannelParams,
    beam: &BeamParams,
    quad: &QuadratureSpec,
) -> Result<CoverageValue> {
    ensure_tau(tau)?;
    if !(r > 0.0) {
        return Err(Error::invalid("r", format!("{r} must be positive")));
    }
    if !(lambda0 >= 0.0) {
        return Err(Error::invalid("lambda0", "must be non-negative"));
    }
    channel.validate()?;
    quad.validate()?;
    let pmf = beam_gain_pmf(beam, k)?;
    conditional_unchecked(tau, r, state, lambda0, channel, beam, &pmf, quad)
}

#[allow(clippy::too_many_arguments)]
fn conditional_unchecked(
    tau: f64,
    r: f64,
    state: LinkState,
    lambda0: f64,
    channel: &ChannelParams,
    beam: &BeamParams,
    pmf: &GainPmf,
    quad: &QuadratureSpec,
) -> Result<CoverageValue> {
    let s = pow_fast(r, channel.exponent(state)) * tau / (beam.g_main * beam.g_main * channel.beta);
    let noise = (-s * channel.noise_power).exp();
    let laplace = laplace_unchecked(s, r, state, lambda0, channel, pmf, quad)?;
    Ok(CoverageValue {
        value: noise * laplace.value,
        error: noise * laplace.error,
        tail_bound: noise * laplace.tail_bound,
    })
}

/// The outer weight in its printed form,
/// `f_s(r) f_o(r') / (2π r' λ P_o(r'))` with `r'` the exclusion radius for the
/// other state `o`. Returns `None` where `P_o(r')` is below `eps` and the
/// ratio is numerically meaningless.
pub fn literal_weight(
    r: f64,
    state: LinkState,
    lambda: f64,
    channel: &ChannelParams,
    quad: &QuadratureSpec,
    eps: f64,
) -> Result<Option<f64>> {
    ensure_intensity(lambda)?;
    channel.validate()?;
    let tol = quad.tolerance();
    let excl = channel.exclusion_radius(r, state);
    let other = state.other();
    let p_other = channel.blockage.p_state(excl, other);
    if p_other <= eps || excl <= 0.0 {
        return Ok(None);
    }
    let own = nearest_pdf_unchecked(r, state, lambda, &channel.blockage, &tol)?.value;
    let cross = nearest_pdf_unchecked(excl, other, lambda, &channel.blockage, &tol)?.value;
    if cross == 0.0 {
        // exp underflow: the void probability is below f64 range either way.
        return Ok(None);
    }
    Ok(Some(own * cross / (2.0 * PI * excl * lambda * p_other)))
}

fn check_weight_forms(lambda: f64, channel: &ChannelParams, quad: &QuadratureSpec) -> Result<()> {
    let tol: Tolerance = quad.tolerance();
    let r0 = r0_from_intensity(lambda);
    for j in -4..=4 {
        let r = r0 * 2f64.powi(j);
        if r >= quad.truncation_radius {
            continue;
        }
        for state in [LinkState::Los, LinkState::Nlos] {
            let Some(literal) = literal_weight(r, state, lambda, channel, quad, 1e-6)? else {
                continue;
            };
            let simplified = serving_pdf_unchecked(r, state, lambda, channel, &tol)?.value;
            let scale = literal.abs().max(simplified.abs());
            if scale > 1e-300 && (literal - simplified).abs() > 100.0 * quad.rel_tol * scale {
                return Err(Error::WeightMismatch {
                    radius: r,
                    simplified,
                    literal,
                });
            }
        }
    }
    Ok(())
}

/// SINR coverage probability of a typical receiver at hop `i+1` when every
/// transmitter serves `k` streams.
///
/// The outer weights use the simplified form `f_s(r) exp(-2πλ ∫_0^{r'} P_o)`,
/// which avoids the 0/0 of the printed ratio wherever `P_o` vanishes. Both
/// forms are compared at a handful of radii before integrating.
pub fn coverage_probability(
    tau: f64,
    k: usize,
    lambda0: f64,
    channel: &ChannelParams,
    beam: &BeamParams,
    quad: &QuadratureSpec,
) -> Result<CoverageValue> {
    ensure_tau(tau)?;
    ensure_intensity(lambda0)?;
    channel.validate()?;
    quad.validate()?;
    let pmf = beam_gain_pmf(beam, k)?;
    check_weight_forms(lambda0, channel, quad)?;

    let tol = quad.tolerance();
    let points = serving_breakpoints(lambda0, channel, quad.truncation_radius);
    let mut total = Estimate::ZERO;
    let mut tail = 0.0f64;
    for state in [LinkState::Los, LinkState::Nlos] {
        let worst_tail = Cell::new(0.0f64);
        let branch = integrate_pdf(&points, &tol, |r| {
            let w = serving_pdf_unchecked(r, state, lambda0, channel, &tol)?;
            if w.value == 0.0 {
                return Ok(Estimate::ZERO);
            }
            let c = conditional_unchecked(tau, r, state, lambda0, channel, beam, &pmf, quad)?;
            worst_tail.set(worst_tail.get().max(c.tail_bound));
            Ok(w.times(Estimate {
                value: c.value,
                error: c.error,
            }))
        })?;
        total = total.plus(branch);
        tail = tail.max(worst_tail.get());
    }
    Ok(CoverageValue {
        value: total.value.clamp(0.0, 1.0),
        error: total.error,
        tail_bound: tail,
    })
}
