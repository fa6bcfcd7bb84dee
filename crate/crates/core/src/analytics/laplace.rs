use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::distance::integrate_pdf;
use super::QuadratureSpec;
use crate::channel::{beam_gain_pmf, pow_fast, BeamParams, ChannelParams, GainPmf, LinkState};
use crate::error::ensure_at_least;
use crate::quadrature::{geometric_breakpoints, Estimate, Tolerance};
use crate::{Error, Result};

/// `E_{h,G}[exp(-s β h G r^{-α})]` under unit-mean exponential fading.
pub fn gain_moment(
    s: f64,
    r: f64,
    k: usize,
    state: LinkState,
    channel: &ChannelParams,
    beam: &BeamParams,
) -> Result<f64> {
    ensure_at_least("s", s, 0.0)?;
    if !(r > 0.0) {
        return Err(Error::invalid("r", format!("{r} must be positive")));
    }
    channel.validate()?;
    let pmf = beam_gain_pmf(beam, k)?;
    Ok(1.0 - one_minus_gain_moment(s, r, state, channel, &pmf))
}

/// `1 - G(s, r)` evaluated without cancellation.
#[inline]
pub(crate) fn one_minus_gain_moment(s: f64, r: f64, state: LinkState, channel: &ChannelParams, pmf: &GainPmf) -> f64 {
    let base = s * channel.beta / pow_fast(r, channel.exponent(state));
    pmf.atoms
        .iter()
        .map(|&(g, p)| {
            let t = base * g;
            if t.is_infinite() {
                p
            } else {
                p * t / (1.0 + t)
            }
        })
        .sum()
}

/// Laplace transform of the interference plus a bound on what truncating
/// the radial integrals can have changed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceValue {
    pub value: f64,
    pub error: f64,
    pub tail_bound: f64,
}

fn laplace_breakpoints(lower: f64, upper: f64, channel: &ChannelParams) -> Vec<f64> {
    let mut points = geometric_breakpoints(lower, upper, lower.max(1e-3));
    if let Some(edge) = channel.blockage.discontinuities() {
        if edge > lower && edge < upper {
            points.push(edge);
            points.sort_by(f64::total_cmp);
        }
    }
    points
}

/// One exponent `2πλ ∫_lower^R (1 - G_state) P_state(r) r dr`.
#[allow(clippy::too_many_arguments)]
fn interferer_exponent(
    s: f64,
    lower: f64,
    state: LinkState,
    lambda: f64,
    channel: &ChannelParams,
    pmf: &GainPmf,
    quad: &QuadratureSpec,
    tol: &Tolerance,
) -> Result<(Estimate, f64)> {
    let upper = quad.truncation_radius;
    let g_max = pmf
        .atoms
        .iter()
        .filter(|(_, p)| *p > 0.0)
        .map(|(g, _)| *g)
        .fold(0.0, f64::max);
    let alpha = channel.exponent(state);
    let tail_radius = upper.max(lower);
    let tail = if s == 0.0 || g_max == 0.0 {
        0.0
    } else {
        2.0 * PI * lambda * s * channel.beta * g_max * channel.blockage.tail_bound(tail_radius, alpha, state)
    };
    if lower >= upper || s == 0.0 {
        return Ok((Estimate::ZERO, tail));
    }
    let points = laplace_breakpoints(lower, upper, channel);
    let integral = integrate_pdf(&points, tol, |r| {
        Ok(Estimate::exact(
            one_minus_gain_moment(s, r, state, channel, pmf) * channel.blockage.p_state(r, state) * r,
        ))
    })?;
    Ok((integral.scaled(2.0 * PI * lambda), tail))
}

/// Interference Laplace transform at the typical receiver given a serving AP
/// at distance `serving_distance` in `serving_state`.
///
/// Same-state interferers start at the serving distance; the other state
/// starts at the equal-power exclusion radius.
#[allow(clippy::too_many_arguments)]
pub fn laplace_interference(
    s: f64,
    serving_distance: f64,
    serving_state: LinkState,
    k: usize,
    lambda0: f64,
    channel: &ChannelParams,
    beam: &BeamParams,
    quad: &QuadratureSpec,
) -> Result<LaplaceValue> {
    ensure_at_least("s", s, 0.0)?;
    if !(serving_distance > 0.0) {
        return Err(Error::invalid("serving_distance", "must be positive"));
    }
    ensure_at_least("lambda0", lambda0, 0.0)?;
    channel.validate()?;
    quad.validate()?;
    let pmf = beam_gain_pmf(beam, k)?;
    laplace_unchecked(s, serving_distance, serving_state, lambda0, channel, &pmf, quad)
}

pub(crate) fn laplace_unchecked(
    s: f64,
    serving_distance: f64,
    serving_state: LinkState,
    lambda0: f64,
    channel: &ChannelParams,
    pmf: &GainPmf,
    quad: &QuadratureSpec,
) -> Result<LaplaceValue> {
    if lambda0 == 0.0 || s == 0.0 {
        return Ok(LaplaceValue {
            value: 1.0,
            error: 0.0,
            tail_bound: 0.0,
        });
    }
    let tol = quad.tolerance();
    let same_lower = serving_distance;
    let other_lower = channel.exclusion_radius(serving_distance, serving_state);
    let (same, tail_same) = interferer_exponent(s, same_lower, serving_state, lambda0, channel, pmf, quad, &tol)?;
    let (other, tail_other) =
        interferer_exponent(s, other_lower, serving_state.other(), lambda0, channel, pmf, quad, &tol)?;
    let exponent = same.plus(other);
    let value = (-exponent.value).exp();
    let tail = tail_same + tail_other;
    Ok(LaplaceValue {
        value,
        error: value * exponent.error,
        tail_bound: if tail.is_finite() {
            value * (1.0 - (-tail).exp())
        } else {
            value
        },
    })
}
