//! Numerical evaluation of the tiered-network results: serving-distance laws,
//! interference Laplace transforms, SINR coverage, latency and throughput.
//!
//! Every semi-infinite integral is truncated at
//! [`QuadratureSpec::truncation_radius`]; the reported tail bounds say how much
//! mass the truncation can have dropped.

mod coverage;
mod distance;
mod laplace;
mod network;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::ensure_positive;
use crate::quadrature::Tolerance;
use crate::{Error, Result};

pub use coverage::{conditional_coverage, coverage_probability, literal_weight, CoverageValue};
pub use distance::{
    blockage_moment, nearest_distance_pdf, serving_distance_pdf, serving_state_probability, ServingDistanceLaw,
};
pub use laplace::{gain_moment, laplace_interference, LaplaceValue};
pub use network::{
    evaluate_point, hop_count, latency_bounds, optimal_gain, optimal_gain_by, throughput, throughput_from_coverage,
    CoverageResult, HopCount, HopPolicy, NetworkParams,
};

/// Default multiple of `r0` used as the upper limit of radial integrals.
pub const DEFAULT_TRUNCATION_FACTOR: f64 = 50.0;

/// `r0 = sqrt(1 / (π λ))`, the radius of the disk holding one point on average.
pub fn r0_from_intensity(lambda: f64) -> f64 {
    (1.0 / (PI * lambda)).sqrt()
}

pub fn intensity_from_r0(r0: f64) -> f64 {
    1.0 / (PI * r0 * r0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Finite upper limit standing in for ∞ (meters).
    pub truncation_radius: f64,
}

impl QuadratureSpec {
    pub fn new(rel_tol: f64, abs_tol: f64, truncation_radius: f64) -> Result<Self> {
        let spec = QuadratureSpec {
            rel_tol,
            abs_tol,
            truncation_radius,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Default tolerances with the truncation radius at 50 r0.
    pub fn for_intensity(lambda0: f64) -> Self {
        QuadratureSpec {
            rel_tol: 1e-6,
            abs_tol: 1e-9,
            truncation_radius: DEFAULT_TRUNCATION_FACTOR * r0_from_intensity(lambda0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("rel_tol", self.rel_tol)?;
        ensure_positive("abs_tol", self.abs_tol)?;
        ensure_positive("truncation_radius", self.truncation_radius)
    }

    pub fn tolerance(&self) -> Tolerance {
        Tolerance::new(self.rel_tol, self.abs_tol)
    }
}

fn ensure_intensity(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(
            "lambda",
            format!("{lambda} is not a positive intensity"),
        ));
    }
    Ok(())
}
