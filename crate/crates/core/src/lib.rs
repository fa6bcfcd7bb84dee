//! Tiered point-process models of ultra-dense multihop mmWave access-point
//! networks.
//!
//! The crate is organised around five pieces:
//!
//! - [`geometry`]: PPP / Neyman-Scott sampling and the tiered topology builder,
//!   plus Ripley's K for spatial statistics.
//! - [`channel`]: blockage, path loss, Rayleigh fading and the sectored
//!   beam-gain distribution.
//! - [`analytics`]: serving-distance laws, interference Laplace transforms,
//!   SINR coverage, latency and throughput.
//! - [`montecarlo`]: the brute-force simulator used as an independent oracle
//!   for everything in [`analytics`].
//! - [`quadrature`] and [`stats`]: numerical and statistical plumbing.
//!
//! Monte Carlo loops run on rayon when the `parallel` feature is enabled
//! (the default) and fall back to plain iterators otherwise. Results are
//! bitwise identical either way because every trial owns a counter-derived
//! random stream (see [`rng`]).

pub mod analytics;
pub mod channel;
mod error;
pub mod geometry;
pub mod montecarlo;
pub mod par;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
