use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature did not converge on [{lower}, {upper}]: value {value:e}, error estimate {error:e}")]
    Quadrature {
        lower: f64,
        upper: f64,
        value: f64,
        error: f64,
    },

    #[error("infeasible density split: {0}")]
    Infeasible(String),

    #[error("weight forms disagree at r = {radius}: simplified {simplified:e}, literal {literal:e}")]
    WeightMismatch { radius: f64, simplified: f64, literal: f64 },

    #[error("observation window too small: {0}")]
    WindowTooSmall(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

/// Rejects NaN and values below `min`.
pub(crate) fn ensure_at_least(name: &'static str, value: f64, min: f64) -> Result<()> {
    if value.is_nan() || value < min {
        return Err(Error::invalid(name, format!("{value} < {min}")));
    }
    Ok(())
}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::invalid(name, format!("{value} is not a positive finite number")));
    }
    Ok(())
}
