//! Pinball (quantile) loss, its multi-output aggregation over a forecast
//! matrix, and the Huber-smoothed variant used as the training objective.
//!
//! Evaluation and reporting always use the exact pinball loss; the smoothed
//! form exists only because the exact loss is not differentiable at a
//! perfect prediction.

use crate::types::QuantileMatrix;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("quantile level {0} must lie strictly inside (0,1)")]
    InvalidQuantile(f64),
    #[error("Huber smoothing threshold must be positive, got {0}")]
    NonPositiveDelta(f64),
    #[error("dimension mismatch: expected {expected} targets, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Smoothing threshold for the Huber-composed pinball loss, expressed in
/// capacity-normalized power units.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HuberConfig {
    pub delta: f64,
}

impl HuberConfig {
    pub fn new(delta: f64) -> Result<Self, LossError> {
        if delta <= 0.0 {
            return Err(LossError::NonPositiveDelta(delta));
        }
        Ok(Self { delta })
    }
}

impl Default for HuberConfig {
    fn default() -> Self {
        Self { delta: 1e-3 }
    }
}

/// The quantile loss: `q * (x - yhat)` when the observation `x` exceeds the
/// forecast `yhat`, `(1 - q) * (yhat - x)` otherwise.
pub fn pinball(q: f64, x: f64, yhat: f64) -> Result<f64, LossError> {
    check_quantile(q)?;
    Ok(pinball_unchecked(q, x, yhat))
}

#[inline]
pub(crate) fn pinball_unchecked(q: f64, x: f64, yhat: f64) -> f64 {
    if x > yhat {
        q * (x - yhat)
    } else {
        (1.0 - q) * (yhat - x)
    }
}

/// The quantile loss summed over every horizon step and quantile level of a
/// forecast matrix, against one target per step.
pub fn multi_output_loss(zm: &QuantileMatrix, targets: &[f64]) -> Result<f64, LossError> {
    if targets.len() != zm.n_steps() {
        return Err(LossError::DimensionMismatch {
            expected: zm.n_steps(),
            got: targets.len(),
        });
    }
    let levels = zm.levels.as_slice();
    let mut total = 0.0;
    for (row, &x) in zm.values().rows().into_iter().zip(targets) {
        for (&q, &yhat) in levels.iter().zip(row) {
            total += pinball_unchecked(q, x, yhat);
        }
    }
    Ok(total)
}

/// Huber composition `h_d(u) = u^2 / (2 d)` for `|u| <= d`, else `|u| - d/2`.
#[inline]
fn huber(u: f64, delta: f64) -> f64 {
    let a = u.abs();
    if a <= delta {
        u * u / (2.0 * delta)
    } else {
        a - delta / 2.0
    }
}

/// Derivative of `huber` with respect to `u`.
#[inline]
fn huber_deriv(u: f64, delta: f64) -> f64 {
    if u.abs() <= delta {
        u / delta
    } else {
        u.signum()
    }
}

/// Smooth approximation of the pinball loss: the asymmetric quantile weights
/// applied to the Huber norm of the error. Continuously differentiable in
/// `yhat`, and within `delta/2` of the exact pinball loss everywhere.
pub fn huber_pinball(q: f64, x: f64, yhat: f64, cfg: HuberConfig) -> Result<f64, LossError> {
    check_quantile(q)?;
    if cfg.delta <= 0.0 {
        return Err(LossError::NonPositiveDelta(cfg.delta));
    }
    Ok(huber_pinball_unchecked(q, x, yhat, cfg.delta))
}

#[inline]
pub(crate) fn huber_pinball_unchecked(q: f64, x: f64, yhat: f64, delta: f64) -> f64 {
    let e = x - yhat;
    if e >= 0.0 {
        q * huber(e, delta)
    } else {
        (1.0 - q) * huber(-e, delta)
    }
}

/// Gradient of `huber_pinball` with respect to the forecast `yhat`.
#[inline]
pub(crate) fn huber_pinball_grad_unchecked(q: f64, x: f64, yhat: f64, delta: f64) -> f64 {
    let e = x - yhat;
    if e >= 0.0 {
        -q * huber_deriv(e, delta)
    } else {
        (1.0 - q) * huber_deriv(-e, delta)
    }
}

fn check_quantile(q: f64) -> Result<(), LossError> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(LossError::InvalidQuantile(q))
    }
}

/// Linear-interpolation empirical quantile of a sample. This is the single
/// quantile convention used by the boosting initializer, leaf refits, the
/// climatology baseline and the test oracles.
pub fn empirical_quantile(sample: &[f64], q: f64) -> f64 {
    assert!(!sample.is_empty(), "empirical quantile of empty sample");
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample value"));
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}
