//! Cosine learning-rate schedule, no warmup.

use crate::{Error, Result};

/// `lr = 0.5 * base * (1 + cos(pi * step / total))`.
pub fn cosine_lr(step: usize, total: usize, base: f64) -> Result<f64> {
    if total == 0 {
        return Err(Error::Input("schedule total steps must be >= 1".into()));
    }
    if step > total {
        return Err(Error::Input(format!("step {step} beyond schedule total {total}")));
    }
    let frac = step as f64 / total as f64;
    Ok(0.5 * base * (1.0 + (std::f64::consts::PI * frac).cos()))
}
