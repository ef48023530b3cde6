//! Reconstruction quality metrics and the pixel mapping.
//!
//! Signals live in `[-1, 1]`; 8-bit pixels map through
//! `v -> 2 v / 255 - 1`, and back by rounding half away from zero after
//! clamping. The reconstruction error is the per-entry mean squared error
//! in signal units.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per-entry mean squared error between two equally shaped tensors.
pub fn mse(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            "mse",
            format!("{:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    if a.is_empty() {
        return Err(Error::invalid("mse", "empty tensors"));
    }
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.len() as f64)
}

/// 8-bit pixel to signal value in `[-1, 1]`.
pub fn pixel_to_signal(v: u8) -> f64 {
    2.0 * v as f64 / 255.0 - 1.0
}

/// Signal value to 8-bit pixel: clamp to `[-1, 1]`, then round half away
/// from zero.
pub fn signal_to_pixel(v: f64) -> u8 {
    let clamped = v.clamp(-1.0, 1.0);
    ((clamped + 1.0) * 255.0 / 2.0).round() as u8
}
