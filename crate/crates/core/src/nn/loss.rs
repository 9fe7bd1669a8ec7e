//! Binary cross-entropy on logits with soft targets.

use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Per-element loss `-[y log p + (1 - y) log(1 - p)]` with `p = sigmoid(z)`,
/// in the overflow-free form `max(z, 0) - z y + ln(1 + e^{-|z|})`.
pub fn bce_with_logits_elem(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

/// Mean BCE over every element and its gradient with respect to the logits.
pub fn bce_loss<T: Scalar>(logits: &Tensor<T>, targets: &[f64]) -> Result<(f64, Tensor<T>)> {
    if logits.len() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "bce: {} logits vs {} targets",
            logits.len(),
            targets.len()
        )));
    }
    let n = targets.len() as f64;
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(logits.dims());
    for ((g, z), &y) in grad.data_mut().iter_mut().zip(logits.data()).zip(targets) {
        let z = z.to_f64();
        loss += bce_with_logits_elem(z, y);
        *g = T::from_f64((super::layers::sigmoid(z) - y) / n);
    }
    Ok((loss / n, grad))
}
