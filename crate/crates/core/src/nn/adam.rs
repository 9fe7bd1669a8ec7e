use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.eps > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && self.beta1 > 0.0
            && (0.0..1.0).contains(&self.beta2)
            && self.beta2 > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidTrainConfig(format!("invalid Adam settings {self:?}")))
        }
    }
}

/// Bias-corrected Adam with per-parameter moments kept in `f64`.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step_count: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(AdamState { config, step_count: 0, first: Vec::new(), second: Vec::new() })
    }

    pub fn step<T: Scalar>(&mut self, params: Vec<&mut Tensor<T>>, grads: &[Tensor<T>]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::ShapeMismatch(format!("adam: {} params vs {} grads", params.len(), grads.len())));
        }
        if self.first.is_empty() {
            self.first = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.second = self.first.clone();
        }
        if self.first.len() != params.len() {
            return Err(Error::ShapeMismatch("adam: parameter set changed between steps".into()));
        }
        self.step_count += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step_count as i32);
        let bc2 = 1.0 - beta2.powi(self.step_count as i32);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.first).zip(&mut self.second) {
            if p.dims() != g.dims() {
                return Err(Error::ShapeMismatch(format!("adam: param {:?} vs grad {:?}", p.dims(), g.dims())));
            }
            for (((w, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                let gi = gi.to_f64();
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let update = lr * (*mi / bc1) / ((*vi / bc2).sqrt() + eps);
                *w = T::from_f64(w.to_f64() - update);
            }
        }
        Ok(())
    }
}
