//! Parameter storage plus full-network forward and backward passes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::arch::{build_arch, ArchDescriptor, ArchName, LayerKind};
use super::layers::{self, BnCache, ConvCache, PoolCache};
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams<T> {
    Conv { weight: Tensor<T>, bias: Tensor<T> },
    BatchNorm { gamma: Tensor<T>, beta: Tensor<T>, running_mean: Tensor<T>, running_var: Tensor<T> },
    Linear { weight: Tensor<T>, bias: Tensor<T> },
    None,
}

/// Weights, biases and batch-norm statistics for one architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T = f32> {
    arch: ArchDescriptor,
    layers: Vec<LayerParams<T>>,
}

pub type ModelParams = Model<f32>;

enum LayerCache<T> {
    Conv(ConvCache<T>),
    Bn(BnCache<T>),
    Relu(Tensor<T>),
    Pool(PoolCache),
    Flatten(Vec<usize>),
    Linear(Tensor<T>),
}

/// Activations saved by [`Model::forward_train`] for the backward pass.
pub struct Trace<T> {
    caches: Vec<LayerCache<T>>,
}

/// Gradients for every trainable tensor, in [`Model::trainable`] order.
pub type Grads<T> = Vec<Tensor<T>>;

fn kaiming_uniform<T: Scalar>(dims: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor<T> {
    let bound = (6.0 / fan_in as f64).sqrt();
    let mut t = Tensor::zeros(dims);
    t.data_mut().iter_mut().for_each(|v| *v = T::from_f64(rng.random_range(-bound..bound)));
    t
}

impl<T: Scalar> Model<T> {
    /// Kaiming-uniform (fan-in) weights, zero biases, unit BN scale.
    pub fn init(arch: ArchDescriptor, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = arch
            .layers
            .iter()
            .map(|l| match l.kind {
                LayerKind::Conv1d { in_ch, out_ch, kernel, .. } => LayerParams::Conv {
                    weight: kaiming_uniform(&[out_ch, in_ch, kernel], in_ch * kernel, &mut rng),
                    bias: Tensor::zeros(&[out_ch]),
                },
                LayerKind::Linear { in_features, out_features } => LayerParams::Linear {
                    weight: kaiming_uniform(&[out_features, in_features], in_features, &mut rng),
                    bias: Tensor::zeros(&[out_features]),
                },
                LayerKind::BatchNorm1d { channels } => LayerParams::BatchNorm {
                    gamma: Tensor::full(&[channels], T::ONE),
                    beta: Tensor::zeros(&[channels]),
                    running_mean: Tensor::zeros(&[channels]),
                    running_var: Tensor::full(&[channels], T::ONE),
                },
                _ => LayerParams::None,
            })
            .collect();
        Model { arch, layers }
    }

    pub fn new(name: ArchName, input_len: usize, seed: u64) -> Result<Self> {
        Ok(Self::init(build_arch(name, input_len)?, seed))
    }

    pub fn arch(&self) -> &ArchDescriptor {
        &self.arch
    }

    pub fn window_len(&self) -> usize {
        self.arch.input_len
    }

    pub fn layers(&self) -> &[LayerParams<T>] {
        &self.layers
    }

    /// Every stored tensor with its checkpoint name, in layer order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (spec, p) in self.arch.layers.iter().zip(&self.layers) {
            let n = &spec.name;
            match p {
                LayerParams::Conv { weight, bias } | LayerParams::Linear { weight, bias } => {
                    out.push((format!("{n}.weight"), weight));
                    out.push((format!("{n}.bias"), bias));
                }
                LayerParams::BatchNorm { gamma, beta, running_mean, running_var } => {
                    out.push((format!("{n}.gamma"), gamma));
                    out.push((format!("{n}.beta"), beta));
                    out.push((format!("{n}.running_mean"), running_mean));
                    out.push((format!("{n}.running_var"), running_var));
                }
                LayerParams::None => {}
            }
        }
        out
    }

    /// Mutable access by checkpoint name.
    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        let (layer, field) = name.split_once('.')?;
        let idx = self.arch.layers.iter().position(|l| l.name == layer)?;
        match (&mut self.layers[idx], field) {
            (LayerParams::Conv { weight, .. } | LayerParams::Linear { weight, .. }, "weight") => Some(weight),
            (LayerParams::Conv { bias, .. } | LayerParams::Linear { bias, .. }, "bias") => Some(bias),
            (LayerParams::BatchNorm { gamma, .. }, "gamma") => Some(gamma),
            (LayerParams::BatchNorm { beta, .. }, "beta") => Some(beta),
            (LayerParams::BatchNorm { running_mean, .. }, "running_mean") => Some(running_mean),
            (LayerParams::BatchNorm { running_var, .. }, "running_var") => Some(running_var),
            _ => None,
        }
    }

    /// Trainable tensors (excludes BN running statistics).
    pub fn trainable(&self) -> Vec<&Tensor<T>> {
        self.layers
            .iter()
            .flat_map(|p| match p {
                LayerParams::Conv { weight, bias } | LayerParams::Linear { weight, bias } => vec![weight, bias],
                LayerParams::BatchNorm { gamma, beta, .. } => vec![gamma, beta],
                LayerParams::None => vec![],
            })
            .collect()
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers
            .iter_mut()
            .flat_map(|p| match p {
                LayerParams::Conv { weight, bias } | LayerParams::Linear { weight, bias } => vec![weight, bias],
                LayerParams::BatchNorm { gamma, beta, .. } => vec![gamma, beta],
                LayerParams::None => vec![],
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.trainable().iter().map(|t| t.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        let layers = self
            .layers
            .iter()
            .map(|p| match p {
                LayerParams::Conv { weight, bias } => LayerParams::Conv { weight: weight.cast(), bias: bias.cast() },
                LayerParams::Linear { weight, bias } => LayerParams::Linear { weight: weight.cast(), bias: bias.cast() },
                LayerParams::BatchNorm { gamma, beta, running_mean, running_var } => LayerParams::BatchNorm {
                    gamma: gamma.cast(),
                    beta: beta.cast(),
                    running_mean: running_mean.cast(),
                    running_var: running_var.cast(),
                },
                LayerParams::None => LayerParams::None,
            })
            .collect();
        Model { arch: self.arch.clone(), layers }
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        match *x.dims() {
            [_, 1, l] if l == self.arch.input_len => Ok(()),
            ref d => Err(Error::ShapeMismatch(format!(
                "{} expects [batch, 1, {}], got {d:?}",
                self.arch.name, self.arch.input_len
            ))),
        }
    }

    /// Inference forward pass (BN uses running statistics). Returns logits `[B, W]`.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mut h = x.clone();
        for (spec, p) in self.arch.layers.iter().zip(&self.layers) {
            h = match (spec.kind, p) {
                (LayerKind::Conv1d { stride, padding, .. }, LayerParams::Conv { weight, bias }) => {
                    layers::conv1d_forward(&h, weight, bias, stride, padding)?.0
                }
                (LayerKind::BatchNorm1d { .. }, LayerParams::BatchNorm { gamma, beta, running_mean, running_var }) => {
                    layers::batchnorm1d_eval(&h, gamma, beta, running_mean, running_var)?
                }
                (LayerKind::Relu, _) => layers::relu_forward(&h),
                (LayerKind::MaxPool1d { kernel, stride }, _) => layers::maxpool1d_forward(&h, kernel, stride)?.0,
                (LayerKind::Flatten, _) => {
                    let b = h.dims()[0];
                    let f = h.len() / b;
                    h.reshape(&[b, f])?
                }
                (LayerKind::Linear { .. }, LayerParams::Linear { weight, bias }) => layers::fc_forward(&h, weight, bias)?,
                _ => unreachable!("parameters always follow the descriptor"),
            };
        }
        Ok(h)
    }

    /// Training forward pass: BN uses batch statistics and updates its
    /// running estimates.
    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, Trace<T>)> {
        self.check_input(x)?;
        let mut h = x.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for (spec, p) in self.arch.layers.iter().zip(self.layers.iter_mut()) {
            let (next, cache) = match (spec.kind, p) {
                (LayerKind::Conv1d { stride, padding, .. }, LayerParams::Conv { weight, bias }) => {
                    let (y, c) = layers::conv1d_forward(&h, weight, bias, stride, padding)?;
                    (y, LayerCache::Conv(c))
                }
                (LayerKind::BatchNorm1d { .. }, LayerParams::BatchNorm { gamma, beta, running_mean, running_var }) => {
                    let (y, c) = layers::batchnorm1d_train(&h, gamma, beta, running_mean, running_var)?;
                    (y, LayerCache::Bn(c))
                }
                (LayerKind::Relu, _) => {
                    let y = layers::relu_forward(&h);
                    (y.clone(), LayerCache::Relu(y))
                }
                (LayerKind::MaxPool1d { kernel, stride }, _) => {
                    let (y, c) = layers::maxpool1d_forward(&h, kernel, stride)?;
                    (y, LayerCache::Pool(c))
                }
                (LayerKind::Flatten, _) => {
                    let dims = h.dims().to_vec();
                    let b = dims[0];
                    let f = h.len() / b;
                    (h.reshape(&[b, f])?, LayerCache::Flatten(dims))
                }
                (LayerKind::Linear { .. }, LayerParams::Linear { weight, bias }) => {
                    let y = layers::fc_forward(&h, weight, bias)?;
                    (y, LayerCache::Linear(h))
                }
                _ => unreachable!("parameters always follow the descriptor"),
            };
            caches.push(cache);
            h = next;
        }
        Ok((h, Trace { caches }))
    }

    /// Backpropagates `dlogits` through a trace from [`Model::forward_train`].
    pub fn backward(&self, trace: Trace<T>, dlogits: &Tensor<T>) -> Result<Grads<T>> {
        let mut grads: Vec<Vec<Tensor<T>>> = Vec::with_capacity(self.layers.len());
        let mut g = dlogits.clone();
        for ((spec, p), cache) in self.arch.layers.iter().zip(&self.layers).zip(trace.caches).rev() {
            let layer_grads = match (spec.kind, p, cache) {
                (LayerKind::Conv1d { stride, padding, .. }, LayerParams::Conv { weight, .. }, LayerCache::Conv(c)) => {
                    let r = layers::conv1d_backward(&g, weight, &c, stride, padding)?;
                    g = r.dx;
                    vec![r.dweight, r.dbias]
                }
                (LayerKind::BatchNorm1d { .. }, LayerParams::BatchNorm { gamma, .. }, LayerCache::Bn(c)) => {
                    let r = layers::batchnorm1d_backward(&g, gamma, &c)?;
                    g = r.dx;
                    vec![r.dgamma, r.dbeta]
                }
                (LayerKind::Relu, _, LayerCache::Relu(y)) => {
                    g = layers::relu_backward(&g, &y);
                    vec![]
                }
                (LayerKind::MaxPool1d { .. }, _, LayerCache::Pool(c)) => {
                    g = layers::maxpool1d_backward(&g, &c)?;
                    vec![]
                }
                (LayerKind::Flatten, _, LayerCache::Flatten(dims)) => {
                    g = g.reshape(&dims)?;
                    vec![]
                }
                (LayerKind::Linear { .. }, LayerParams::Linear { weight, .. }, LayerCache::Linear(x)) => {
                    let r = layers::fc_backward(&g, &x, weight)?;
                    g = r.dx;
                    vec![r.dweight, r.dbias]
                }
                _ => return Err(Error::ShapeMismatch("trace does not belong to this model".into())),
            };
            grads.push(layer_grads);
        }
        Ok(grads.into_iter().rev().flatten().collect())
    }

    /// Sigmoid probabilities, `[B][W]`, from the inference pass.
    pub fn predict_proba(&self, x: &Tensor<T>) -> Result<Vec<Vec<f64>>> {
        let logits = self.forward(x)?;
        let w = self.arch.input_len;
        Ok(logits.data().chunks_exact(w).map(|row| row.iter().map(|z| layers::sigmoid(z.to_f64())).collect()).collect())
    }
}

/// Stacks equal-length windows into a `[B, 1, W]` batch.
pub fn batch_from_windows<T: Scalar, S: AsRef<[f64]>>(windows: &[S]) -> Result<Tensor<T>> {
    let w = windows.first().map(|s| s.as_ref().len()).unwrap_or(0);
    if windows.iter().any(|s| s.as_ref().len() != w) {
        return Err(Error::ShapeMismatch("windows in a batch must share one length".into()));
    }
    let data = windows.iter().flat_map(|s| s.as_ref().iter().map(|&v| T::from_f64(v))).collect();
    Tensor::new(vec![windows.len(), 1, w], data)
}
