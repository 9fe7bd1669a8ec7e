//! Central finite-difference checks of the analytic gradients, run in `f64`.
//!
//! Each check builds a random scalar loss `L = sum(r * layer(x))` with a
//! fixed random projection `r`, perturbs every input and parameter entry by
//! `+-h`, and compares the difference quotient with the backward pass.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::layers;
use super::loss::bce_loss;
use super::model::{batch_from_windows, Model};
use super::tensor::Tensor;
use super::ArchName;
use crate::error::Result;

pub const STEP: f64 = 1e-4;
/// Denominator floor for the element-wise relative error.
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR))
        .fold(0.0, f64::max)
}

/// Central differences of `f` with respect to every entry of `x`.
pub fn numeric_gradient(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + STEP;
            let up = f(&probe);
            probe[i] = orig - STEP;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * STEP)
        })
        .collect()
}

fn randn(rng: &mut ChaCha8Rng, dims: &[usize]) -> Tensor<f64> {
    let n = dims.iter().product();
    Tensor::new(dims.to_vec(), (0..n).map(|_| rng.sample(StandardNormal)).collect()).expect("valid dims")
}

fn with_data(t: &Tensor<f64>, data: &[f64]) -> Tensor<f64> {
    Tensor::new(t.dims().to_vec(), data.to_vec()).expect("same dims")
}

fn project(y: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

/// Worst relative error across input, weight and bias gradients.
pub fn check_conv1d(seed: u64, batch: usize, in_ch: usize, out_ch: usize, len: usize, kernel: usize, stride: usize, padding: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = randn(&mut rng, &[batch, in_ch, len]);
    let w = randn(&mut rng, &[out_ch, in_ch, kernel]);
    let b = randn(&mut rng, &[out_ch]);
    let (y, cache) = layers::conv1d_forward(&x, &w, &b, stride, padding)?;
    let r = randn(&mut rng, y.dims());
    let g = layers::conv1d_backward(&r, &w, &cache, stride, padding)?;
    let loss = |x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>| {
        project(&layers::conv1d_forward(x, w, b, stride, padding).expect("shapes checked").0, &r)
    };
    let nx = numeric_gradient(x.data(), |d| loss(&with_data(&x, d), &w, &b));
    let nw = numeric_gradient(w.data(), |d| loss(&x, &with_data(&w, d), &b));
    let nb = numeric_gradient(b.data(), |d| loss(&x, &w, &with_data(&b, d)));
    Ok(relative_error(g.dx.data(), &nx)
        .max(relative_error(g.dweight.data(), &nw))
        .max(relative_error(g.dbias.data(), &nb)))
}

pub fn check_fc(seed: u64, batch: usize, inf: usize, outf: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = randn(&mut rng, &[batch, inf]);
    let w = randn(&mut rng, &[outf, inf]);
    let b = randn(&mut rng, &[outf]);
    let y = layers::fc_forward(&x, &w, &b)?;
    let r = randn(&mut rng, y.dims());
    let g = layers::fc_backward(&r, &x, &w)?;
    let loss = |x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>| project(&layers::fc_forward(x, w, b).expect("shapes checked"), &r);
    let nx = numeric_gradient(x.data(), |d| loss(&with_data(&x, d), &w, &b));
    let nw = numeric_gradient(w.data(), |d| loss(&x, &with_data(&w, d), &b));
    let nb = numeric_gradient(b.data(), |d| loss(&x, &w, &with_data(&b, d)));
    Ok(relative_error(g.dx.data(), &nx)
        .max(relative_error(g.dweight.data(), &nw))
        .max(relative_error(g.dbias.data(), &nb)))
}

pub fn check_batchnorm(seed: u64, batch: usize, ch: usize, len: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = randn(&mut rng, &[batch, ch, len]);
    let gamma = randn(&mut rng, &[ch]);
    let beta = randn(&mut rng, &[ch]);
    let fwd = |x: &Tensor<f64>, g: &Tensor<f64>, b: &Tensor<f64>| {
        let mut rm = Tensor::zeros(&[ch]);
        let mut rv = Tensor::full(&[ch], 1.0);
        layers::batchnorm1d_train(x, g, b, &mut rm, &mut rv).expect("shapes checked")
    };
    let (y, cache) = fwd(&x, &gamma, &beta);
    let r = randn(&mut rng, y.dims());
    let g = layers::batchnorm1d_backward(&r, &gamma, &cache)?;
    let nx = numeric_gradient(x.data(), |d| project(&fwd(&with_data(&x, d), &gamma, &beta).0, &r));
    let ng = numeric_gradient(gamma.data(), |d| project(&fwd(&x, &with_data(&gamma, d), &beta).0, &r));
    let nb = numeric_gradient(beta.data(), |d| project(&fwd(&x, &gamma, &with_data(&beta, d)).0, &r));
    Ok(relative_error(g.dx.data(), &nx)
        .max(relative_error(g.dgamma.data(), &ng))
        .max(relative_error(g.dbeta.data(), &nb)))
}

pub fn check_maxpool(seed: u64, batch: usize, ch: usize, len: usize, kernel: usize, stride: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = randn(&mut rng, &[batch, ch, len]);
    let (y, cache) = layers::maxpool1d_forward(&x, kernel, stride)?;
    let r = randn(&mut rng, y.dims());
    let dx = layers::maxpool1d_backward(&r, &cache)?;
    let nx = numeric_gradient(x.data(), |d| {
        project(&layers::maxpool1d_forward(&with_data(&x, d), kernel, stride).expect("shapes checked").0, &r)
    });
    Ok(relative_error(dx.data(), &nx))
}

pub fn check_relu(seed: u64, n: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = randn(&mut rng, &[n]);
    let y = layers::relu_forward(&x);
    let r = randn(&mut rng, &[n]);
    let dx = layers::relu_backward(&r, &y);
    let nx = numeric_gradient(x.data(), |d| project(&layers::relu_forward(&with_data(&x, d)), &r));
    Ok(relative_error(dx.data(), &nx))
}

pub fn check_bce(seed: u64, n: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = randn(&mut rng, &[n]);
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
    let (_, g) = bce_loss(&z, &y)?;
    let nz = numeric_gradient(z.data(), |d| bce_loss(&with_data(&z, d), &y).expect("lengths match").0);
    Ok(relative_error(g.data(), &nz))
}

/// End-to-end check through a whole network (BN in training mode) on the
/// parameters of one layer, probing `probes` random entries.
pub fn check_model(seed: u64, arch: ArchName, input_len: usize, batch: usize, probes: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model: Model<f64> = Model::new(arch, input_len, seed)?;
    let windows: Vec<Vec<f64>> =
        (0..batch).map(|_| (0..input_len).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let x = batch_from_windows::<f64, _>(&windows)?;
    let targets: Vec<f64> = (0..batch * input_len).map(|_| rng.random_range(0.0..=1.0)).collect();

    let loss_of = |m: &Model<f64>| -> f64 {
        let mut m = m.clone();
        let (logits, _) = m.forward_train(&x).expect("shapes checked");
        bce_loss(&logits, &targets).expect("lengths match").0
    };
    let mut work = model.clone();
    let (logits, trace) = work.forward_train(&x)?;
    let (_, dlogits) = bce_loss(&logits, &targets)?;
    let grads = model.backward(trace, &dlogits)?;

    let mut worst: f64 = 0.0;
    let n_tensors = grads.len();
    for p in 0..probes {
        let ti = (p * 7 + seed as usize) % n_tensors;
        let ei = rng.random_range(0..grads[ti].len());
        let analytic = grads[ti].data()[ei];
        let mut probe = model.clone();
        let orig = probe.trainable()[ti].data()[ei];
        probe.trainable_mut()[ti].data_mut()[ei] = orig + STEP;
        let up = loss_of(&probe);
        probe.trainable_mut()[ti].data_mut()[ei] = orig - STEP;
        let down = loss_of(&probe);
        let numeric = (up - down) / (2.0 * STEP);
        worst = worst.max(relative_error(&[analytic], &[numeric]));
    }
    Ok(worst)
}
