//! Forward and backward kernels for the fixed layer set.
//!
//! Activations are laid out `[batch, channels, length]` for the
//! convolutional part and `[batch, features]` for the dense part.
//! Hand-written reductions accumulate in `f64`.

use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

pub fn conv_out_len(len: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = len + 2 * padding;
    if stride == 0 || kernel == 0 || padded < kernel {
        None
    } else {
        Some((padded - kernel) / stride + 1)
    }
}

pub fn pool_out_len(len: usize, kernel: usize, stride: usize) -> Option<usize> {
    conv_out_len(len, kernel, stride, 0)
}

fn dims3<T: Scalar>(x: &Tensor<T>, what: &str) -> Result<(usize, usize, usize)> {
    match *x.dims() {
        [b, c, l] => Ok((b, c, l)),
        ref d => Err(Error::ShapeMismatch(format!("{what} expects a rank-3 input, got {d:?}"))),
    }
}

/// Saved state for the convolution backward pass.
#[derive(Debug, Clone)]
pub struct ConvCache<T> {
    pub in_dims: (usize, usize, usize),
    pub out_len: usize,
    /// im2col matrix, `[in_ch * kernel, batch * out_len]`.
    pub cols: Vec<T>,
}

/// Cross-correlation `y[b,o,i] = sum_{c,j} w[o,c,j] x[b,c,i*stride + j - padding] + bias[o]`
/// with zero padding.
pub fn conv1d_forward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<(Tensor<T>, ConvCache<T>)> {
    let (batch, in_ch, len) = dims3(x, "conv1d")?;
    let (out_ch, w_in, kernel) = dims3(weight, "conv1d weight")?;
    if w_in != in_ch || bias.dims() != [out_ch] {
        return Err(Error::ShapeMismatch(format!(
            "conv1d: input {:?}, weight {:?}, bias {:?}",
            x.dims(),
            weight.dims(),
            bias.dims()
        )));
    }
    let out_len = conv_out_len(len, kernel, stride, padding)
        .ok_or_else(|| Error::ShapeMismatch(format!("conv1d: kernel {kernel} exceeds padded length")))?;
    let n = batch * out_len;
    let ck = in_ch * kernel;
    let xd = x.data();
    let mut cols = vec![T::ZERO; ck * n];
    for c in 0..in_ch {
        for j in 0..kernel {
            let row = &mut cols[(c * kernel + j) * n..(c * kernel + j + 1) * n];
            for b in 0..batch {
                let src = &xd[(b * in_ch + c) * len..(b * in_ch + c + 1) * len];
                let dst = &mut row[b * out_len..(b + 1) * out_len];
                for (i, d) in dst.iter_mut().enumerate() {
                    let p = (i * stride + j) as isize - padding as isize;
                    if p >= 0 && (p as usize) < len {
                        *d = src[p as usize];
                    }
                }
            }
        }
    }
    let mut tmp = vec![T::ZERO; out_ch * n];
    T::gemm(out_ch, ck, n, T::ONE, weight.data(), ck, 1, &cols, n, 1, T::ZERO, &mut tmp, n, 1);
    let mut y = vec![T::ZERO; batch * out_ch * out_len];
    let bd = bias.data();
    for o in 0..out_ch {
        for b in 0..batch {
            let src = &tmp[o * n + b * out_len..o * n + (b + 1) * out_len];
            let dst = &mut y[(b * out_ch + o) * out_len..(b * out_ch + o + 1) * out_len];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = s + bd[o];
            }
        }
    }
    let cache = ConvCache { in_dims: (batch, in_ch, len), out_len, cols };
    Ok((Tensor::new(vec![batch, out_ch, out_len], y)?, cache))
}

pub struct ConvGrads<T> {
    pub dx: Tensor<T>,
    pub dweight: Tensor<T>,
    pub dbias: Tensor<T>,
}

pub fn conv1d_backward<T: Scalar>(
    dy: &Tensor<T>,
    weight: &Tensor<T>,
    cache: &ConvCache<T>,
    stride: usize,
    padding: usize,
) -> Result<ConvGrads<T>> {
    let (batch, in_ch, len) = cache.in_dims;
    let (out_ch, _, kernel) = dims3(weight, "conv1d weight")?;
    let out_len = cache.out_len;
    if dy.dims() != [batch, out_ch, out_len] {
        return Err(Error::ShapeMismatch(format!(
            "conv1d backward: upstream {:?}, expected {:?}",
            dy.dims(),
            [batch, out_ch, out_len]
        )));
    }
    let n = batch * out_len;
    let ck = in_ch * kernel;
    let dyd = dy.data();
    let mut g = vec![T::ZERO; out_ch * n];
    let mut dbias = vec![T::ZERO; out_ch];
    for o in 0..out_ch {
        let mut acc = 0.0f64;
        for b in 0..batch {
            let src = &dyd[(b * out_ch + o) * out_len..(b * out_ch + o + 1) * out_len];
            g[o * n + b * out_len..o * n + (b + 1) * out_len].copy_from_slice(src);
            acc += src.iter().map(|v| v.to_f64()).sum::<f64>();
        }
        dbias[o] = T::from_f64(acc);
    }
    let mut dw = vec![T::ZERO; out_ch * ck];
    // dW = G * cols^T
    T::gemm(out_ch, n, ck, T::ONE, &g, n, 1, &cache.cols, 1, n, T::ZERO, &mut dw, ck, 1);
    let mut dcols = vec![T::ZERO; ck * n];
    // dcols = W^T * G
    T::gemm(ck, out_ch, n, T::ONE, weight.data(), 1, ck, &g, n, 1, T::ZERO, &mut dcols, n, 1);
    let mut dx = vec![T::ZERO; batch * in_ch * len];
    for c in 0..in_ch {
        for j in 0..kernel {
            let row = &dcols[(c * kernel + j) * n..(c * kernel + j + 1) * n];
            for b in 0..batch {
                let dst = &mut dx[(b * in_ch + c) * len..(b * in_ch + c + 1) * len];
                for (i, &v) in row[b * out_len..(b + 1) * out_len].iter().enumerate() {
                    let p = (i * stride + j) as isize - padding as isize;
                    if p >= 0 && (p as usize) < len {
                        dst[p as usize] += v;
                    }
                }
            }
        }
    }
    Ok(ConvGrads {
        dx: Tensor::new(vec![batch, in_ch, len], dx)?,
        dweight: Tensor::new(weight.dims().to_vec(), dw)?,
        dbias: Tensor::new(vec![out_ch], dbias)?,
    })
}

#[derive(Debug, Clone)]
pub struct PoolCache {
    pub in_dims: (usize, usize, usize),
    /// Input position of the maximum for every output element.
    pub argmax: Vec<u32>,
}

/// Max pooling without padding; ties resolve to the leftmost position.
pub fn maxpool1d_forward<T: Scalar>(x: &Tensor<T>, kernel: usize, stride: usize) -> Result<(Tensor<T>, PoolCache)> {
    let (batch, ch, len) = dims3(x, "maxpool1d")?;
    let out_len = pool_out_len(len, kernel, stride)
        .ok_or_else(|| Error::ShapeMismatch(format!("maxpool1d: kernel {kernel} exceeds length {len}")))?;
    let xd = x.data();
    let mut y = Vec::with_capacity(batch * ch * out_len);
    let mut argmax = Vec::with_capacity(batch * ch * out_len);
    for row in xd.chunks_exact(len) {
        for i in 0..out_len {
            let start = i * stride;
            let mut best = start;
            for p in start + 1..start + kernel {
                if row[p] > row[best] {
                    best = p;
                }
            }
            y.push(row[best]);
            argmax.push(best as u32);
        }
    }
    Ok((Tensor::new(vec![batch, ch, out_len], y)?, PoolCache { in_dims: (batch, ch, len), argmax }))
}

pub fn maxpool1d_backward<T: Scalar>(dy: &Tensor<T>, cache: &PoolCache) -> Result<Tensor<T>> {
    let (batch, ch, len) = cache.in_dims;
    if dy.len() != cache.argmax.len() {
        return Err(Error::ShapeMismatch("maxpool1d backward: upstream size mismatch".into()));
    }
    let out_len = dy.len() / (batch * ch);
    let mut dx = vec![T::ZERO; batch * ch * len];
    for (r, (grads, idx)) in dy.data().chunks_exact(out_len).zip(cache.argmax.chunks_exact(out_len)).enumerate() {
        let dst = &mut dx[r * len..(r + 1) * len];
        for (&g, &p) in grads.iter().zip(idx) {
            dst[p as usize] += g;
        }
    }
    Tensor::new(vec![batch, ch, len], dx)
}

pub fn relu_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let mut y = x.clone();
    y.data_mut().iter_mut().for_each(|v| {
        if *v < T::ZERO {
            *v = T::ZERO
        }
    });
    y
}

/// Gradient of ReLU given its forward output.
pub fn relu_backward<T: Scalar>(dy: &Tensor<T>, y: &Tensor<T>) -> Tensor<T> {
    let mut dx = dy.clone();
    dx.data_mut().iter_mut().zip(y.data()).for_each(|(g, &o)| {
        if !(o > T::ZERO) {
            *g = T::ZERO
        }
    });
    dx
}

/// `y = x W^T + b` with `W` shaped `[out, in]`.
pub fn fc_forward<T: Scalar>(x: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (batch, inf) = match *x.dims() {
        [b, f] => (b, f),
        ref d => return Err(Error::ShapeMismatch(format!("fc expects a rank-2 input, got {d:?}"))),
    };
    let (outf, w_in) = match *weight.dims() {
        [o, i] => (o, i),
        ref d => return Err(Error::ShapeMismatch(format!("fc weight must be rank 2, got {d:?}"))),
    };
    if w_in != inf || bias.dims() != [outf] {
        return Err(Error::ShapeMismatch(format!(
            "fc: input {:?}, weight {:?}, bias {:?}",
            x.dims(),
            weight.dims(),
            bias.dims()
        )));
    }
    let mut y = Vec::with_capacity(batch * outf);
    for _ in 0..batch {
        y.extend_from_slice(bias.data());
    }
    T::gemm(batch, inf, outf, T::ONE, x.data(), inf, 1, weight.data(), 1, inf, T::ONE, &mut y, outf, 1);
    Tensor::new(vec![batch, outf], y)
}

pub struct FcGrads<T> {
    pub dx: Tensor<T>,
    pub dweight: Tensor<T>,
    pub dbias: Tensor<T>,
}

pub fn fc_backward<T: Scalar>(dy: &Tensor<T>, x: &Tensor<T>, weight: &Tensor<T>) -> Result<FcGrads<T>> {
    let (batch, inf) = (x.dims()[0], x.dims()[1]);
    let outf = weight.dims()[0];
    if dy.dims() != [batch, outf] {
        return Err(Error::ShapeMismatch(format!("fc backward: upstream {:?}", dy.dims())));
    }
    let mut dw = vec![T::ZERO; outf * inf];
    T::gemm(outf, batch, inf, T::ONE, dy.data(), 1, outf, x.data(), inf, 1, T::ZERO, &mut dw, inf, 1);
    let mut dx = vec![T::ZERO; batch * inf];
    T::gemm(batch, outf, inf, T::ONE, dy.data(), outf, 1, weight.data(), inf, 1, T::ZERO, &mut dx, inf, 1);
    let dbias = (0..outf)
        .map(|o| T::from_f64((0..batch).map(|b| dy.data()[b * outf + o].to_f64()).sum()))
        .collect();
    Ok(FcGrads {
        dx: Tensor::new(vec![batch, inf], dx)?,
        dweight: Tensor::new(vec![outf, inf], dw)?,
        dbias: Tensor::new(vec![outf], dbias)?,
    })
}

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct BnCache<T> {
    pub xhat: Vec<T>,
    pub inv_std: Vec<f64>,
    pub dims: (usize, usize, usize),
}

/// Batch norm in training mode: per-channel statistics over batch and
/// length; running statistics move by `BN_MOMENTUM` (variance unbiased).
pub fn batchnorm1d_train<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    running_mean: &mut Tensor<T>,
    running_var: &mut Tensor<T>,
) -> Result<(Tensor<T>, BnCache<T>)> {
    let (batch, ch, len) = dims3(x, "batchnorm1d")?;
    if gamma.dims() != [ch] || beta.dims() != [ch] {
        return Err(Error::ShapeMismatch(format!("batchnorm1d: {ch} channels vs gamma {:?}", gamma.dims())));
    }
    let count = (batch * len) as f64;
    let xd = x.data();
    let mut y = vec![T::ZERO; xd.len()];
    let mut xhat = vec![T::ZERO; xd.len()];
    let mut inv_std = vec![0.0; ch];
    for c in 0..ch {
        let rows = || (0..batch).map(move |b| (b * ch + c) * len);
        let mean = rows().map(|r| xd[r..r + len].iter().map(|v| v.to_f64()).sum::<f64>()).sum::<f64>() / count;
        let var = rows()
            .map(|r| xd[r..r + len].iter().map(|v| (v.to_f64() - mean).powi(2)).sum::<f64>())
            .sum::<f64>()
            / count;
        let istd = 1.0 / (var + BN_EPS).sqrt();
        inv_std[c] = istd;
        let (g, bt) = (gamma.data()[c].to_f64(), beta.data()[c].to_f64());
        for r in rows() {
            for i in r..r + len {
                let h = (xd[i].to_f64() - mean) * istd;
                xhat[i] = T::from_f64(h);
                y[i] = T::from_f64(g * h + bt);
            }
        }
        let unbiased = if count > 1.0 { var * count / (count - 1.0) } else { var };
        let rm = &mut running_mean.data_mut()[c];
        *rm = T::from_f64((1.0 - BN_MOMENTUM) * rm.to_f64() + BN_MOMENTUM * mean);
        let rv = &mut running_var.data_mut()[c];
        *rv = T::from_f64((1.0 - BN_MOMENTUM) * rv.to_f64() + BN_MOMENTUM * unbiased);
    }
    Ok((Tensor::new(vec![batch, ch, len], y)?, BnCache { xhat, inv_std, dims: (batch, ch, len) }))
}

pub fn batchnorm1d_eval<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    running_mean: &Tensor<T>,
    running_var: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (batch, ch, len) = dims3(x, "batchnorm1d")?;
    if gamma.dims() != [ch] {
        return Err(Error::ShapeMismatch(format!("batchnorm1d: {ch} channels vs gamma {:?}", gamma.dims())));
    }
    let mut y = x.clone();
    let scale: Vec<f64> = (0..ch)
        .map(|c| gamma.data()[c].to_f64() / (running_var.data()[c].to_f64() + BN_EPS).sqrt())
        .collect();
    for (r, row) in y.data_mut().chunks_exact_mut(len).enumerate() {
        let c = r % ch;
        let (s, m, b) = (scale[c], running_mean.data()[c].to_f64(), beta.data()[c].to_f64());
        row.iter_mut().for_each(|v| *v = T::from_f64((v.to_f64() - m) * s + b));
    }
    debug_assert_eq!(y.len(), batch * ch * len);
    Ok(y)
}

pub struct BnGrads<T> {
    pub dx: Tensor<T>,
    pub dgamma: Tensor<T>,
    pub dbeta: Tensor<T>,
}

pub fn batchnorm1d_backward<T: Scalar>(dy: &Tensor<T>, gamma: &Tensor<T>, cache: &BnCache<T>) -> Result<BnGrads<T>> {
    let (batch, ch, len) = cache.dims;
    if dy.dims() != [batch, ch, len] {
        return Err(Error::ShapeMismatch(format!("batchnorm1d backward: upstream {:?}", dy.dims())));
    }
    let count = (batch * len) as f64;
    let dyd = dy.data();
    let mut dx = vec![T::ZERO; dyd.len()];
    let mut dgamma = vec![T::ZERO; ch];
    let mut dbeta = vec![T::ZERO; ch];
    for c in 0..ch {
        let (mut sum_dy, mut sum_dy_xhat) = (0.0f64, 0.0f64);
        for b in 0..batch {
            let r = (b * ch + c) * len;
            for i in r..r + len {
                sum_dy += dyd[i].to_f64();
                sum_dy_xhat += dyd[i].to_f64() * cache.xhat[i].to_f64();
            }
        }
        dgamma[c] = T::from_f64(sum_dy_xhat);
        dbeta[c] = T::from_f64(sum_dy);
        let k = gamma.data()[c].to_f64() * cache.inv_std[c] / count;
        for b in 0..batch {
            let r = (b * ch + c) * len;
            for i in r..r + len {
                let v = count * dyd[i].to_f64() - sum_dy - cache.xhat[i].to_f64() * sum_dy_xhat;
                dx[i] = T::from_f64(k * v);
            }
        }
    }
    Ok(BnGrads {
        dx: Tensor::new(vec![batch, ch, len], dx)?,
        dgamma: Tensor::new(vec![ch], dgamma)?,
        dbeta: Tensor::new(vec![ch], dbeta)?,
    })
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(dims: &[usize], v: &[f64]) -> Tensor<f64> {
        Tensor::new(dims.to_vec(), v.to_vec()).unwrap()
    }

    #[test]
    fn conv_hand_example() {
        let x = t(&[1, 1, 4], &[1.0, 2.0, 3.0, 4.0]);
        let w = t(&[1, 1, 3], &[1.0, 0.0, -1.0]);
        let b = t(&[1], &[0.0]);
        let (y, _) = conv1d_forward(&x, &w, &b, 1, 0).unwrap();
        assert_eq!(y.data(), &[-2.0, -2.0]);
    }

    #[test]
    fn conv_unit_kernel_and_zero_weights() {
        let x = t(&[2, 1, 5], &[1.0, -2.0, 3.0, 0.5, 7.0, 0.0, 1.0, 2.0, 3.0, 4.0]);
        let (y, _) = conv1d_forward(&x, &t(&[1, 1, 1], &[1.0]), &t(&[1], &[0.0]), 1, 0).unwrap();
        assert_eq!(y.data(), x.data());
        let (y, _) = conv1d_forward(&x, &t(&[3, 1, 3], &[0.0; 9]), &t(&[3], &[0.5, -1.0, 2.0]), 2, 1).unwrap();
        assert_eq!(y.dims(), &[2, 3, 3]);
        for (r, row) in y.data().chunks(3).enumerate() {
            let want = [0.5, -1.0, 2.0][r % 3];
            assert!(row.iter().all(|&v| v == want));
        }
    }

    #[test]
    fn conv_output_length_formula() {
        assert_eq!(conv_out_len(512, 11, 4, 5), Some(128));
        assert_eq!(conv_out_len(10, 3, 1, 0), Some(8));
        assert_eq!(conv_out_len(2, 5, 1, 1), None);
    }

    #[test]
    fn conv_shape_mismatch() {
        let x = t(&[1, 2, 4], &[0.0; 8]);
        let w = t(&[1, 1, 3], &[0.0; 3]);
        assert!(matches!(conv1d_forward(&x, &w, &t(&[1], &[0.0]), 1, 0), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn zero_upstream_gives_zero_conv_grads() {
        let x = t(&[1, 2, 6], &[0.3, -0.1, 0.5, 1.0, 2.0, -3.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let w = t(&[2, 2, 3], &[0.1, -0.2, 0.3, 0.4, 0.5, -0.6, 0.7, 0.8, 0.9, -1.0, 1.1, 1.2]);
        let (y, cache) = conv1d_forward(&x, &w, &t(&[2], &[0.0, 0.0]), 1, 1).unwrap();
        let g = conv1d_backward(&Tensor::zeros(y.dims()), &w, &cache, 1, 1).unwrap();
        assert!(g.dweight.data().iter().chain(g.dbias.data()).chain(g.dx.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn maxpool_examples() {
        let x = t(&[1, 1, 4], &[1.0, 3.0, 2.0, 5.0]);
        let (y, cache) = maxpool1d_forward(&x, 2, 2).unwrap();
        assert_eq!(y.data(), &[3.0, 5.0]);
        let dx = maxpool1d_backward(&t(&[1, 1, 2], &[10.0, 20.0]), &cache).unwrap();
        assert_eq!(dx.data(), &[0.0, 10.0, 0.0, 20.0]);
        let (id, _) = maxpool1d_forward(&x, 1, 1).unwrap();
        assert_eq!(id.data(), x.data());
    }

    #[test]
    fn relu_example() {
        let y = relu_forward(&t(&[3], &[-1.0, 0.0, 2.0]));
        assert_eq!(y.data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn batchnorm_train_normalizes() {
        let data: Vec<f64> = (0..2 * 3 * 7).map(|i| ((i * 37 % 11) as f64) * 0.7 - 2.0 + (i % 3) as f64).collect();
        let x = t(&[2, 3, 7], &data);
        let mut rm = Tensor::zeros(&[3]);
        let mut rv = Tensor::full(&[3], 1.0);
        let (y, _) = batchnorm1d_train(&x, &Tensor::full(&[3], 1.0), &Tensor::zeros(&[3]), &mut rm, &mut rv).unwrap();
        for c in 0..3 {
            let vals: Vec<f64> = (0..2).flat_map(|b| y.data()[(b * 3 + c) * 7..(b * 3 + c + 1) * 7].to_vec()).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(mean.abs() < 1e-4);
            assert!((var - 1.0).abs() < 1e-4);
        }
        assert!(rm.data().iter().any(|&v| v != 0.0));
        assert!(rv.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }
}
