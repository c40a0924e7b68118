//! 3x3 same-size convolution with zero padding, lowered to GEMM via im2col.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;

/// One convolution layer: weights `out x in x 3 x 3` and a bias per output channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Gradients of a [`ConvLayer`] with respect to its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrads<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> ConvLayer<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let ws = weights.shape();
        if ws.len() != 4 || ws[2] != KERNEL || ws[3] != KERNEL {
            return Err(Error::invalid(format!(
                "conv weights must be out x in x 3 x 3, got {ws:?}"
            )));
        }
        if bias.shape() != [ws[0]] {
            return Err(Error::shape("conv bias", bias.shape(), &ws[..1]));
        }
        Ok(Self { weights, bias })
    }

    pub fn zeros(out_channels: usize, in_channels: usize) -> Self {
        Self {
            weights: Tensor::zeros(&[out_channels, in_channels, KERNEL, KERNEL]),
            bias: Tensor::zeros(&[out_channels]),
        }
    }

    /// Zero-mean normal weights with std `sqrt(2 / fan_in)`, zero bias.
    pub fn he_normal<R: Rng>(out_channels: usize, in_channels: usize, rng: &mut R) -> Self {
        let fan_in = (in_channels * TAPS) as f64;
        let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("positive std");
        let weights = Tensor::from_fn(&[out_channels, in_channels, KERNEL, KERNEL], |_| {
            T::from_f64_lossy(normal.sample(rng))
        });
        Self {
            weights,
            bias: Tensor::zeros(&[out_channels]),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn parameter_count(&self) -> usize {
        count_parameters(self)
    }
}

/// Exact number of learnable values: `out * (in * 9 + 1)`.
pub fn count_parameters<T: Scalar>(layer: &ConvLayer<T>) -> usize {
    layer.out_channels() * (layer.in_channels() * TAPS + 1)
}

fn batch_dims<T: Scalar>(input: &Tensor<T>, layer: &ConvLayer<T>) -> Result<(usize, usize, usize, usize)> {
    let s = input.shape();
    if s.len() != 4 || s[1] != layer.in_channels() {
        return Err(Error::shape("conv2d input vs weights", s, layer.weights.shape()));
    }
    Ok((s[0], s[1], s[2], s[3]))
}

/// Unfolds one `C x H x W` sample into a `(C*9) x (H*W)` matrix of shifted copies.
fn im2col<T: Scalar>(sample: &[T], c: usize, h: usize, w: usize, col: &mut [T]) {
    let hw = h * w;
    for ch in 0..c {
        let plane = &sample[ch * hw..(ch + 1) * hw];
        for dy in 0..KERNEL {
            for dx in 0..KERNEL {
                let row = &mut col[(ch * TAPS + dy * KERNEL + dx) * hw..][..hw];
                for y in 0..h {
                    let dst = &mut row[y * w..(y + 1) * w];
                    let sy = y as isize + dy as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    match dx {
                        0 => {
                            dst[0] = T::zero();
                            dst[1..].copy_from_slice(&src[..w - 1]);
                        }
                        1 => dst.copy_from_slice(src),
                        _ => {
                            dst[..w - 1].copy_from_slice(&src[1..]);
                            dst[w - 1] = T::zero();
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the sample.
fn col2im<T: Scalar>(col: &[T], c: usize, h: usize, w: usize, sample: &mut [T]) {
    let hw = h * w;
    sample.fill(T::zero());
    for ch in 0..c {
        let plane = &mut sample[ch * hw..(ch + 1) * hw];
        for dy in 0..KERNEL {
            for dx in 0..KERNEL {
                let row = &col[(ch * TAPS + dy * KERNEL + dx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + dy as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &row[y * w..(y + 1) * w];
                    let dst = &mut plane[sy as usize * w..(sy as usize + 1) * w];
                    match dx {
                        0 => dst[..w - 1]
                            .iter_mut()
                            .zip(&src[1..])
                            .for_each(|(d, &s)| *d += s),
                        1 => dst.iter_mut().zip(src).for_each(|(d, &s)| *d += s),
                        _ => dst[1..]
                            .iter_mut()
                            .zip(&src[..w - 1])
                            .for_each(|(d, &s)| *d += s),
                    }
                }
            }
        }
    }
}

/// Same-size 3x3 convolution of an `N x C x H x W` batch.
pub fn conv2d_forward<T: Scalar>(input: &Tensor<T>, layer: &ConvLayer<T>) -> Result<Tensor<T>> {
    let (n, c, h, w) = batch_dims(input, layer)?;
    let o = layer.out_channels();
    let hw = h * w;
    let k = c * TAPS;
    let mut out = vec![T::zero(); n * o * hw];
    let mut col = vec![T::zero(); k * hw];
    let wts = layer.weights.data();
    let bias = layer.bias.data();
    for (sample, dst) in input.data().chunks_exact(c * hw).zip(out.chunks_exact_mut(o * hw)) {
        im2col(sample, c, h, w, &mut col);
        for (plane, &b) in dst.chunks_exact_mut(hw).zip(bias) {
            plane.fill(b);
        }
        T::gemm(o, k, hw, wts, k as isize, 1, &col, hw as isize, 1, dst, hw as isize, 1, true);
    }
    Tensor::new(&[n, o, h, w], out)
}

fn backward_impl<T: Scalar>(
    input: &Tensor<T>,
    layer: &ConvLayer<T>,
    upstream: &Tensor<T>,
    want_input: bool,
) -> Result<(Option<Tensor<T>>, ConvGrads<T>)> {
    let (n, c, h, w) = batch_dims(input, layer)?;
    let o = layer.out_channels();
    if upstream.shape() != [n, o, h, w] {
        return Err(Error::shape("conv2d upstream gradient", upstream.shape(), &[n, o, h, w]));
    }
    let hw = h * w;
    let k = c * TAPS;
    let wts = layer.weights.data();
    let mut gw = vec![T::zero(); o * k];
    let mut gb = vec![T::zero(); o];
    let mut gin = if want_input { vec![T::zero(); n * c * hw] } else { Vec::new() };
    let mut col = vec![T::zero(); k * hw];
    let mut gcol = vec![T::zero(); if want_input { k * hw } else { 0 }];

    for (idx, (sample, up)) in input
        .data()
        .chunks_exact(c * hw)
        .zip(upstream.data().chunks_exact(o * hw))
        .enumerate()
    {
        for (acc, plane) in gb.iter_mut().zip(up.chunks_exact(hw)) {
            *acc += plane.iter().copied().sum::<T>();
        }
        im2col(sample, c, h, w, &mut col);
        // dW += dY * col^T
        T::gemm(o, hw, k, up, hw as isize, 1, &col, 1, hw as isize, &mut gw, k as isize, 1, idx > 0);
        if want_input {
            // dcol = W^T * dY
            T::gemm(k, o, hw, wts, 1, k as isize, up, hw as isize, 1, &mut gcol, hw as isize, 1, false);
            col2im(&gcol, c, h, w, &mut gin[idx * c * hw..(idx + 1) * c * hw]);
        }
    }
    let grads = ConvGrads {
        weights: Tensor::new(&[o, c, KERNEL, KERNEL], gw)?,
        bias: Tensor::new(&[o], gb)?,
    };
    let gin = if want_input {
        Some(Tensor::new(&[n, c, h, w], gin)?)
    } else {
        None
    };
    Ok((gin, grads))
}

/// Gradients of [`conv2d_forward`] with respect to input, weights and bias.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    layer: &ConvLayer<T>,
    upstream: &Tensor<T>,
) -> Result<(Tensor<T>, ConvGrads<T>)> {
    let (gin, grads) = backward_impl(input, layer, upstream, true)?;
    Ok((gin.expect("input gradient requested"), grads))
}

/// Like [`conv2d_backward`] but skips the input gradient (first layer of a network).
pub fn conv2d_backward_params<T: Scalar>(
    input: &Tensor<T>,
    layer: &ConvLayer<T>,
    upstream: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    Ok(backward_impl(input, layer, upstream, false)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
        Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
    }

    /// Direct evaluation of the convolution sum, independent of im2col.
    fn direct(input: &Tensor<f64>, layer: &ConvLayer<f64>) -> Tensor<f64> {
        let s = input.shape();
        let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
        let o = layer.out_channels();
        let wt = layer.weights.data();
        let x = input.data();
        Tensor::from_fn(&[n, o, h, w], |i| {
            let (b, rest) = (i / (o * h * w), i % (o * h * w));
            let (oc, p) = (rest / (h * w), rest % (h * w));
            let (y, xx) = (p / w, p % w);
            let mut acc = layer.bias.data()[oc];
            for ch in 0..c {
                for dy in 0..3 {
                    for dx in 0..3 {
                        let sy = y as isize + dy as isize - 1;
                        let sx = xx as isize + dx as isize - 1;
                        if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                            continue;
                        }
                        acc += x[((b * c + ch) * h + sy as usize) * w + sx as usize]
                            * wt[((oc * c + ch) * 3 + dy) * 3 + dx];
                    }
                }
            }
            acc
        })
    }

    #[test]
    fn zero_input_yields_bias() {
        let mut layer = ConvLayer::<f64>::zeros(2, 3);
        layer.bias = Tensor::new(&[2], vec![0.25, -1.5]).unwrap();
        layer.weights = Tensor::full(&[2, 3, 3, 3], 0.7);
        let out = conv2d_forward(&Tensor::zeros(&[1, 3, 4, 5]), &layer).unwrap();
        assert!(out.data()[..20].iter().all(|&v| v == 0.25));
        assert!(out.data()[20..].iter().all(|&v| v == -1.5));
    }

    #[test]
    fn identity_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(&[2, 1, 5, 6], &mut rng);
        let mut layer = ConvLayer::<f64>::zeros(1, 1);
        layer.weights.data_mut()[4] = 1.0;
        assert_eq!(conv2d_forward(&x, &layer).unwrap(), x);
    }

    #[test]
    fn all_ones_receptive_field_counts() {
        let x = Tensor::<f64>::full(&[1, 1, 3, 3], 1.0);
        let layer = ConvLayer::new(Tensor::full(&[1, 1, 3, 3], 1.0), Tensor::zeros(&[1])).unwrap();
        let out = conv2d_forward(&x, &layer).unwrap();
        assert_eq!(out.data(), &[4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]);
    }

    #[test]
    fn matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random(&[3, 2, 4, 7], &mut rng);
        let layer = ConvLayer::new(random(&[5, 2, 3, 3], &mut rng), random(&[5], &mut rng)).unwrap();
        let got = conv2d_forward(&x, &layer).unwrap();
        let want = direct(&x, &layer);
        for (a, b) in got.data().iter().zip(want.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_column_and_row_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for shape in [[1, 2, 1, 5], [1, 2, 6, 1], [1, 2, 1, 1]] {
            let x = random(&shape, &mut rng);
            let layer = ConvLayer::new(random(&[3, 2, 3, 3], &mut rng), random(&[3], &mut rng)).unwrap();
            let got = conv2d_forward(&x, &layer).unwrap();
            let want = direct(&x, &layer);
            for (a, b) in got.data().iter().zip(want.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn channel_mismatch_names_shapes() {
        let layer = ConvLayer::<f32>::zeros(4, 3);
        let err = conv2d_forward(&Tensor::zeros(&[1, 2, 5, 5]), &layer).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[1, 2, 5, 5]") && msg.contains("[4, 3, 3, 3]"), "{msg}");
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random(&[2, 2, 4, 4], &mut rng);
        let layer = ConvLayer::new(random(&[3, 2, 3, 3], &mut rng), random(&[3], &mut rng)).unwrap();
        let (gi, g) = conv2d_backward(&x, &layer, &Tensor::zeros(&[2, 3, 4, 4])).unwrap();
        assert_eq!(gi.max_abs(), 0.0);
        assert_eq!(g.weights.max_abs(), 0.0);
        assert_eq!(g.bias.max_abs(), 0.0);
    }

    #[test]
    fn bias_grad_sums_upstream() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random(&[2, 1, 3, 3], &mut rng);
        let layer = ConvLayer::new(random(&[2, 1, 3, 3], &mut rng), random(&[2], &mut rng)).unwrap();
        let up = random(&[2, 2, 3, 3], &mut rng);
        let (_, g) = conv2d_backward(&x, &layer, &up).unwrap();
        for o in 0..2 {
            let expect: f64 = (0..2)
                .flat_map(|n| up.data()[(n * 2 + o) * 9..(n * 2 + o + 1) * 9].to_vec())
                .sum();
            assert!((g.bias.data()[o] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn doubling_upstream_doubles_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random(&[1, 2, 4, 4], &mut rng);
        let layer = ConvLayer::new(random(&[3, 2, 3, 3], &mut rng), random(&[3], &mut rng)).unwrap();
        let up = random(&[1, 3, 4, 4], &mut rng);
        let (gi, g) = conv2d_backward(&x, &layer, &up).unwrap();
        let (gi2, g2) = conv2d_backward(&x, &layer, &up.scale(2.0)).unwrap();
        for (a, b) in gi.data().iter().chain(g.weights.data()).chain(g.bias.data()).zip(
            gi2.data().iter().chain(g2.weights.data()).chain(g2.bias.data()),
        ) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn params_only_matches_full_backward() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = random(&[2, 3, 5, 4], &mut rng);
        let layer = ConvLayer::new(random(&[2, 3, 3, 3], &mut rng), random(&[2], &mut rng)).unwrap();
        let up = random(&[2, 2, 5, 4], &mut rng);
        let (_, full) = conv2d_backward(&x, &layer, &up).unwrap();
        assert_eq!(conv2d_backward_params(&x, &layer, &up).unwrap(), full);
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(count_parameters(&ConvLayer::<f32>::zeros(1, 32)), 289);
        assert_eq!(count_parameters(&ConvLayer::<f32>::zeros(32, 32)), 9248);
        assert_eq!(count_parameters(&ConvLayer::<f32>::zeros(1, 1)), 10);
    }
}
