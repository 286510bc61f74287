//! Planar tensors and the convolution kernels every layer is built from.
//!
//! Convolution here means valid cross-correlation: no padding, no kernel
//! flip. Filters are learned, so the flip convention only matters when
//! interpreting exported filters, and cross-correlation is what every CNN
//! framework stores.

use crate::error::{Error, Result};
use crate::parallel::{map_indexed, Exec};

/// Floating-point element type of the numerical core.
///
/// `f32` is the production type (training, inference, checkpoints); `f64`
/// instantiates the identical code paths for gradient checks and oracles.
pub trait Scalar:
    num_traits::Float
    + num_traits::NumAssign
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// Dense (channels, height, width) array, row-major within a channel.
///
/// Carries images (normalized to `[0,1]`), feature maps, and gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<S = f32> {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::shape(format!(
                "tensor data length {} does not match {}x{}x{}",
                data.len(),
                channels,
                height,
                width
            )));
        }
        Ok(Tensor {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Tensor {
            channels,
            height,
            width,
            data: vec![S::zero(); channels * height * width],
        }
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> S,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Tensor {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> S {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: S) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    #[inline]
    pub fn plane(&self, c: usize) -> &[S] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn row(&self, c: usize, y: usize) -> &[S] {
        let start = (c * self.height + y) * self.width;
        &self.data[start..start + self.width]
    }

    /// Single-channel view of channel `c` (copies the plane).
    pub fn channel(&self, c: usize) -> Tensor<S> {
        Tensor {
            channels: 1,
            height: self.height,
            width: self.width,
            data: self.plane(c).to_vec(),
        }
    }

    /// Stacks single-spatial-shape tensors along the channel axis.
    pub fn stack(parts: &[Tensor<S>]) -> Result<Tensor<S>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::shape("cannot stack zero tensors"))?;
        let (h, w) = (first.height, first.width);
        let mut data = Vec::new();
        for p in parts {
            if p.height != h || p.width != w {
                return Err(Error::shape("stack: mismatched spatial dimensions"));
            }
            data.extend_from_slice(&p.data);
        }
        Tensor::new(parts.iter().map(|p| p.channels).sum(), h, w, data)
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Tensor<S> {
        Tensor {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| T::from_f64(v.as_f64())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Central crop leaving `margin` pixels off every side.
    pub fn crop_border(&self, margin: usize) -> Result<Tensor<S>> {
        if 2 * margin >= self.height || 2 * margin >= self.width {
            return Err(Error::shape(format!(
                "crop margin {} too large for {}x{}",
                margin, self.height, self.width
            )));
        }
        let (h, w) = (self.height - 2 * margin, self.width - 2 * margin);
        let mut data = Vec::with_capacity(self.channels * h * w);
        for c in 0..self.channels {
            for y in 0..h {
                let start = (c * self.height + y + margin) * self.width + margin;
                data.extend_from_slice(&self.data[start..start + w]);
            }
        }
        Tensor::new(self.channels, h, w, data)
    }

    /// Rectangular crop with the top-left corner at `(y0, x0)`.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<Tensor<S>> {
        if y0 + h > self.height || x0 + w > self.width {
            return Err(Error::shape(format!(
                "crop {}x{}+{}+{} exceeds {}x{}",
                h, w, y0, x0, self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(self.channels * h * w);
        for c in 0..self.channels {
            for y in 0..h {
                let start = (c * self.height + y0 + y) * self.width + x0;
                data.extend_from_slice(&self.data[start..start + w]);
            }
        }
        Tensor::new(self.channels, h, w, data)
    }
}

/// Pads every side by `margin` pixels, replicating the edge rows/columns.
pub fn replicate_pad<S: Scalar>(t: &Tensor<S>, margin: usize) -> Tensor<S> {
    let (c, h, w) = t.shape();
    Tensor::from_fn(c, h + 2 * margin, w + 2 * margin, |ch, y, x| {
        let sy = y.saturating_sub(margin).min(h - 1);
        let sx = x.saturating_sub(margin).min(w - 1);
        t.get(ch, sy, sx)
    })
}

/// One convolutional layer's parameters: `n_out` filters of spatial size
/// `f x f` spanning `n_in` input channels, plus one bias per filter.
/// Weights are flat in `[out][in][row][col]` order.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank<S = f32> {
    n_out: usize,
    n_in: usize,
    f: usize,
    weights: Vec<S>,
    biases: Vec<S>,
}

impl<S: Scalar> FilterBank<S> {
    pub fn new(n_out: usize, n_in: usize, f: usize, weights: Vec<S>, biases: Vec<S>) -> Result<Self> {
        if f == 0 || f % 2 == 0 {
            return Err(Error::config(format!("filter size {} must be odd", f)));
        }
        if weights.len() != n_out * n_in * f * f {
            return Err(Error::config(format!(
                "weights length {} does not match {}x{}x{}x{}",
                weights.len(),
                n_out,
                n_in,
                f,
                f
            )));
        }
        if biases.len() != n_out {
            return Err(Error::config(format!(
                "biases length {} does not match {} filters",
                biases.len(),
                n_out
            )));
        }
        Ok(FilterBank {
            n_out,
            n_in,
            f,
            weights,
            biases,
        })
    }

    pub fn zeros(n_out: usize, n_in: usize, f: usize) -> Result<Self> {
        FilterBank::new(n_out, n_in, f, vec![S::zero(); n_out * n_in * f * f], vec![S::zero(); n_out])
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn f(&self) -> usize {
        self.f
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [S] {
        &mut self.weights
    }

    pub fn biases(&self) -> &[S] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [S] {
        &mut self.biases
    }

    #[inline]
    pub fn weight_index(&self, o: usize, i: usize, r: usize, c: usize) -> usize {
        ((o * self.n_in + i) * self.f + r) * self.f + c
    }

    /// All weights of output filter `o`, `[in][row][col]` flat.
    pub fn filter(&self, o: usize) -> &[S] {
        let n = self.n_in * self.f * self.f;
        &self.weights[o * n..(o + 1) * n]
    }

    pub fn cast<T: Scalar>(&self) -> FilterBank<T> {
        FilterBank {
            n_out: self.n_out,
            n_in: self.n_in,
            f: self.f,
            weights: self.weights.iter().map(|v| T::from_f64(v.as_f64())).collect(),
            biases: self.biases.iter().map(|v| T::from_f64(v.as_f64())).collect(),
        }
    }
}

fn check_conv_shapes<S: Scalar>(input: &Tensor<S>, bank: &FilterBank<S>) -> Result<(usize, usize)> {
    if input.channels() != bank.n_in() {
        return Err(Error::config(format!(
            "input has {} channels but filter bank expects {}",
            input.channels(),
            bank.n_in()
        )));
    }
    if input.height() < bank.f() || input.width() < bank.f() {
        return Err(Error::shape(format!(
            "input {}x{} smaller than filter {}",
            input.height(),
            input.width(),
            bank.f()
        )));
    }
    Ok((input.height() - bank.f() + 1, input.width() - bank.f() + 1))
}

/// Valid cross-correlation: `out[o][y][x] = b[o] + sum w[o][i][r][c] * in[i][y+r][x+c]`.
///
/// Output spatial size shrinks by `f - 1` per dimension. Summation order is
/// fixed (`i`, then `r`, then `c`), so results are reproducible bit-for-bit
/// under any execution strategy.
pub fn conv2d_valid<S: Scalar>(input: &Tensor<S>, bank: &FilterBank<S>) -> Result<Tensor<S>> {
    conv2d_valid_with(input, bank, Exec::default())
}

pub fn conv2d_valid_with<S: Scalar>(
    input: &Tensor<S>,
    bank: &FilterBank<S>,
    exec: Exec,
) -> Result<Tensor<S>> {
    let (oh, ow) = check_conv_shapes(input, bank)?;
    let f = bank.f();
    let planes = map_indexed(exec, bank.n_out(), |o| {
        let mut plane = vec![S::zero(); oh * ow];
        let bias = bank.biases()[o];
        for y in 0..oh {
            let out_row = &mut plane[y * ow..(y + 1) * ow];
            out_row.iter_mut().for_each(|v| *v = bias);
            for i in 0..bank.n_in() {
                for r in 0..f {
                    let in_row = input.row(i, y + r);
                    let w_base = bank.weight_index(o, i, r, 0);
                    let w_row = &bank.weights()[w_base..w_base + f];
                    for (c, &wv) in w_row.iter().enumerate() {
                        let src = &in_row[c..c + ow];
                        for (acc, &s) in out_row.iter_mut().zip(src) {
                            *acc += wv * s;
                        }
                    }
                }
            }
        }
        plane
    });
    let mut data = Vec::with_capacity(bank.n_out() * oh * ow);
    for p in planes {
        data.extend_from_slice(&p);
    }
    Tensor::new(bank.n_out(), oh, ow, data)
}

/// Elementwise `max(0, x)`.
pub fn relu<S: Scalar>(t: &Tensor<S>) -> Tensor<S> {
    t.map(|v| if v > S::zero() { v } else { S::zero() })
}

/// Gradients of [`conv2d_valid`] with respect to its input and parameters.
#[derive(Clone, Debug)]
pub struct ConvGrads<S = f32> {
    pub input: Tensor<S>,
    pub weights: Vec<S>,
    pub biases: Vec<S>,
}

pub fn conv2d_backward<S: Scalar>(
    input: &Tensor<S>,
    bank: &FilterBank<S>,
    grad_out: &Tensor<S>,
) -> Result<ConvGrads<S>> {
    conv2d_backward_with(input, bank, grad_out, Exec::default())
}

pub fn conv2d_backward_with<S: Scalar>(
    input: &Tensor<S>,
    bank: &FilterBank<S>,
    grad_out: &Tensor<S>,
    exec: Exec,
) -> Result<ConvGrads<S>> {
    let (oh, ow) = check_conv_shapes(input, bank)?;
    if grad_out.shape() != (bank.n_out(), oh, ow) {
        return Err(Error::shape(format!(
            "grad_out shape {:?} does not match conv output ({}, {}, {})",
            grad_out.shape(),
            bank.n_out(),
            oh,
            ow
        )));
    }
    let f = bank.f();
    let (h, w) = (input.height(), input.width());

    // Parameter gradients, one task per output filter. The inner loops run
    // over the filter row (axpy form) or fixed four-lane partial sums so
    // they vectorize; the summation order is fixed either way.
    let per_filter: Vec<(Vec<S>, S)> = map_indexed(exec, bank.n_out(), |o| {
        let mut wg = vec![S::zero(); bank.n_in() * f * f];
        let mut bg = S::zero();
        for y in 0..oh {
            bg += grad_out.row(o, y).iter().copied().sum();
        }
        if f == 1 {
            for (i, w) in wg.iter_mut().enumerate() {
                let mut lanes = [S::zero(); 4];
                for y in 0..oh {
                    let g_row = grad_out.row(o, y);
                    let in_row = &input.row(i, y)[..ow];
                    let mut chunks = g_row.chunks_exact(4).zip(in_row.chunks_exact(4));
                    for (gc, vc) in &mut chunks {
                        for k in 0..4 {
                            lanes[k] += gc[k] * vc[k];
                        }
                    }
                    let rem = ow - ow % 4;
                    for (k, (&g, &v)) in g_row[rem..].iter().zip(&in_row[rem..]).enumerate() {
                        lanes[k] += g * v;
                    }
                }
                *w = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
            }
        } else {
            for i in 0..bank.n_in() {
                for r in 0..f {
                    let acc = &mut wg[(i * f + r) * f..(i * f + r) * f + f];
                    for y in 0..oh {
                        let g_row = grad_out.row(o, y);
                        let in_row = input.row(i, y + r);
                        for (x, &g) in g_row.iter().enumerate() {
                            let src = &in_row[x..x + f];
                            for (a, &v) in acc.iter_mut().zip(src) {
                                *a += g * v;
                            }
                        }
                    }
                }
            }
        }
        (wg, bg)
    });

    // Input gradient, one task per input channel (disjoint output planes).
    let in_planes: Vec<Vec<S>> = map_indexed(exec, bank.n_in(), |i| {
        let mut plane = vec![S::zero(); h * w];
        for o in 0..bank.n_out() {
            for r in 0..f {
                for c in 0..f {
                    let wv = bank.weights()[bank.weight_index(o, i, r, c)];
                    for y in 0..oh {
                        let g_row = grad_out.row(o, y);
                        let dst = &mut plane[(y + r) * w + c..(y + r) * w + c + ow];
                        for (d, &g) in dst.iter_mut().zip(g_row) {
                            *d += wv * g;
                        }
                    }
                }
            }
        }
        plane
    });

    let mut weights = Vec::with_capacity(bank.n_out() * bank.n_in() * f * f);
    let mut biases = Vec::with_capacity(bank.n_out());
    for (wg, bg) in per_filter {
        weights.extend_from_slice(&wg);
        biases.push(bg);
    }
    let mut in_data = Vec::with_capacity(bank.n_in() * h * w);
    for p in in_planes {
        in_data.extend_from_slice(&p);
    }
    Ok(ConvGrads {
        input: Tensor::new(bank.n_in(), h, w, in_data)?,
        weights,
        biases,
    })
}

/// Gradient of [`relu`]: passes `grad_out` where the pre-activation was
/// strictly positive, zero elsewhere (subgradient 0 at the kink).
pub fn relu_backward<S: Scalar>(pre_activation: &Tensor<S>, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
    if pre_activation.shape() != grad_out.shape() {
        return Err(Error::shape(format!(
            "relu_backward: pre-activation {:?} vs grad {:?}",
            pre_activation.shape(),
            grad_out.shape()
        )));
    }
    let data = pre_activation
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&p, &g)| if p > S::zero() { g } else { S::zero() })
        .collect();
    Tensor::new(
        grad_out.channels(),
        grad_out.height(),
        grad_out.width(),
        data,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Tensor<f64> {
        Tensor::from_fn(c, h, w, |_, _, _| rng.gen::<f64>() * 2.0 - 1.0)
    }

    fn random_bank(rng: &mut ChaCha8Rng, n_out: usize, n_in: usize, f: usize) -> FilterBank<f64> {
        let weights = (0..n_out * n_in * f * f)
            .map(|_| rng.gen::<f64>() * 2.0 - 1.0)
            .collect();
        let biases = (0..n_out).map(|_| rng.gen::<f64>() * 0.5).collect();
        FilterBank::new(n_out, n_in, f, weights, biases).unwrap()
    }

    /// Independent quadruple-loop reference for the forward pass.
    fn conv_oracle(input: &Tensor<f64>, bank: &FilterBank<f64>) -> Tensor<f64> {
        let f = bank.f();
        let (oh, ow) = (input.height() - f + 1, input.width() - f + 1);
        Tensor::from_fn(bank.n_out(), oh, ow, |o, y, x| {
            let mut acc = bank.biases()[o];
            for i in 0..bank.n_in() {
                for r in 0..f {
                    for c in 0..f {
                        acc += bank.weights()[bank.weight_index(o, i, r, c)]
                            * input.get(i, y + r, x + c);
                    }
                }
            }
            acc
        })
    }

    #[test]
    fn forward_all_ones_filter_sums_window() {
        // 3x3 ascending input with an all-ones 3x3 filter collapses to the
        // window sum, checked by hand: 1 + 2 + ... + 9 = 45.
        let input = Tensor::new(1, 3, 3, (1..=9).map(f64::from).collect()).unwrap();
        let bank = FilterBank::new(1, 1, 3, vec![1.0; 9], vec![0.0]).unwrap();
        let out = conv2d_valid(&input, &bank).unwrap();
        assert_eq!(out.shape(), (1, 1, 1));
        assert_eq!(out.data(), &[45.0]);

        // Even filter sizes are rejected at construction.
        assert!(FilterBank::<f64>::new(1, 1, 2, vec![1.0; 4], vec![0.0]).is_err());
    }

    #[test]
    fn forward_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(c_in, c_out, f, h, w) in
            &[(1, 1, 1, 3, 3), (1, 2, 3, 5, 6), (3, 4, 3, 7, 5), (2, 3, 5, 9, 8)]
        {
            let input = random_tensor(&mut rng, c_in, h, w);
            let bank = random_bank(&mut rng, c_out, c_in, f);
            let got = conv2d_valid(&input, &bank).unwrap();
            let want = conv_oracle(&input, &bank);
            assert_eq!(got.shape(), want.shape());
            for (a, b) in got.data().iter().zip(want.data()) {
                assert!((a - b).abs() < 1e-12, "{} vs {}", a, b);
            }
        }
    }

    #[test]
    fn identity_1x1_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let input = random_tensor(&mut rng, 1, 4, 5);
        let bank = FilterBank::new(1, 1, 1, vec![1.0], vec![0.0]).unwrap();
        assert_eq!(conv2d_valid(&input, &bank).unwrap(), input);
    }

    #[test]
    fn chained_9_1_5_shapes() {
        let input = Tensor::<f64>::zeros(1, 33, 33);
        let b1 = FilterBank::zeros(64, 1, 9).unwrap();
        let b2 = FilterBank::zeros(32, 64, 1).unwrap();
        let b3 = FilterBank::zeros(1, 32, 5).unwrap();
        let o1 = conv2d_valid(&input, &b1).unwrap();
        assert_eq!(o1.shape(), (64, 25, 25));
        let o2 = conv2d_valid(&o1, &b2).unwrap();
        assert_eq!(o2.shape(), (32, 25, 25));
        let o3 = conv2d_valid(&o2, &b3).unwrap();
        assert_eq!(o3.shape(), (1, 21, 21));
    }

    #[test]
    fn shape_law_for_standard_configs() {
        // Each spatial dimension shrinks by sum(f_i - 1) across a chain.
        let configs: &[&[usize]] = &[
            &[9, 1, 5],
            &[9, 3, 5],
            &[9, 5, 5],
            &[11, 1, 7],
            &[9, 1, 1, 5],
            &[9, 3, 1, 5],
            &[9, 5, 1, 5],
            &[9, 3, 3, 5],
            &[9, 3, 3, 3],
        ];
        for fs in configs {
            let shrink: usize = fs.iter().map(|f| f - 1).sum();
            let size = shrink + 8;
            let mut t = Tensor::<f64>::zeros(1, size, size);
            for &f in *fs {
                let bank = FilterBank::zeros(1, 1, f).unwrap();
                t = conv2d_valid(&t, &bank).unwrap();
            }
            assert_eq!(t.shape(), (1, size - shrink, size - shrink), "config {:?}", fs);
        }
    }

    #[test]
    fn conv_errors() {
        let input = Tensor::<f64>::zeros(2, 4, 4);
        let wrong_channels = FilterBank::<f64>::zeros(1, 3, 3).unwrap();
        assert!(matches!(
            conv2d_valid(&input, &wrong_channels),
            Err(Error::Config(_))
        ));
        let too_big = FilterBank::<f64>::zeros(1, 2, 5).unwrap();
        assert!(matches!(conv2d_valid(&input, &too_big), Err(Error::Shape(_))));
    }

    #[test]
    fn linearity_with_zero_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_tensor(&mut rng, 2, 6, 6);
        let b = random_tensor(&mut rng, 2, 6, 6);
        let mut bank = random_bank(&mut rng, 3, 2, 3);
        bank.biases_mut().iter_mut().for_each(|v| *v = 0.0);
        let (alpha, beta) = (0.7, -1.3);
        let mixed = Tensor::from_fn(2, 6, 6, |c, y, x| alpha * a.get(c, y, x) + beta * b.get(c, y, x));
        let lhs = conv2d_valid(&mixed, &bank).unwrap();
        let fa = conv2d_valid(&a, &bank).unwrap();
        let fb = conv2d_valid(&b, &bank).unwrap();
        for ((l, va), vb) in lhs.data().iter().zip(fa.data()).zip(fb.data()) {
            assert!((l - (alpha * va + beta * vb)).abs() < 1e-12);
        }
    }

    #[test]
    fn relu_examples() {
        let t = Tensor::new(1, 1, 3, vec![-1.0f64, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&t).data(), &[0.0, 0.0, 2.0]);
        let nonneg = Tensor::new(1, 1, 3, vec![0.5f64, 0.0, 3.0]).unwrap();
        assert_eq!(relu(&nonneg), nonneg);
        let neg = Tensor::new(1, 1, 3, vec![-0.5f64, -2.0, -0.1]).unwrap();
        assert!(relu(&neg).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn relu_backward_examples() {
        let pre = Tensor::new(1, 1, 2, vec![-1.0f64, 2.0]).unwrap();
        let grad = Tensor::new(1, 1, 2, vec![5.0f64, 5.0]).unwrap();
        assert_eq!(relu_backward(&pre, &grad).unwrap().data(), &[0.0, 5.0]);

        let pre_pos = Tensor::new(1, 1, 2, vec![1.0f64, 2.0]).unwrap();
        assert_eq!(relu_backward(&pre_pos, &grad).unwrap(), grad);

        // Subgradient convention: exactly zero pre-activation blocks the
        // gradient.
        let pre_zero = Tensor::new(1, 1, 1, vec![0.0f64]).unwrap();
        let g = Tensor::new(1, 1, 1, vec![7.0f64]).unwrap();
        assert_eq!(relu_backward(&pre_zero, &g).unwrap().data(), &[0.0]);

        let mismatched = Tensor::<f64>::zeros(1, 2, 2);
        assert!(relu_backward(&mismatched, &g).is_err());
    }

    #[test]
    fn backward_zero_grad_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let input = random_tensor(&mut rng, 2, 5, 5);
        let bank = random_bank(&mut rng, 3, 2, 3);
        let grads = conv2d_backward(&input, &bank, &Tensor::zeros(3, 3, 3)).unwrap();
        assert!(grads.input.data().iter().all(|&v| v == 0.0));
        assert!(grads.weights.iter().all(|&v| v == 0.0));
        assert!(grads.biases.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_identity_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let input = random_tensor(&mut rng, 1, 4, 4);
        let grad_out = random_tensor(&mut rng, 1, 4, 4);
        let bank = FilterBank::new(1, 1, 1, vec![1.0], vec![0.0]).unwrap();
        let grads = conv2d_backward(&input, &bank, &grad_out).unwrap();
        assert_eq!(grads.input, grad_out);
        let want: f64 = input
            .data()
            .iter()
            .zip(grad_out.data())
            .map(|(a, b)| a * b)
            .sum();
        assert!((grads.weights[0] - want).abs() < 1e-12);
        let bias_want: f64 = grad_out.data().iter().sum();
        assert!((grads.biases[0] - bias_want).abs() < 1e-12);
    }

    /// Finite-difference oracle for the scalar loss `L = sum(grad_out . out)`,
    /// whose analytic gradients are exactly what conv2d_backward returns.
    fn fd_loss(input: &Tensor<f64>, bank: &FilterBank<f64>, grad_out: &Tensor<f64>) -> f64 {
        conv2d_valid(input, bank)
            .unwrap()
            .data()
            .iter()
            .zip(grad_out.data())
            .map(|(o, g)| o * g)
            .sum()
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let input = random_tensor(&mut rng, 1, 4, 4);
        let bank = random_bank(&mut rng, 2, 1, 3);
        let grad_out = random_tensor(&mut rng, 2, 2, 2);
        let grads = conv2d_backward(&input, &bank, &grad_out).unwrap();
        let h = 1e-5;
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-8);

        for k in 0..bank.weights().len() {
            let mut plus = bank.clone();
            plus.weights_mut()[k] += h;
            let mut minus = bank.clone();
            minus.weights_mut()[k] -= h;
            let fd = (fd_loss(&input, &plus, &grad_out) - fd_loss(&input, &minus, &grad_out)) / (2.0 * h);
            assert!(rel(fd, grads.weights[k]) < 1e-6, "weight {}: {} vs {}", k, fd, grads.weights[k]);
        }
        for k in 0..bank.biases().len() {
            let mut plus = bank.clone();
            plus.biases_mut()[k] += h;
            let mut minus = bank.clone();
            minus.biases_mut()[k] -= h;
            let fd = (fd_loss(&input, &plus, &grad_out) - fd_loss(&input, &minus, &grad_out)) / (2.0 * h);
            assert!(rel(fd, grads.biases[k]) < 1e-6);
        }
        for k in 0..input.data().len() {
            let mut plus = input.clone();
            plus.data_mut()[k] += h;
            let mut minus = input.clone();
            minus.data_mut()[k] -= h;
            let fd = (fd_loss(&plus, &bank, &grad_out) - fd_loss(&minus, &bank, &grad_out)) / (2.0 * h);
            assert!(rel(fd, grads.input.data()[k]) < 1e-6);
        }
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let input = random_tensor(&mut rng, 3, 12, 11);
        let bank = random_bank(&mut rng, 5, 3, 3);
        let seq = conv2d_valid_with(&input, &bank, Exec::Sequential).unwrap();
        let par = conv2d_valid_with(&input, &bank, Exec::Parallel).unwrap();
        assert_eq!(seq, par);
        let grad = random_tensor(&mut rng, 5, 10, 9);
        let gs = conv2d_backward_with(&input, &bank, &grad, Exec::Sequential).unwrap();
        let gp = conv2d_backward_with(&input, &bank, &grad, Exec::Parallel).unwrap();
        assert_eq!(gs.input, gp.input);
        assert_eq!(gs.weights, gp.weights);
        assert_eq!(gs.biases, gp.biases);
    }

    #[test]
    fn replicate_pad_extends_edges() {
        let t = Tensor::new(1, 2, 2, vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        let p = replicate_pad(&t, 1);
        assert_eq!(p.shape(), (1, 4, 4));
        assert_eq!(p.row(0, 0), &[1.0, 1.0, 2.0, 2.0]);
        assert_eq!(p.row(0, 3), &[3.0, 3.0, 4.0, 4.0]);
        assert_eq!(p.get(0, 1, 0), 1.0);
        assert_eq!(p.get(0, 2, 3), 4.0);
    }

    proptest! {
        #[test]
        fn relu_is_nonnegative(data in proptest::collection::vec(-10.0f64..10.0, 12)) {
            let t = Tensor::new(3, 2, 2, data).unwrap();
            prop_assert!(relu(&t).data().iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn crop_then_pad_dims(c in 1usize..4, h in 3usize..10, w in 3usize..10, m in 0usize..3) {
            let t = Tensor::<f64>::zeros(c, h, w);
            let p = replicate_pad(&t, m);
            prop_assert_eq!(p.shape(), (c, h + 2 * m, w + 2 * m));
            let back = p.crop_border(m).unwrap();
            prop_assert_eq!(back.shape(), (c, h, w));
        }
    }
}
