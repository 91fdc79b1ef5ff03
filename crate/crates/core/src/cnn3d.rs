//! 3D residual convolutional front-end with hand-written forward and
//! backward passes.
//!
//! Layout conventions: activations are `[N, C, D, H, W]` (batch,
//! channels, then spatial z/y/x, row-major); convolution weights are
//! `[C_out, C_in, k, k, k]` with cubic odd kernels and zero padding
//! `k/2`, so spatial extent only changes through stride
//! (`D' = ceil(D/stride)`).
//!
//! Every layer exposes an explicit backward that consumes the tensors
//! cached by its forward; nothing here is clever enough to need an
//! autodiff graph, and every gradient is validated against central
//! finite differences in the tests.

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::{Param, Tensor};

/// Train mode uses batch statistics in normalization layers and updates
/// their running estimates; eval mode freezes them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

fn dims5(t: &Tensor, what: &str) -> Result<(usize, usize, usize, usize, usize)> {
    match *t.dims() {
        [n, c, d, h, w] => Ok((n, c, d, h, w)),
        _ => Err(Error::argument(format!(
            "{what} must be rank 5 [N,C,D,H,W], got {:?}",
            t.dims()
        ))),
    }
}

/// Kernel-index bounds that keep `origin + k` inside `[0, size)`.
#[inline]
fn kernel_bounds(origin: isize, k: usize, size: usize) -> (usize, usize) {
    let lo = (-origin).max(0) as usize;
    let hi = k.min((size as isize - origin).max(0) as usize);
    (lo, hi)
}

/// 3D cross-correlation with zero padding `k/2` and the given stride.
///
/// `input` is `[N, C_in, D, H, W]`, `weight` is `[C_out, C_in, k, k, k]`
/// (k odd), `bias` is `[C_out]`; output is `[N, C_out, ceil(D/s), …]`.
pub fn conv3d(input: &Tensor, weight: &Tensor, bias: &Tensor, stride: usize) -> Result<Tensor> {
    let geom = ConvGeometry::check(input, weight, bias, stride)?;
    let mut out = Tensor::zeros(&geom.out_dims);
    conv3d_forward_fill(&geom, input.data(), weight.data(), bias.data(), out.data_mut());
    Ok(out)
}

/// Shared shape checking/derivation for conv forward and backward.
struct ConvGeometry {
    n: usize,
    c_in: usize,
    c_out: usize,
    d: usize,
    h: usize,
    w: usize,
    k: usize,
    pad: usize,
    stride: usize,
    od: usize,
    oh: usize,
    ow: usize,
    out_dims: Vec<usize>,
}

impl ConvGeometry {
    fn check(input: &Tensor, weight: &Tensor, bias: &Tensor, stride: usize) -> Result<Self> {
        let (n, c_in, d, h, w) = dims5(input, "conv3d input")?;
        let (c_out, w_cin, kd, kh, kw) = dims5(weight, "conv3d weight")?;
        if kd != kh || kh != kw || kd % 2 == 0 {
            return Err(Error::argument(format!(
                "conv3d kernel must be cubic with odd side, got {:?}",
                &weight.dims()[2..]
            )));
        }
        if w_cin != c_in {
            return Err(Error::argument(format!(
                "conv3d channel mismatch: input {:?} vs weight {:?}",
                input.dims(),
                weight.dims()
            )));
        }
        if bias.dims() != [c_out] {
            return Err(Error::argument(format!(
                "conv3d bias must be [{c_out}], got {:?}",
                bias.dims()
            )));
        }
        if stride != 1 && stride != 2 {
            return Err(Error::argument(format!("conv3d stride must be 1 or 2, got {stride}")));
        }
        let k = kd;
        let od = (d - 1) / stride + 1;
        let oh = (h - 1) / stride + 1;
        let ow = (w - 1) / stride + 1;
        Ok(ConvGeometry {
            n,
            c_in,
            c_out,
            d,
            h,
            w,
            k,
            pad: k / 2,
            stride,
            od,
            oh,
            ow,
            out_dims: vec![n, c_out, od, oh, ow],
        })
    }
}

fn conv3d_forward_fill(
    g: &ConvGeometry,
    input: &[f64],
    weight: &[f64],
    bias: &[f64],
    out: &mut [f64],
) {
    let in_sc = g.d * g.h * g.w;
    let in_sn = g.c_in * in_sc;
    let w_sci = g.k * g.k * g.k;
    let w_sco = g.c_in * w_sci;
    let out_spatial = g.od * g.oh * g.ow;

    for b in 0..g.n {
        for co in 0..g.c_out {
            let mut oidx = (b * g.c_out + co) * out_spatial;
            for z in 0..g.od {
                let iz0 = (z * g.stride) as isize - g.pad as isize;
                let (kz_lo, kz_hi) = kernel_bounds(iz0, g.k, g.d);
                for y in 0..g.oh {
                    let iy0 = (y * g.stride) as isize - g.pad as isize;
                    let (ky_lo, ky_hi) = kernel_bounds(iy0, g.k, g.h);
                    for x in 0..g.ow {
                        let ix0 = (x * g.stride) as isize - g.pad as isize;
                        let (kx_lo, kx_hi) = kernel_bounds(ix0, g.k, g.w);
                        let mut acc = bias[co];
                        for ci in 0..g.c_in {
                            let in_base = b * in_sn + ci * in_sc;
                            let w_base = co * w_sco + ci * w_sci;
                            for kz in kz_lo..kz_hi {
                                let iz = (iz0 + kz as isize) as usize;
                                for ky in ky_lo..ky_hi {
                                    let iy = (iy0 + ky as isize) as usize;
                                    let in_row = in_base + (iz * g.h + iy) * g.w;
                                    let w_row = w_base + (kz * g.k + ky) * g.k;
                                    for kx in kx_lo..kx_hi {
                                        let ix = (ix0 + kx as isize) as usize;
                                        acc += input[in_row + ix] * weight[w_row + kx];
                                    }
                                }
                            }
                        }
                        out[oidx] = acc;
                        oidx += 1;
                    }
                }
            }
        }
    }
}

/// Gradients of a conv3d: returns `(d_input, d_weight, d_bias)` for the
/// upstream gradient `d_out`. Pure accumulation in a fixed loop order,
/// so results are deterministic.
pub fn conv3d_backward(
    input: &Tensor,
    weight: &Tensor,
    stride: usize,
    d_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let c_out = weight.dims()[0];
    let zero_bias = Tensor::zeros(&[c_out]);
    let g = ConvGeometry::check(input, weight, &zero_bias, stride)?;
    if d_out.dims() != g.out_dims.as_slice() {
        return Err(Error::argument(format!(
            "conv3d upstream gradient must be {:?}, got {:?}",
            g.out_dims,
            d_out.dims()
        )));
    }

    let mut d_input = Tensor::zeros(input.dims());
    let mut d_weight = Tensor::zeros(weight.dims());
    let mut d_bias = Tensor::zeros(&[c_out]);

    let in_data = input.data();
    let w_data = weight.data();
    let dout_data = d_out.data();
    let din = d_input.data_mut();
    let dw = d_weight.data_mut();
    let db = d_bias.data_mut();

    let in_sc = g.d * g.h * g.w;
    let in_sn = g.c_in * in_sc;
    let w_sci = g.k * g.k * g.k;
    let w_sco = g.c_in * w_sci;
    let out_spatial = g.od * g.oh * g.ow;

    for b in 0..g.n {
        for co in 0..g.c_out {
            let mut oidx = (b * g.c_out + co) * out_spatial;
            for z in 0..g.od {
                let iz0 = (z * g.stride) as isize - g.pad as isize;
                let (kz_lo, kz_hi) = kernel_bounds(iz0, g.k, g.d);
                for y in 0..g.oh {
                    let iy0 = (y * g.stride) as isize - g.pad as isize;
                    let (ky_lo, ky_hi) = kernel_bounds(iy0, g.k, g.h);
                    for x in 0..g.ow {
                        let ix0 = (x * g.stride) as isize - g.pad as isize;
                        let (kx_lo, kx_hi) = kernel_bounds(ix0, g.k, g.w);
                        let grad = dout_data[oidx];
                        oidx += 1;
                        if grad == 0.0 {
                            continue;
                        }
                        db[co] += grad;
                        for ci in 0..g.c_in {
                            let in_base = b * in_sn + ci * in_sc;
                            let w_base = co * w_sco + ci * w_sci;
                            for kz in kz_lo..kz_hi {
                                let iz = (iz0 + kz as isize) as usize;
                                for ky in ky_lo..ky_hi {
                                    let iy = (iy0 + ky as isize) as usize;
                                    let in_row = in_base + (iz * g.h + iy) * g.w;
                                    let w_row = w_base + (kz * g.k + ky) * g.k;
                                    for kx in kx_lo..kx_hi {
                                        let ix = (ix0 + kx as isize) as usize;
                                        dw[w_row + kx] += grad * in_data[in_row + ix];
                                        din[in_row + ix] += grad * w_data[w_row + kx];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((d_input, d_weight, d_bias))
}

/// Elementwise max(0, x).
pub fn relu(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    for v in y.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    y
}

/// Backward of ReLU given its original input.
pub fn relu_backward(x: &Tensor, d_y: &Tensor) -> Tensor {
    debug_assert_eq!(x.dims(), d_y.dims());
    let mut d_x = d_y.clone();
    for (g, &v) in d_x.data_mut().iter_mut().zip(x.data()) {
        if v <= 0.0 {
            *g = 0.0;
        }
    }
    d_x
}

/// Elementwise logistic sigmoid.
pub fn sigmoid(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    for v in y.data_mut() {
        *v = 1.0 / (1.0 + (-*v).exp());
    }
    y
}

/// Backward of sigmoid given its *output* y: dx = dy · y · (1 − y).
pub fn sigmoid_backward(y: &Tensor, d_y: &Tensor) -> Tensor {
    debug_assert_eq!(y.dims(), d_y.dims());
    let mut d_x = d_y.clone();
    for (g, &v) in d_x.data_mut().iter_mut().zip(y.data()) {
        *g *= v * (1.0 - v);
    }
    d_x
}

/// Global average pool over the spatial axes: `[N,C,D,H,W] → [N,C]`.
pub fn global_avg_pool(x: &Tensor) -> Result<Tensor> {
    let (n, c, d, h, w) = dims5(x, "pool input")?;
    let spatial = d * h * w;
    let mut y = Tensor::zeros(&[n, c]);
    for b in 0..n {
        for ch in 0..c {
            let base = (b * c + ch) * spatial;
            let sum: f64 = x.data()[base..base + spatial].iter().sum();
            y.data_mut()[b * c + ch] = sum / spatial as f64;
        }
    }
    Ok(y)
}

/// Backward of the global average pool: spreads each gradient uniformly
/// over the spatial positions it averaged.
pub fn global_avg_pool_backward(x_dims: &[usize], d_y: &Tensor) -> Result<Tensor> {
    let [n, c, d, h, w] = *x_dims else {
        return Err(Error::argument(format!(
            "pool input dims must be rank 5, got {x_dims:?}"
        )));
    };
    if d_y.dims() != [n, c] {
        return Err(Error::argument(format!(
            "pool upstream gradient must be [{n}, {c}], got {:?}",
            d_y.dims()
        )));
    }
    let spatial = d * h * w;
    let mut d_x = Tensor::zeros(x_dims);
    for b in 0..n {
        for ch in 0..c {
            let g = d_y.data()[b * c + ch] / spatial as f64;
            let base = (b * c + ch) * spatial;
            d_x.data_mut()[base..base + spatial].fill(g);
        }
    }
    Ok(d_x)
}

/// Per-channel batch normalization over `[N, C, D, H, W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm3d {
    pub scale: Param,
    pub offset: Param,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub momentum: f64,
    pub eps: f64,
}

/// What BN backward needs from its forward.
#[derive(Debug, Clone)]
pub struct BnCache {
    xhat: Tensor,
    inv_std: Vec<f64>,
    mode: Mode,
}

impl BatchNorm3d {
    pub fn new(channels: usize) -> BatchNorm3d {
        let mut scale = Tensor::zeros(&[channels]);
        scale.fill(1.0);
        let mut running_var = Tensor::zeros(&[channels]);
        running_var.fill(1.0);
        BatchNorm3d {
            scale: Param::new(scale),
            offset: Param::new(Tensor::zeros(&[channels])),
            running_mean: Tensor::zeros(&[channels]),
            running_var,
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    pub fn channels(&self) -> usize {
        self.scale.value.len()
    }

    /// Normalize per channel. Train mode uses batch statistics (biased
    /// variance) and folds them into the running estimates (unbiased
    /// variance, `running ← (1−momentum)·running + momentum·batch`);
    /// eval mode normalizes with the running estimates.
    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<(Tensor, BnCache)> {
        let (n, c, d, h, w) = dims5(x, "batchnorm3d input")?;
        if c != self.channels() {
            return Err(Error::argument(format!(
                "batchnorm3d over {} channels got input {:?}",
                self.channels(),
                x.dims()
            )));
        }
        if mode == Mode::Train && n < 2 {
            return Err(Error::argument(
                "train-mode batch normalization needs batch size >= 2 \
                 (batch variance is undefined for a single sample)",
            ));
        }
        let spatial = d * h * w;
        let count = (n * spatial) as f64;
        let mut y = Tensor::zeros(x.dims());
        let mut xhat = Tensor::zeros(x.dims());
        let mut inv_std = vec![0.0; c];

        for ch in 0..c {
            let (mean, var) = match mode {
                Mode::Train => {
                    let mut sum = 0.0;
                    for b in 0..n {
                        let base = (b * c + ch) * spatial;
                        sum += x.data()[base..base + spatial].iter().sum::<f64>();
                    }
                    let mean = sum / count;
                    let mut sq = 0.0;
                    for b in 0..n {
                        let base = (b * c + ch) * spatial;
                        for &v in &x.data()[base..base + spatial] {
                            let dv = v - mean;
                            sq += dv * dv;
                        }
                    }
                    let var = sq / count;
                    let unbiased = sq / (count - 1.0);
                    let m = self.momentum;
                    self.running_mean.data_mut()[ch] =
                        (1.0 - m) * self.running_mean.data()[ch] + m * mean;
                    self.running_var.data_mut()[ch] =
                        (1.0 - m) * self.running_var.data()[ch] + m * unbiased;
                    (mean, var)
                }
                Mode::Eval => (self.running_mean.data()[ch], self.running_var.data()[ch]),
            };
            let istd = 1.0 / (var + self.eps).sqrt();
            inv_std[ch] = istd;
            let (gamma, beta) = (self.scale.value.data()[ch], self.offset.value.data()[ch]);
            for b in 0..n {
                let base = (b * c + ch) * spatial;
                for i in base..base + spatial {
                    let xh = (x.data()[i] - mean) * istd;
                    xhat.data_mut()[i] = xh;
                    y.data_mut()[i] = gamma * xh + beta;
                }
            }
        }
        Ok((y, BnCache { xhat, inv_std, mode }))
    }

    /// Accumulates scale/offset gradients and returns the input gradient.
    ///
    /// Train mode differentiates through the batch statistics; eval mode
    /// treats the normalization as a fixed affine map.
    pub fn backward(&mut self, cache: &BnCache, d_y: &Tensor) -> Result<Tensor> {
        let (n, c, d, h, w) = dims5(d_y, "batchnorm3d upstream gradient")?;
        if d_y.dims() != cache.xhat.dims() {
            return Err(Error::argument(format!(
                "batchnorm3d backward shape mismatch: cached {:?} vs gradient {:?}",
                cache.xhat.dims(),
                d_y.dims()
            )));
        }
        let spatial = d * h * w;
        let count = (n * spatial) as f64;
        let mut d_x = Tensor::zeros(d_y.dims());

        for ch in 0..c {
            let mut sum_dy = 0.0;
            let mut sum_dy_xhat = 0.0;
            for b in 0..n {
                let base = (b * c + ch) * spatial;
                for i in base..base + spatial {
                    sum_dy += d_y.data()[i];
                    sum_dy_xhat += d_y.data()[i] * cache.xhat.data()[i];
                }
            }
            self.scale.grad.data_mut()[ch] += sum_dy_xhat;
            self.offset.grad.data_mut()[ch] += sum_dy;

            let gamma = self.scale.value.data()[ch];
            let istd = cache.inv_std[ch];
            match cache.mode {
                Mode::Train => {
                    let mean_dy = sum_dy / count;
                    let mean_dy_xhat = sum_dy_xhat / count;
                    for b in 0..n {
                        let base = (b * c + ch) * spatial;
                        for i in base..base + spatial {
                            d_x.data_mut()[i] = gamma
                                * istd
                                * (d_y.data()[i] - mean_dy - cache.xhat.data()[i] * mean_dy_xhat);
                        }
                    }
                }
                Mode::Eval => {
                    for b in 0..n {
                        let base = (b * c + ch) * spatial;
                        for i in base..base + spatial {
                            d_x.data_mut()[i] = gamma * istd * d_y.data()[i];
                        }
                    }
                }
            }
        }
        Ok(d_x)
    }
}

/// Fully connected layer `[N, in] → [N, out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Param,
    pub bias: Param,
}

impl Dense {
    /// Xavier-uniform weight init, zero bias.
    pub fn new(n_in: usize, n_out: usize, rng: &mut SplitMix64) -> Dense {
        let bound = (6.0 / (n_in + n_out) as f64).sqrt();
        let mut weight = Tensor::zeros(&[n_out, n_in]);
        for v in weight.data_mut() {
            *v = rng.uniform(-bound, bound);
        }
        Dense {
            weight: Param::new(weight),
            bias: Param::new(Tensor::zeros(&[n_out])),
        }
    }

    pub fn n_in(&self) -> usize {
        self.weight.value.dims()[1]
    }

    pub fn n_out(&self) -> usize {
        self.weight.value.dims()[0]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let [n, n_in] = *x.dims() else {
            return Err(Error::argument(format!(
                "dense input must be rank 2, got {:?}",
                x.dims()
            )));
        };
        if n_in != self.n_in() {
            return Err(Error::argument(format!(
                "dense expects {} inputs, got {:?}",
                self.n_in(),
                x.dims()
            )));
        }
        let (n_out, w) = (self.n_out(), self.weight.value.data());
        let mut y = Tensor::zeros(&[n, n_out]);
        for b in 0..n {
            for o in 0..n_out {
                let mut acc = self.bias.value.data()[o];
                let row = o * n_in;
                for i in 0..n_in {
                    acc += w[row + i] * x.data()[b * n_in + i];
                }
                y.data_mut()[b * n_out + o] = acc;
            }
        }
        Ok(y)
    }

    /// Accumulates weight/bias gradients and returns the input gradient.
    pub fn backward(&mut self, x: &Tensor, d_y: &Tensor) -> Result<Tensor> {
        let (n, n_in, n_out) = (x.dims()[0], self.n_in(), self.n_out());
        if d_y.dims() != [n, n_out] {
            return Err(Error::argument(format!(
                "dense upstream gradient must be [{n}, {n_out}], got {:?}",
                d_y.dims()
            )));
        }
        let mut d_x = Tensor::zeros(x.dims());
        for b in 0..n {
            for o in 0..n_out {
                let g = d_y.data()[b * n_out + o];
                self.bias.grad.data_mut()[o] += g;
                let row = o * n_in;
                for i in 0..n_in {
                    self.weight.grad.data_mut()[row + i] += g * x.data()[b * n_in + i];
                    d_x.data_mut()[b * n_in + i] += g * self.weight.value.data()[row + i];
                }
            }
        }
        Ok(d_x)
    }
}

/// Convolution layer owning its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3dLayer {
    pub weight: Param,
    pub bias: Param,
    pub stride: usize,
}

impl Conv3dLayer {
    /// He-uniform weight init (bound √(6/fan_in), fan_in = C_in·k³),
    /// zero bias.
    pub fn new(c_in: usize, c_out: usize, kernel: usize, stride: usize, rng: &mut SplitMix64) -> Conv3dLayer {
        let fan_in = (c_in * kernel * kernel * kernel) as f64;
        let bound = (6.0 / fan_in).sqrt();
        let mut weight = Tensor::zeros(&[c_out, c_in, kernel, kernel, kernel]);
        for v in weight.data_mut() {
            *v = rng.uniform(-bound, bound);
        }
        Conv3dLayer {
            weight: Param::new(weight),
            bias: Param::new(Tensor::zeros(&[c_out])),
            stride,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        conv3d(x, &self.weight.value, &self.bias.value, self.stride)
    }

    pub fn backward(&mut self, x: &Tensor, d_y: &Tensor) -> Result<Tensor> {
        let (d_x, d_w, d_b) = conv3d_backward(x, &self.weight.value, self.stride, d_y)?;
        self.weight.grad.add_assign(&d_w)?;
        self.bias.grad.add_assign(&d_b)?;
        Ok(d_x)
    }
}

/// Two 3³ conv+BN+ReLU stages plus a skip connection; the skip is the
/// identity when the shape is unchanged, otherwise a 1³ conv (with the
/// block's stride) followed by BN.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    pub conv1: Conv3dLayer,
    pub bn1: BatchNorm3d,
    pub conv2: Conv3dLayer,
    pub bn2: BatchNorm3d,
    pub projection: Option<(Conv3dLayer, BatchNorm3d)>,
}

/// Activations a residual block's backward pass needs.
pub struct BlockCache {
    x: Tensor,
    c1: BnCache,
    b1: Tensor,
    r1: Tensor,
    c2: BnCache,
    proj: Option<BnCache>,
    sum: Tensor,
}

impl ResidualBlock {
    pub fn new(c_in: usize, c_out: usize, stride: usize, rng: &mut SplitMix64) -> ResidualBlock {
        let projection = if c_in != c_out || stride != 1 {
            Some((
                Conv3dLayer::new(c_in, c_out, 1, stride, rng),
                BatchNorm3d::new(c_out),
            ))
        } else {
            None
        };
        ResidualBlock {
            conv1: Conv3dLayer::new(c_in, c_out, 3, stride, rng),
            bn1: BatchNorm3d::new(c_out),
            conv2: Conv3dLayer::new(c_out, c_out, 3, 1, rng),
            bn2: BatchNorm3d::new(c_out),
            projection,
        }
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<(Tensor, BlockCache)> {
        let c1_out = self.conv1.forward(x)?;
        let (b1, c1) = self.bn1.forward(&c1_out, mode)?;
        let r1 = relu(&b1);
        let c2_out = self.conv2.forward(&r1)?;
        let (b2, c2) = self.bn2.forward(&c2_out, mode)?;

        let (skip_out, proj) = match &mut self.projection {
            None => (x.clone(), None),
            Some((conv, bn)) => {
                let s = conv.forward(x)?;
                let (sb, sc) = bn.forward(&s, mode)?;
                (sb, Some(sc))
            }
        };

        let mut sum = b2;
        sum.add_assign(&skip_out)?;
        let y = relu(&sum);
        Ok((
            y,
            BlockCache {
                x: x.clone(),
                c1,
                b1,
                r1,
                c2,
                proj,
                sum,
            },
        ))
    }

    pub fn backward(&mut self, cache: &BlockCache, d_y: &Tensor) -> Result<Tensor> {
        let d_sum = relu_backward(&cache.sum, d_y);

        let d_c2 = self.bn2.backward(&cache.c2, &d_sum)?;
        let d_r1 = self.conv2.backward(&cache.r1, &d_c2)?;
        let d_b1 = relu_backward(&cache.b1, &d_r1);
        let d_c1 = self.bn1.backward(&cache.c1, &d_b1)?;
        let mut d_x = self.conv1.backward(&cache.x, &d_c1)?;

        let d_skip = match (&mut self.projection, &cache.proj) {
            (None, None) => d_sum,
            (Some((conv, bn)), Some(proj_cache)) => {
                let d_s = bn.backward(proj_cache, &d_sum)?;
                conv.backward(&cache.x, &d_s)?
            }
            _ => {
                return Err(Error::State(
                    "residual block cache does not match its projection".into(),
                ))
            }
        };
        d_x.add_assign(&d_skip)?;
        Ok(d_x)
    }
}

/// Which classifier consumes the network's feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    Quantum,
    Classical,
}

/// Shape of the convolutional front-end.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetConfig {
    /// Edge length of the cubic input volume, in voxels.
    pub input_side: usize,
    /// Output channels per stage; the first stage keeps full resolution,
    /// every later stage opens with a stride-2 block.
    pub channels: Vec<usize>,
    pub blocks_per_stage: usize,
    /// Length of the emitted feature vector (= qubit count for the
    /// quantum head).
    pub n_out: usize,
    pub head: HeadKind,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            input_side: 16,
            channels: vec![8, 16],
            blocks_per_stage: 1,
            n_out: 4,
            head: HeadKind::Quantum,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_side == 0 || self.n_out == 0 || self.blocks_per_stage == 0 {
            return Err(Error::argument("net config fields must be positive"));
        }
        if self.channels.is_empty() || self.channels.contains(&0) {
            return Err(Error::argument("net config needs at least one nonzero channel count"));
        }
        let down = 1usize << (self.channels.len() - 1);
        if self.input_side % down != 0 {
            return Err(Error::argument(format!(
                "input side {} must be divisible by {} (one stride-2 stage per extra channel entry)",
                self.input_side, down
            )));
        }
        Ok(())
    }
}

/// The residual network: stages of blocks, global average pooling, a
/// dense layer to `n_out` features, and a sigmoid squashing them into
/// [0, 1] so they can feed the angle encoding directly.
#[derive(Debug, Clone, PartialEq)]
pub struct ResNet3d {
    cfg: NetConfig,
    stages: Vec<Vec<ResidualBlock>>,
    dense: Dense,
    init_seed: u64,
}

/// Activations the network backward pass needs.
pub struct NetCache {
    blocks: Vec<Vec<BlockCache>>,
    pool_in_dims: Vec<usize>,
    pooled: Tensor,
    features: Tensor,
}

impl ResNet3d {
    pub fn new(cfg: NetConfig, seed: u64) -> Result<ResNet3d> {
        cfg.validate()?;
        let mut rng = SplitMix64::new(seed);
        let mut stages = Vec::new();
        let mut c_in = 1;
        for (s, &c_out) in cfg.channels.iter().enumerate() {
            let mut blocks = Vec::new();
            for b in 0..cfg.blocks_per_stage {
                let stride = if s > 0 && b == 0 { 2 } else { 1 };
                blocks.push(ResidualBlock::new(c_in, c_out, stride, &mut rng));
                c_in = c_out;
            }
            stages.push(blocks);
        }
        let dense = Dense::new(*cfg.channels.last().unwrap(), cfg.n_out, &mut rng);
        Ok(ResNet3d {
            cfg,
            stages,
            dense,
            init_seed: seed,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    pub fn dense_mut(&mut self) -> &mut Dense {
        &mut self.dense
    }

    /// Features in [0, 1], shape `[N, n_out]`, plus the backward cache.
    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<(Tensor, NetCache)> {
        let (_, c, d, h, w) = dims5(x, "network input")?;
        let s = self.cfg.input_side;
        if c != 1 || d != s || h != s || w != s {
            return Err(Error::argument(format!(
                "network input must be [N,1,{s},{s},{s}], got {:?}",
                x.dims()
            )));
        }
        let mut cur = x.clone();
        let mut blocks = Vec::new();
        for stage in &mut self.stages {
            let mut stage_caches = Vec::new();
            for block in stage.iter_mut() {
                let (out, cache) = block.forward(&cur, mode)?;
                stage_caches.push(cache);
                cur = out;
            }
            blocks.push(stage_caches);
        }
        let pool_in_dims = cur.dims().to_vec();
        let pooled = global_avg_pool(&cur)?;
        let logits = self.dense.forward(&pooled)?;
        let features = sigmoid(&logits);
        Ok((
            features.clone(),
            NetCache {
                blocks,
                pool_in_dims,
                pooled,
                features,
            },
        ))
    }

    /// Backpropagate `d_features` (∂L/∂features) through the network,
    /// accumulating every parameter gradient; returns ∂L/∂input.
    pub fn backward(&mut self, cache: &NetCache, d_features: &Tensor) -> Result<Tensor> {
        if d_features.dims() != cache.features.dims() {
            return Err(Error::argument(format!(
                "feature gradient must be {:?}, got {:?}",
                cache.features.dims(),
                d_features.dims()
            )));
        }
        let d_logits = sigmoid_backward(&cache.features, d_features);
        let d_pooled = self.dense.backward(&cache.pooled, &d_logits)?;
        let mut d_cur = global_avg_pool_backward(&cache.pool_in_dims, &d_pooled)?;
        for (stage, stage_caches) in self.stages.iter_mut().zip(&cache.blocks).rev() {
            for (block, block_cache) in stage.iter_mut().zip(stage_caches).rev() {
                d_cur = block.backward(block_cache, &d_cur)?;
            }
        }
        Ok(d_cur)
    }

    /// Visit every trainable parameter in a fixed declaration order
    /// (stable across runs; checkpoints and the optimizer rely on it).
    pub fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        for stage in &mut self.stages {
            for block in stage {
                f(&mut block.conv1.weight);
                f(&mut block.conv1.bias);
                f(&mut block.bn1.scale);
                f(&mut block.bn1.offset);
                f(&mut block.conv2.weight);
                f(&mut block.conv2.bias);
                f(&mut block.bn2.scale);
                f(&mut block.bn2.offset);
                if let Some((conv, bn)) = &mut block.projection {
                    f(&mut conv.weight);
                    f(&mut conv.bias);
                    f(&mut bn.scale);
                    f(&mut bn.offset);
                }
            }
        }
        f(&mut self.dense.weight);
        f(&mut self.dense.bias);
    }

    /// Visit every non-trainable state tensor (running statistics), in
    /// the same stable order used for persistence.
    pub fn visit_buffers(&mut self, f: &mut dyn FnMut(&mut Tensor)) {
        for stage in &mut self.stages {
            for block in stage {
                f(&mut block.bn1.running_mean);
                f(&mut block.bn1.running_var);
                f(&mut block.bn2.running_mean);
                f(&mut block.bn2.running_var);
                if let Some((_, bn)) = &mut block.projection {
                    f(&mut bn.running_mean);
                    f(&mut bn.running_var);
                }
            }
        }
    }

    pub fn zero_grad(&mut self) {
        self.visit_params(&mut |p| p.zero_grad());
    }

    pub fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |p| n += p.value.len());
        n
    }
}
