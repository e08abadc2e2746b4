//! Layer kinds used by the residual network, each with an exact analytic
//! backward pass.
//!
//! `forward` caches whatever `backward` needs; `infer` is the cache-free
//! path used by frozen models and must produce bit-identical outputs to
//! `forward` in [`Mode::Infer`].

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics, running statistics updated.
    Train,
    /// Running statistics only.
    Infer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Conv,
    BatchNorm,
    Relu,
    AvgPool,
    AddShortcut,
    GlobalAvgPool,
    FullyConnected,
}

/// Hyperparameters of one layer. Kernels are square.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl LayerSpec {
    pub fn conv(out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        Self {
            kind: LayerKind::Conv,
            out_channels,
            kernel,
            stride,
            padding,
        }
    }

    pub fn avg_pool(kernel: usize, stride: usize, padding: usize) -> Self {
        Self {
            kind: LayerKind::AvgPool,
            out_channels: 0,
            kernel,
            stride,
            padding,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel == 0 || self.stride == 0 {
            return Err(Error::Config(format!(
                "kernel and stride must be positive: {self:?}"
            )));
        }
        if self.kind == LayerKind::Conv && self.out_channels == 0 {
            return Err(Error::Config("conv needs at least one filter".into()));
        }
        Ok(())
    }

    /// `floor((n + 2·pad − K) / stride) + 1`, or an error when the window
    /// does not fit.
    pub fn output_extent(&self, n: usize) -> Result<usize> {
        let padded = n + 2 * self.padding;
        if padded < self.kernel {
            return Err(Error::dim("spatial extent", self.kernel, padded));
        }
        Ok((padded - self.kernel) / self.stride + 1)
    }
}

/// Trainable tensor with its gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self { value, grad }
    }
}

pub trait Layer {
    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor>;
    fn infer(&self, x: &Tensor) -> Result<Tensor>;
    /// Returns the input gradient and stores parameter gradients.
    fn backward(&mut self, dy: &Tensor) -> Result<Tensor>;
    fn params_mut(&mut self) -> Vec<&mut Param> {
        Vec::new()
    }
}

fn missing(layer: &str) -> Error {
    Error::Usage(format!("{layer} backward called without a cached forward pass"))
}

fn check_same_shape(dy: &Tensor, shape: &[usize], axis: &str) -> Result<()> {
    if dy.shape() != shape {
        return Err(Error::dim(axis, shape.iter().product(), dy.len()));
    }
    Ok(())
}

pub(crate) fn normal_tensor(shape: &[usize], std: f32, rng: &mut Rng) -> Tensor {
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = z as f32 * std;
    }
    t
}

// ---------------------------------------------------------------------------
// Convolution

struct ConvCache {
    in_dims: [usize; 4],
    out_hw: (usize, usize),
    cols: Vec<Vec<f32>>,
}

/// Cross-correlation without bias (every conv is followed by batch norm).
pub struct Conv2d {
    spec: LayerSpec,
    in_channels: usize,
    pub weight: Param,
    /// When false, `backward` skips the input gradient and returns zeros.
    pub propagate_input_grad: bool,
    cache: Option<ConvCache>,
}

impl Conv2d {
    pub fn new(in_channels: usize, spec: LayerSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        if spec.kind != LayerKind::Conv {
            return Err(Error::Config(format!("not a conv spec: {spec:?}")));
        }
        let fan_in = in_channels * spec.kernel * spec.kernel;
        let std = (2.0 / fan_in as f32).sqrt();
        let w = normal_tensor(
            &[spec.out_channels, in_channels, spec.kernel, spec.kernel],
            std,
            rng,
        );
        Ok(Self {
            spec,
            in_channels,
            weight: Param::new(w),
            propagate_input_grad: true,
            cache: None,
        })
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    fn geometry(&self, x: &Tensor) -> Result<([usize; 4], usize, usize)> {
        let dims = x.dims4()?;
        if dims[1] != self.in_channels {
            return Err(Error::dim("input channels", self.in_channels, dims[1]));
        }
        let ho = self.spec.output_extent(dims[2])?;
        let wo = self.spec.output_extent(dims[3])?;
        Ok((dims, ho, wo))
    }

    fn run(&self, x: &Tensor, keep_cols: bool) -> Result<(Tensor, Vec<Vec<f32>>)> {
        let ([b, c, h, w], ho, wo) = self.geometry(x)?;
        let s = self.spec;
        let ckk = c * s.kernel * s.kernel;
        let plane = c * h * w;
        let out_plane = s.out_channels * ho * wo;
        let mut out = vec![0.0f32; b * out_plane];
        let weight = self.weight.value.data();
        let cols: Vec<Vec<f32>> = out
            .par_chunks_mut(out_plane)
            .zip(x.data().par_chunks(plane))
            .map(|(dst, src)| {
                let cols = im2col(src, c, h, w, &s, ho, wo);
                gemm(s.out_channels, ckk, ho * wo, weight, false, &cols, false, 0.0, dst);
                if keep_cols {
                    cols
                } else {
                    Vec::new()
                }
            })
            .collect();
        Ok((Tensor::new(vec![b, s.out_channels, ho, wo], out)?, cols))
    }
}

impl Layer for Conv2d {
    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor> {
        let (out, cols) = self.run(x, true)?;
        let d = out.dims4()?;
        self.cache = Some(ConvCache {
            in_dims: x.dims4()?,
            out_hw: (d[2], d[3]),
            cols,
        });
        Ok(out)
    }

    fn infer(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.run(x, false)?.0)
    }

    fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let cache = self.cache.take().ok_or_else(|| missing("conv"))?;
        let [b, c, h, w] = cache.in_dims;
        let (ho, wo) = cache.out_hw;
        let s = self.spec;
        let cout = s.out_channels;
        check_same_shape(dy, &[b, cout, ho, wo], "conv upstream gradient")?;
        let ckk = c * s.kernel * s.kernel;
        let hw = ho * wo;

        // Weight gradient: rows split into fixed chunks, items summed in
        // batch order inside each chunk.
        const ROWS: usize = 64;
        let dy_data = dy.data();
        self.weight
            .grad
            .data_mut()
            .par_chunks_mut(ROWS * ckk)
            .enumerate()
            .for_each(|(chunk, dst)| {
                let r0 = chunk * ROWS;
                let rows = dst.len() / ckk;
                dst.fill(0.0);
                for (item, cols) in cache.cols.iter().enumerate() {
                    let g = &dy_data[item * cout * hw + r0 * hw..item * cout * hw + (r0 + rows) * hw];
                    gemm(rows, hw, ckk, g, false, cols, true, 1.0, dst);
                }
            });

        let mut dx = vec![0.0f32; b * c * h * w];
        if self.propagate_input_grad {
            let weight = self.weight.value.data();
            dx.par_chunks_mut(c * h * w)
                .zip(dy_data.par_chunks(cout * hw))
                .for_each(|(dst, g)| {
                    let mut dcols = vec![0.0f32; ckk * hw];
                    gemm(ckk, cout, hw, weight, true, g, false, 0.0, &mut dcols);
                    col2im(&dcols, c, h, w, &s, ho, wo, dst);
                });
        }
        Tensor::new(vec![b, c, h, w], dx)
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight]
    }
}

/// Output columns `ox` whose tap `ix = ox·stride + k − pad` lands inside
/// `0..n`.
fn valid_range(k: usize, s: &LayerSpec, n: usize, n_out: usize) -> (usize, usize) {
    let lo = s.padding.saturating_sub(k).div_ceil(s.stride);
    let hi = if n + s.padding > k {
        ((n + s.padding - k - 1) / s.stride + 1).min(n_out)
    } else {
        0
    };
    (lo.min(hi), hi)
}

fn im2col(src: &[f32], c: usize, h: usize, w: usize, s: &LayerSpec, ho: usize, wo: usize) -> Vec<f32> {
    let k = s.kernel;
    let mut cols = vec![0.0f32; c * k * k * ho * wo];
    for ci in 0..c {
        let plane = &src[ci * h * w..(ci + 1) * h * w];
        for ky in 0..k {
            let (oy_lo, oy_hi) = valid_range(ky, s, h, ho);
            for kx in 0..k {
                let (ox_lo, ox_hi) = valid_range(kx, s, w, wo);
                let row = (ci * k + ky) * k + kx;
                let dst = &mut cols[row * ho * wo..(row + 1) * ho * wo];
                for oy in oy_lo..oy_hi {
                    let iy = oy * s.stride + ky - s.padding;
                    let src_row = &plane[iy * w..(iy + 1) * w];
                    let dst_row = &mut dst[oy * wo..(oy + 1) * wo];
                    let ix0 = ox_lo * s.stride + kx - s.padding;
                    if s.stride == 1 {
                        dst_row[ox_lo..ox_hi].copy_from_slice(&src_row[ix0..ix0 + ox_hi - ox_lo]);
                    } else {
                        for (d, v) in dst_row[ox_lo..ox_hi]
                            .iter_mut()
                            .zip(src_row[ix0..].iter().step_by(s.stride))
                        {
                            *d = *v;
                        }
                    }
                }
            }
        }
    }
    cols
}

#[allow(clippy::too_many_arguments)]
fn col2im(cols: &[f32], c: usize, h: usize, w: usize, s: &LayerSpec, ho: usize, wo: usize, dst: &mut [f32]) {
    let k = s.kernel;
    for ci in 0..c {
        let plane = &mut dst[ci * h * w..(ci + 1) * h * w];
        for ky in 0..k {
            let (oy_lo, oy_hi) = valid_range(ky, s, h, ho);
            for kx in 0..k {
                let (ox_lo, ox_hi) = valid_range(kx, s, w, wo);
                let row = (ci * k + ky) * k + kx;
                let src = &cols[row * ho * wo..(row + 1) * ho * wo];
                for oy in oy_lo..oy_hi {
                    let iy = oy * s.stride + ky - s.padding;
                    let dst_row = &mut plane[iy * w..(iy + 1) * w];
                    let src_row = &src[oy * wo + ox_lo..oy * wo + ox_hi];
                    let ix0 = ox_lo * s.stride + kx - s.padding;
                    for (d, v) in dst_row[ix0..].iter_mut().step_by(s.stride).zip(src_row) {
                        *d += *v;
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Batch normalisation

/// Per-channel affine parameters and running statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormState {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub epsilon: f32,
    pub momentum: f32,
}

impl BatchNormState {
    pub const EPSILON: f32 = 1e-5;
    pub const MOMENTUM: f32 = 0.1;

    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Param::new(Tensor::full(&[channels], 1.0)),
            beta: Param::new(Tensor::zeros(&[channels])),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], 1.0),
            epsilon: Self::EPSILON,
            momentum: Self::MOMENTUM,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.value.len()
    }
}

struct BnCache {
    dims: [usize; 4],
    x_hat: Vec<f32>,
    inv_std: Vec<f32>,
    mode: Mode,
}

pub struct BatchNorm2d {
    pub state: BatchNormState,
    cache: Option<BnCache>,
}

impl BatchNorm2d {
    pub fn new(channels: usize) -> Self {
        Self {
            state: BatchNormState::new(channels),
            cache: None,
        }
    }

    fn check(&self, x: &Tensor) -> Result<[usize; 4]> {
        let dims = x.dims4()?;
        if dims[1] != self.state.channels() {
            return Err(Error::dim("batch-norm channels", self.state.channels(), dims[1]));
        }
        Ok(dims)
    }

    fn running_inv_std(&self) -> Vec<f32> {
        let eps = self.state.epsilon;
        self.state
            .running_var
            .data()
            .iter()
            .map(|&v| 1.0 / (v + eps).sqrt())
            .collect()
    }

    /// Normalises with the given per-channel statistics; returns (y, x_hat).
    fn normalise(&self, x: &Tensor, mean: &[f32], inv_std: &[f32], keep: bool) -> (Vec<f32>, Vec<f32>) {
        let [_, c, h, w] = x.dims4().expect("checked");
        let hw = h * w;
        let gamma = self.state.gamma.value.data();
        let beta = self.state.beta.value.data();
        let mut y = vec![0.0f32; x.len()];
        let mut x_hat = if keep { vec![0.0f32; x.len()] } else { Vec::new() };
        for (i, (dst, src)) in y.chunks_mut(hw).zip(x.data().chunks(hw)).enumerate() {
            let ch = i % c;
            let (m, s, g, bt) = (mean[ch], inv_std[ch], gamma[ch], beta[ch]);
            if keep {
                let xh = &mut x_hat[i * hw..(i + 1) * hw];
                for (n, &v) in xh.iter_mut().zip(src) {
                    *n = (v - m) * s;
                }
                for (d, &n) in dst.iter_mut().zip(xh.iter()) {
                    *d = g * n + bt;
                }
            } else {
                for (d, &v) in dst.iter_mut().zip(src) {
                    *d = g * ((v - m) * s) + bt;
                }
            }
        }
        (y, x_hat)
    }
}

/// Sum of `f(v)` with eight f32 lanes flushed into f64 every 1024 values;
/// the order is fixed, so results are reproducible.
fn lane_sum(xs: &[f32], f: impl Fn(f32) -> f32) -> f64 {
    let mut total = 0.0f64;
    for block in xs.chunks(1024) {
        let mut lanes = [0.0f32; 8];
        let mut it = block.chunks_exact(8);
        for c in &mut it {
            for (l, &v) in lanes.iter_mut().zip(c) {
                *l += f(v);
            }
        }
        let tail: f32 = it.remainder().iter().map(|&v| f(v)).sum();
        total += lanes.iter().map(|&l| l as f64).sum::<f64>() + tail as f64;
    }
    total
}

fn lane_dot(a: &[f32], b: &[f32]) -> f64 {
    let mut total = 0.0f64;
    for (ba, bb) in a.chunks(1024).zip(b.chunks(1024)) {
        let mut lanes = [0.0f32; 8];
        let (mut ia, mut ib) = (ba.chunks_exact(8), bb.chunks_exact(8));
        for (ca, cb) in (&mut ia).zip(&mut ib) {
            for ((l, &x), &y) in lanes.iter_mut().zip(ca).zip(cb) {
                *l += x * y;
            }
        }
        let tail: f32 = ia.remainder().iter().zip(ib.remainder()).map(|(x, y)| x * y).sum();
        total += lanes.iter().map(|&l| l as f64).sum::<f64>() + tail as f64;
    }
    total
}

impl Layer for BatchNorm2d {
    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let dims = self.check(x)?;
        let [b, c, h, w] = dims;
        let hw = h * w;
        let (mean, inv_std) = match mode {
            Mode::Infer => (self.state.running_mean.data().to_vec(), self.running_inv_std()),
            Mode::Train => {
                let n = (b * hw) as f64;
                let mut sum = vec![0.0f64; c];
                let mut sq = vec![0.0f64; c];
                for (i, plane) in x.data().chunks(hw).enumerate() {
                    sum[i % c] += lane_sum(plane, |v| v);
                }
                let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
                for (i, plane) in x.data().chunks(hw).enumerate() {
                    let m = mean[i % c] as f32;
                    sq[i % c] += lane_sum(plane, |v| (v - m) * (v - m));
                }
                let var: Vec<f64> = sq.iter().map(|s| s / n).collect();
                let alpha = self.state.momentum;
                let unbias = if n > 1.0 { n / (n - 1.0) } else { 1.0 };
                for ch in 0..c {
                    let rm = &mut self.state.running_mean.data_mut()[ch];
                    *rm = (1.0 - alpha) * *rm + alpha * mean[ch] as f32;
                    let rv = &mut self.state.running_var.data_mut()[ch];
                    *rv = (1.0 - alpha) * *rv + alpha * (var[ch] * unbias) as f32;
                }
                let eps = self.state.epsilon as f64;
                (
                    mean.iter().map(|&m| m as f32).collect(),
                    var.iter().map(|&v| (1.0 / (v + eps).sqrt()) as f32).collect(),
                )
            }
        };
        let (y, x_hat) = self.normalise(x, &mean, &inv_std, true);
        self.cache = Some(BnCache {
            dims,
            x_hat,
            inv_std,
            mode,
        });
        Tensor::new(dims.to_vec(), y)
    }

    fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let dims = self.check(x)?;
        let (y, _) = self.normalise(x, self.state.running_mean.data(), &self.running_inv_std(), false);
        Tensor::new(dims.to_vec(), y)
    }

    fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let cache = self.cache.take().ok_or_else(|| missing("batch-norm"))?;
        let [b, c, h, w] = cache.dims;
        check_same_shape(dy, &cache.dims, "batch-norm upstream gradient")?;
        let hw = h * w;
        let mut sum_dy = vec![0.0f64; c];
        let mut sum_dy_xhat = vec![0.0f64; c];
        for (i, (g, xh)) in dy.data().chunks(hw).zip(cache.x_hat.chunks(hw)).enumerate() {
            let ch = i % c;
            sum_dy[ch] += lane_sum(g, |v| v);
            sum_dy_xhat[ch] += lane_dot(g, xh);
        }
        for ch in 0..c {
            self.state.gamma.grad.data_mut()[ch] = sum_dy_xhat[ch] as f32;
            self.state.beta.grad.data_mut()[ch] = sum_dy[ch] as f32;
        }
        let gamma = self.state.gamma.value.data();
        let n = (b * hw) as f32;
        let mut dx = vec![0.0f32; dy.len()];
        for (i, ((dst, g), xh)) in dx
            .chunks_mut(hw)
            .zip(dy.data().chunks(hw))
            .zip(cache.x_hat.chunks(hw))
            .enumerate()
        {
            let ch = i % c;
            let scale = gamma[ch] * cache.inv_std[ch];
            match cache.mode {
                Mode::Infer => {
                    for (d, &gv) in dst.iter_mut().zip(g) {
                        *d = scale * gv;
                    }
                }
                Mode::Train => {
                    let (sd, sdx) = (sum_dy[ch] as f32, sum_dy_xhat[ch] as f32);
                    let k = scale / n;
                    for ((d, &gv), &x) in dst.iter_mut().zip(g).zip(xh) {
                        *d = k * (n * gv - sd - x * sdx);
                    }
                }
            }
        }
        Tensor::new(cache.dims.to_vec(), dx)
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.state.gamma, &mut self.state.beta]
    }
}

// ---------------------------------------------------------------------------
// Element-wise and pooling layers

#[derive(Default)]
pub struct Relu {
    output: Option<Tensor>,
}

impl Layer for Relu {
    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor> {
        let y = self.infer(x)?;
        self.output = Some(y.clone());
        Ok(y)
    }

    fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let data = x.data().iter().map(|&v| v.max(0.0)).collect();
        Tensor::new(x.shape().to_vec(), data)
    }

    fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let y = self.output.take().ok_or_else(|| missing("relu"))?;
        check_same_shape(dy, y.shape(), "relu upstream gradient")?;
        let data = dy
            .data()
            .iter()
            .zip(y.data())
            .map(|(&g, &out)| if out > 0.0 { g } else { 0.0 })
            .collect();
        Tensor::new(y.shape().to_vec(), data)
    }
}

/// Average pooling; padded taps count as zeros in the K² divisor.
pub struct AvgPool2d {
    spec: LayerSpec,
    in_dims: Option<[usize; 4]>,
}

impl AvgPool2d {
    pub fn new(spec: LayerSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec, in_dims: None })
    }
}

impl Layer for AvgPool2d {
    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor> {
        self.in_dims = Some(x.dims4()?);
        self.infer(x)
    }

    fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let [b, c, h, w] = x.dims4()?;
        let s = self.spec;
        let (ho, wo) = (s.output_extent(h)?, s.output_extent(w)?);
        let norm = 1.0 / (s.kernel * s.kernel) as f32;
        let mut out = vec![0.0f32; b * c * ho * wo];
        if s.padding == 0 {
            for (dst, src) in out.chunks_mut(ho * wo).zip(x.data().chunks(h * w)) {
                for (oy, drow) in dst.chunks_mut(wo).enumerate() {
                    for ky in 0..s.kernel {
                        let row = &src[(oy * s.stride + ky) * w..][..w];
                        for (ox, d) in drow.iter_mut().enumerate() {
                            *d += row[ox * s.stride..ox * s.stride + s.kernel].iter().sum::<f32>();
                        }
                    }
                    for d in drow.iter_mut() {
                        *d *= norm;
                    }
                }
            }
            return Tensor::new(vec![b, c, ho, wo], out);
        }
        for (dst, src) in out.chunks_mut(ho * wo).zip(x.data().chunks(h * w)) {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = 0.0f32;
                    for ky in 0..s.kernel {
                        let iy = (oy * s.stride + ky) as isize - s.padding as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..s.kernel {
                            let ix = (ox * s.stride + kx) as isize - s.padding as isize;
                            if ix >= 0 && ix < w as isize {
                                acc += src[iy as usize * w + ix as usize];
                            }
                        }
                    }
                    dst[oy * wo + ox] = acc * norm;
                }
            }
        }
        Tensor::new(vec![b, c, ho, wo], out)
    }

    fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let [b, c, h, w] = self.in_dims.take().ok_or_else(|| missing("avg-pool"))?;
        let s = self.spec;
        let (ho, wo) = (s.output_extent(h)?, s.output_extent(w)?);
        check_same_shape(dy, &[b, c, ho, wo], "avg-pool upstream gradient")?;
        let norm = 1.0 / (s.kernel * s.kernel) as f32;
        let mut dx = vec![0.0f32; b * c * h * w];
        if s.padding == 0 {
            for (dst, g) in dx.chunks_mut(h * w).zip(dy.data().chunks(ho * wo)) {
                for (oy, grow) in g.chunks(wo).enumerate() {
                    for ky in 0..s.kernel {
                        let row = &mut dst[(oy * s.stride + ky) * w..][..w];
                        for (ox, &gv) in grow.iter().enumerate() {
                            let v = gv * norm;
                            for d in &mut row[ox * s.stride..ox * s.stride + s.kernel] {
                                *d += v;
                            }
                        }
                    }
                }
            }
            return Tensor::new(vec![b, c, h, w], dx);
        }
        for (dst, g) in dx.chunks_mut(h * w).zip(dy.data().chunks(ho * wo)) {
            for oy in 0..ho {
                for ox in 0..wo {
                    let v = g[oy * wo + ox] * norm;
                    for ky in 0..s.kernel {
                        let iy = (oy * s.stride + ky) as isize - s.padding as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..s.kernel {
                            let ix = (ox * s.stride + kx) as isize - s.padding as isize;
                            if ix >= 0 && ix < w as isize {
                                dst[iy as usize * w + ix as usize] += v;
                            }
                        }
                    }
                }
            }
        }
        Tensor::new(vec![b, c, h, w], dx)
    }
}

/// Mean over the spatial axes: (B, C, H, W) → (B, C).
#[derive(Default)]
pub struct GlobalAvgPool {
    in_dims: Option<[usize; 4]>,
}

impl Layer for GlobalAvgPool {
    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor> {
        self.in_dims = Some(x.dims4()?);
        self.infer(x)
    }

    fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let [b, c, h, w] = x.dims4()?;
        let n = (h * w) as f32;
        let data = x
            .data()
            .chunks(h * w)
            .map(|p| p.iter().sum::<f32>() / n)
            .collect();
        Tensor::new(vec![b, c], data)
    }

    fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let [b, c, h, w] = self.in_dims.take().ok_or_else(|| missing("global-avg-pool"))?;
        check_same_shape(dy, &[b, c], "global-avg-pool upstream gradient")?;
        let n = (h * w) as f32;
        let mut dx = Vec::with_capacity(b * c * h * w);
        for &g in dy.data() {
            dx.extend(std::iter::repeat_n(g / n, h * w));
        }
        Tensor::new(vec![b, c, h, w], dx)
    }
}

/// `y = x·Wᵀ + b` with W shaped (out, in).
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
    input: Option<Tensor>,
}

impl Linear {
    pub fn new(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        let std = (2.0 / inputs as f32).sqrt();
        Self {
            weight: Param::new(normal_tensor(&[outputs, inputs], std, rng)),
            bias: Param::new(Tensor::zeros(&[outputs])),
            input: None,
        }
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.shape()[1]
    }
}

impl Layer for Linear {
    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor> {
        let y = self.infer(x)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let [b, inputs] = x.dims2()?;
        if inputs != self.inputs() {
            return Err(Error::dim("fully-connected inputs", self.inputs(), inputs));
        }
        let out = self.outputs();
        let mut y = vec![0.0f32; b * out];
        for row in y.chunks_mut(out) {
            row.copy_from_slice(self.bias.value.data());
        }
        gemm(b, inputs, out, x.data(), false, self.weight.value.data(), true, 1.0, &mut y);
        Tensor::new(vec![b, out], y)
    }

    fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let x = self.input.take().ok_or_else(|| missing("fully-connected"))?;
        let [b, inputs] = x.dims2()?;
        let out = self.outputs();
        check_same_shape(dy, &[b, out], "fully-connected upstream gradient")?;
        gemm(out, b, inputs, dy.data(), true, x.data(), false, 0.0, self.weight.grad.data_mut());
        let db = self.bias.grad.data_mut();
        db.fill(0.0);
        for row in dy.data().chunks(out) {
            for (d, &g) in db.iter_mut().zip(row) {
                *d += g;
            }
        }
        let mut dx = vec![0.0f32; b * inputs];
        gemm(b, out, inputs, dy.data(), false, self.weight.value.data(), false, 0.0, &mut dx);
        Tensor::new(vec![b, inputs], dx)
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Residual sum of the main path and the (projected) shortcut. Its backward
/// hands the upstream gradient to both operands unchanged.
pub fn add_shortcut(main: &Tensor, shortcut: &Tensor) -> Result<Tensor> {
    if main.shape() != shortcut.shape() {
        return Err(Error::dim("shortcut", main.len(), shortcut.len()));
    }
    let data = main.data().iter().zip(shortcut.data()).map(|(a, b)| a + b).collect();
    Tensor::new(main.shape().to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn scalar_conv() {
        let mut r = rng::stream(0, &[]);
        let mut conv = Conv2d::new(1, LayerSpec::conv(1, 1, 1, 0), &mut r).unwrap();
        conv.weight.value = Tensor::full(&[1, 1, 1, 1], 2.0);
        let y = conv.infer(&Tensor::full(&[1, 1, 3, 3], 1.0)).unwrap();
        assert_eq!(y.shape(), &[1, 1, 3, 3]);
        assert!(y.data().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn stem_conv_shape() {
        let mut r = rng::stream(0, &[]);
        let conv = Conv2d::new(1, LayerSpec::conv(64, 7, 2, 3), &mut r).unwrap();
        let y = conv.infer(&Tensor::zeros(&[1, 1, 242, 242])).unwrap();
        assert_eq!(y.shape(), &[1, 64, 121, 121]);
    }

    #[test]
    fn conv_channel_mismatch_names_axis() {
        let mut r = rng::stream(0, &[]);
        let conv = Conv2d::new(2, LayerSpec::conv(4, 3, 1, 1), &mut r).unwrap();
        match conv.infer(&Tensor::zeros(&[1, 3, 5, 5])) {
            Err(Error::Dimension { axis, expected: 2, actual: 3 }) => assert_eq!(axis, "input channels"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn relu_backward_cases() {
        let mut relu = Relu::default();
        relu.forward(&Tensor::new(vec![2], vec![-1.0, 2.0]).unwrap(), Mode::Train).unwrap();
        let dx = relu.backward(&Tensor::new(vec![2], vec![5.0, 3.0]).unwrap()).unwrap();
        assert_eq!(dx.data(), &[0.0, 3.0]);
    }

    #[test]
    fn backward_without_forward_is_usage_error() {
        let mut relu = Relu::default();
        assert!(matches!(relu.backward(&Tensor::zeros(&[1])), Err(Error::Usage(_))));
        let mut bn = BatchNorm2d::new(2);
        assert!(matches!(bn.backward(&Tensor::zeros(&[1, 2, 1, 1])), Err(Error::Usage(_))));
    }

    #[test]
    fn batchnorm_identity_statistics() {
        let bn = BatchNorm2d::new(2);
        let x = Tensor::new(vec![1, 2, 1, 2], vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        let y = bn.infer(&x).unwrap();
        let s = (1.0f32 + 1e-5).sqrt();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b / s).abs() < 1e-6);
        }
    }

    #[test]
    fn batchnorm_train_normalises_and_updates_running_mean() {
        let mut bn = BatchNorm2d::new(1);
        bn.state.gamma.value = Tensor::full(&[1], 2.0);
        bn.state.beta.value = Tensor::full(&[1], 0.5);
        let x1 = Tensor::new(vec![2, 1, 1, 2], vec![1.0, 2.0, 3.0, 6.0]).unwrap();
        let y = bn.forward(&x1, Mode::Train).unwrap();
        let mean: f64 = y.data().iter().map(|&v| v as f64).sum::<f64>() / 4.0;
        let var: f64 = y.data().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((mean - 0.5).abs() < 1e-4);
        // variance of the normalised values is var/(var+eps), var = 3.5
        assert!((var - 4.0 * 3.5 / (3.5 + 1e-5)).abs() < 1e-4);
        let x2 = Tensor::new(vec![2, 1, 1, 2], vec![0.0, 0.0, 4.0, 4.0]).unwrap();
        bn.forward(&x2, Mode::Train).unwrap();
        // m1 = 0.9*0 + 0.1*3 = 0.3; m2 = 0.9*0.3 + 0.1*2 = 0.47
        assert!((bn.state.running_mean.data()[0] - 0.47).abs() < 1e-6);
        // unbiased: v1 = 0.9 + 0.1*(3.5*4/3), v2 = 0.9*v1 + 0.1*(4*4/3)
        let v1 = 0.9 + 0.1 * (3.5 * 4.0 / 3.0);
        let v2 = 0.9 * v1 + 0.1 * (4.0 * 4.0 / 3.0);
        assert!((bn.state.running_var.data()[0] as f64 - v2).abs() < 1e-5);
    }

    #[test]
    fn batchnorm_single_item_zero_variance() {
        let mut bn = BatchNorm2d::new(1);
        let y = bn.forward(&Tensor::full(&[1, 1, 1, 1], 3.0), Mode::Train).unwrap();
        assert_eq!(y.data(), &[0.0]);
    }

    #[test]
    fn infer_matches_forward_infer_bitwise() {
        let mut r = rng::stream(3, &[]);
        let x = normal_tensor(&[2, 3, 6, 6], 1.0, &mut r);
        let mut conv = Conv2d::new(3, LayerSpec::conv(4, 3, 2, 1), &mut r).unwrap();
        assert_eq!(conv.infer(&x).unwrap(), conv.forward(&x, Mode::Infer).unwrap());
        let mut bn = BatchNorm2d::new(3);
        bn.state.running_mean = normal_tensor(&[3], 1.0, &mut r);
        assert_eq!(bn.infer(&x).unwrap(), bn.forward(&x, Mode::Infer).unwrap());
    }

    #[test]
    fn pool_shapes() {
        let pool = AvgPool2d::new(LayerSpec::avg_pool(3, 2, 0)).unwrap();
        assert_eq!(pool.infer(&Tensor::zeros(&[1, 2, 121, 121])).unwrap().shape(), &[1, 2, 60, 60]);
        let y = GlobalAvgPool::default().infer(&Tensor::full(&[2, 3, 4, 4], 2.0)).unwrap();
        assert_eq!(y.shape(), &[2, 3]);
        assert!(y.data().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn output_extent_formula() {
        let spec = LayerSpec::conv(1, 3, 2, 1);
        assert_eq!(spec.output_extent(15).unwrap(), 8);
        assert!(LayerSpec::conv(1, 7, 1, 0).output_extent(3).is_err());
        assert!(LayerSpec::conv(1, 0, 1, 0).validate().is_err());
    }
}
