#![allow(dead_code)]

//! Finite-difference oracle: an independent f64 implementation of every
//! layer and of the composed network, differenced centrally with h = 1e-3
//! and compared with the analytic f32 gradients by norm-wise relative
//! error.
//!
//! The reference network records its ReLU activation pattern at the base
//! point and replays it for the perturbed evaluations, so each difference
//! quotient stays inside one linear region of the ReLUs.

use std::collections::HashMap;

use osv_core::nn::{
    softmax_cross_entropy, AvgPool2d, BatchNorm2d, Conv2d, GlobalAvgPool, Layer, LayerSpec, Linear, Mode, Relu,
    Tensor,
};
use osv_core::resnet::{ResNetConfig, ResNetModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-3;
pub const TOL: f64 = 1e-4;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(r: &mut ChaCha8Rng, n: usize, lo: f32, hi: f32) -> Vec<f32> {
    (0..n).map(|_| r.random_range(lo..hi)).collect()
}

fn to64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn: f64 = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    diff / na.max(nn).max(1e-12)
}

/// Central differences of `f` at every coordinate of `x` listed in `idx`.
fn numeric_grad(x: &[f64], idx: &[usize], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    idx.iter()
        .map(|&i| {
            let orig = p[i];
            p[i] = orig + H;
            let up = f(&p);
            p[i] = orig - H;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * H)
        })
        .collect()
}

fn all(n: usize) -> Vec<usize> {
    (0..n).collect()
}

fn pick(v: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| v[i]).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Named relative errors collected by a check.
pub type Report = Vec<(String, f64)>;

fn record(out: &mut Report, what: impl Into<String>, analytic: &[f64], numeric: &[f64]) {
    out.push((what.into(), rel_err(analytic, numeric)));
}

/// Naive f64 layer implementations on (B, C, H, W) arrays.
mod reference {
    #[derive(Clone, Debug)]
    pub struct T4 {
        pub dims: [usize; 4],
        pub data: Vec<f64>,
    }

    impl T4 {
        pub fn at(&self, b: usize, c: usize, y: usize, x: usize) -> f64 {
            let [_, cc, h, w] = self.dims;
            self.data[((b * cc + c) * h + y) * w + x]
        }
    }

    pub fn conv(x: &T4, w: &[f64], cout: usize, k: usize, stride: usize, pad: usize) -> T4 {
        let [b, c, h, wd] = x.dims;
        let ho = (h + 2 * pad - k) / stride + 1;
        let wo = (wd + 2 * pad - k) / stride + 1;
        let mut out = vec![0.0; b * cout * ho * wo];
        for n in 0..b {
            for o in 0..cout {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let mut acc = 0.0;
                        for ci in 0..c {
                            for ky in 0..k {
                                for kx in 0..k {
                                    let iy = (oy * stride + ky) as isize - pad as isize;
                                    let ix = (ox * stride + kx) as isize - pad as isize;
                                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                        continue;
                                    }
                                    acc += w[((o * c + ci) * k + ky) * k + kx] * x.at(n, ci, iy as usize, ix as usize);
                                }
                            }
                        }
                        out[((n * cout + o) * ho + oy) * wo + ox] = acc;
                    }
                }
            }
        }
        T4 { dims: [b, cout, ho, wo], data: out }
    }

    /// Batch norm with batch statistics (biased variance).
    pub fn bn_train(x: &T4, gamma: &[f64], beta: &[f64], eps: f64) -> T4 {
        let [b, c, h, w] = x.dims;
        let n = (b * h * w) as f64;
        let mut out = x.clone();
        for ch in 0..c {
            let vals: Vec<f64> = (0..b)
                .flat_map(|i| (0..h * w).map(move |j| (i, j)))
                .map(|(i, j)| x.data[(i * c + ch) * h * w + j])
                .collect();
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let inv = 1.0 / (var + eps).sqrt();
            for i in 0..b {
                for j in 0..h * w {
                    let p = (i * c + ch) * h * w + j;
                    out.data[p] = gamma[ch] * (x.data[p] - mean) * inv + beta[ch];
                }
            }
        }
        out
    }

    pub fn bn_infer(x: &T4, gamma: &[f64], beta: &[f64], mean: &[f64], var: &[f64], eps: f64) -> T4 {
        let [_, c, h, w] = x.dims;
        let mut out = x.clone();
        for (p, v) in out.data.iter_mut().enumerate() {
            let ch = (p / (h * w)) % c;
            *v = gamma[ch] * (*v - mean[ch]) / (var[ch] + eps).sqrt() + beta[ch];
        }
        out
    }

    /// ReLU whose active set is recorded on the first call and replayed
    /// afterwards.
    pub struct Masks {
        pub record: bool,
        pub masks: Vec<Vec<bool>>,
        pub next: usize,
    }

    impl Masks {
        pub fn recording() -> Self {
            Self { record: true, masks: Vec::new(), next: 0 }
        }

        pub fn replay(mut self) -> Self {
            self.record = false;
            self
        }

        pub fn relu(&mut self, x: &T4) -> T4 {
            if self.record {
                self.masks.push(x.data.iter().map(|&v| v > 0.0).collect());
            }
            let m = &self.masks[self.next];
            self.next += 1;
            T4 {
                dims: x.dims,
                data: x.data.iter().zip(m).map(|(&v, &on)| if on { v } else { 0.0 }).collect(),
            }
        }
    }

    pub fn avg_pool(x: &T4, k: usize, stride: usize, pad: usize) -> T4 {
        let [b, c, h, w] = x.dims;
        let ho = (h + 2 * pad - k) / stride + 1;
        let wo = (w + 2 * pad - k) / stride + 1;
        let mut out = vec![0.0; b * c * ho * wo];
        for n in 0..b {
            for ch in 0..c {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let mut acc = 0.0;
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy >= 0 && ix >= 0 && iy < h as isize && ix < w as isize {
                                    acc += x.at(n, ch, iy as usize, ix as usize);
                                }
                            }
                        }
                        out[((n * c + ch) * ho + oy) * wo + ox] = acc / (k * k) as f64;
                    }
                }
            }
        }
        T4 { dims: [b, c, ho, wo], data: out }
    }

    pub fn gap(x: &T4) -> Vec<f64> {
        let [_, _, h, w] = x.dims;
        x.data.chunks(h * w).map(|p| p.iter().sum::<f64>() / (h * w) as f64).collect()
    }

    pub fn linear(x: &[f64], batch: usize, w: &[f64], bias: &[f64]) -> Vec<f64> {
        let out = bias.len();
        let inputs = x.len() / batch;
        let mut y = vec![0.0; batch * out];
        for n in 0..batch {
            for o in 0..out {
                y[n * out + o] = bias[o] + (0..inputs).map(|i| w[o * inputs + i] * x[n * inputs + i]).sum::<f64>();
            }
        }
        y
    }

    pub fn cross_entropy(logits: &[f64], labels: &[usize]) -> f64 {
        let classes = logits.len() / labels.len();
        let mut total = 0.0;
        for (row, &l) in logits.chunks(classes).zip(labels) {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            total += lse - row[l];
        }
        total / labels.len() as f64
    }
}

use reference::T4;

fn t4(dims: [usize; 4], data: &[f64]) -> T4 {
    T4 { dims, data: data.to_vec() }
}

fn check_conv(out: &mut Report, seed: u64, dims: [usize; 4], cout: usize, k: usize, stride: usize, pad: usize) {
    let mut r = rng(seed);
    let x = uniform(&mut r, dims.iter().product(), -1.0, 1.0);
    let spec = LayerSpec::conv(cout, k, stride, pad);
    let mut conv = Conv2d::new(dims[1], spec, &mut osv_core::rng::stream(seed, &[1])).unwrap();
    let xt = Tensor::new(dims.to_vec(), x.clone()).unwrap();
    let y = conv.forward(&xt, Mode::Train).unwrap();
    let up = uniform(&mut r, y.len(), -1.0, 1.0);
    let dx = conv.backward(&Tensor::new(y.shape().to_vec(), up.clone()).unwrap()).unwrap();
    let (x64, w64, up64) = (to64(&x), to64(conv.weight.value.data()), to64(&up));
    let num_x = numeric_grad(&x64, &all(x64.len()), |p| {
        dot(&reference::conv(&t4(dims, p), &w64, cout, k, stride, pad).data, &up64)
    });
    let num_w = numeric_grad(&w64, &all(w64.len()), |p| {
        dot(&reference::conv(&t4(dims, &x64), p, cout, k, stride, pad).data, &up64)
    });
    let what = format!("conv k{k} s{stride} p{pad}");
    record(out, format!("{what} input"), &to64(dx.data()), &num_x);
    record(out, format!("{what} weight"), &to64(conv.weight.grad.data()), &num_w);
}

pub fn conv_checks() -> Report {
    let mut out = Report::new();
    check_conv(&mut out, 1, [2, 3, 7, 7], 4, 3, 2, 1);
    check_conv(&mut out, 2, [2, 2, 6, 6], 3, 3, 1, 1);
    check_conv(&mut out, 3, [1, 1, 9, 9], 2, 7, 2, 3);
    check_conv(&mut out, 4, [2, 3, 6, 6], 4, 1, 2, 0);
    out
}

pub fn batchnorm_checks() -> Report {
    let mut out = Report::new();
    let dims = [3, 4, 3, 3];
    let mut r = rng(10);
    let x = uniform(&mut r, dims.iter().product(), -2.0, 2.0);
    let mut bn = BatchNorm2d::new(4);
    bn.state.gamma.value = Tensor::new(vec![4], uniform(&mut r, 4, 0.5, 1.5)).unwrap();
    bn.state.beta.value = Tensor::new(vec![4], uniform(&mut r, 4, -0.5, 0.5)).unwrap();
    let y = bn.forward(&Tensor::new(dims.to_vec(), x.clone()).unwrap(), Mode::Train).unwrap();
    let up = uniform(&mut r, y.len(), -1.0, 1.0);
    let dx = bn.backward(&Tensor::new(dims.to_vec(), up.clone()).unwrap()).unwrap();
    let eps = bn.state.epsilon as f64;
    let (x64, g64, b64, up64) = (
        to64(&x),
        to64(bn.state.gamma.value.data()),
        to64(bn.state.beta.value.data()),
        to64(&up),
    );
    let loss = |x: &[f64], g: &[f64], b: &[f64]| dot(&reference::bn_train(&t4(dims, x), g, b, eps).data, &up64);
    let num = numeric_grad(&x64, &all(x64.len()), |p| loss(p, &g64, &b64));
    record(&mut out, "batch-norm input", &to64(dx.data()), &num);
    let num = numeric_grad(&g64, &all(4), |p| loss(&x64, p, &b64));
    record(&mut out, "batch-norm gamma", &to64(bn.state.gamma.grad.data()), &num);
    let num = numeric_grad(&b64, &all(4), |p| loss(&x64, &g64, p));
    record(&mut out, "batch-norm beta", &to64(bn.state.beta.grad.data()), &num);

    // Inference mode: running statistics, gradients pass straight through.
    let dims = [2, 3, 2, 2];
    let x = uniform(&mut r, dims.iter().product(), -2.0, 2.0);
    let mut bn = BatchNorm2d::new(3);
    bn.state.gamma.value = Tensor::new(vec![3], uniform(&mut r, 3, 0.5, 1.5)).unwrap();
    bn.state.running_mean = Tensor::new(vec![3], uniform(&mut r, 3, -0.5, 0.5)).unwrap();
    bn.state.running_var = Tensor::new(vec![3], uniform(&mut r, 3, 0.5, 2.0)).unwrap();
    let y = bn.forward(&Tensor::new(dims.to_vec(), x.clone()).unwrap(), Mode::Infer).unwrap();
    let up = uniform(&mut r, y.len(), -1.0, 1.0);
    let dx = bn.backward(&Tensor::new(dims.to_vec(), up.clone()).unwrap()).unwrap();
    let s = &bn.state;
    let (g, b, m, v) = (
        to64(s.gamma.value.data()),
        to64(s.beta.value.data()),
        to64(s.running_mean.data()),
        to64(s.running_var.data()),
    );
    let eps = s.epsilon as f64;
    let up64 = to64(&up);
    let loss = |x: &[f64], g: &[f64]| dot(&reference::bn_infer(&t4(dims, x), g, &b, &m, &v, eps).data, &up64);
    let x64 = to64(&x);
    let num = numeric_grad(&x64, &all(x64.len()), |p| loss(p, &g));
    record(&mut out, "batch-norm (infer) input", &to64(dx.data()), &num);
    let num = numeric_grad(&g, &all(3), |p| loss(&x64, p));
    record(&mut out, "batch-norm (infer) gamma", &to64(s.gamma.grad.data()), &num);
    out
}

pub fn relu_checks() -> Report {
    let mut out = Report::new();
    let dims = [2, 2, 3, 3];
    let mut r = rng(12);
    // Inputs stay away from the kink so the differences are one-sided.
    let x: Vec<f32> = uniform(&mut r, 36, 0.05, 1.0)
        .into_iter()
        .map(|v| if r.random_bool(0.5) { v } else { -v })
        .collect();
    let mut relu = Relu::default();
    relu.forward(&Tensor::new(dims.to_vec(), x.clone()).unwrap(), Mode::Train).unwrap();
    let up = uniform(&mut r, 36, -1.0, 1.0);
    let dx = relu.backward(&Tensor::new(dims.to_vec(), up.clone()).unwrap()).unwrap();
    let up64 = to64(&up);
    let num = numeric_grad(&to64(&x), &all(36), |p| p.iter().zip(&up64).map(|(v, u)| v.max(0.0) * u).sum());
    record(&mut out, "relu input", &to64(dx.data()), &num);
    out
}

pub fn pooling_checks() -> Report {
    let mut out = Report::new();
    for (k, s, p) in [(3, 2, 0), (3, 2, 1), (2, 1, 0)] {
        let dims = [2, 2, 7, 7];
        let mut r = rng(13 + k as u64 + p as u64);
        let x = uniform(&mut r, 196, -1.0, 1.0);
        let mut pool = AvgPool2d::new(LayerSpec::avg_pool(k, s, p)).unwrap();
        let y = pool.forward(&Tensor::new(dims.to_vec(), x.clone()).unwrap(), Mode::Train).unwrap();
        let up = uniform(&mut r, y.len(), -1.0, 1.0);
        let dx = pool.backward(&Tensor::new(y.shape().to_vec(), up.clone()).unwrap()).unwrap();
        let up64 = to64(&up);
        let num = numeric_grad(&to64(&x), &all(196), |q| dot(&reference::avg_pool(&t4(dims, q), k, s, p).data, &up64));
        record(&mut out, format!("avg-pool k{k} s{s} p{p} input"), &to64(dx.data()), &num);
    }
    let dims = [2, 3, 4, 4];
    let mut r = rng(20);
    let x = uniform(&mut r, 96, -1.0, 1.0);
    let mut gap = GlobalAvgPool::default();
    gap.forward(&Tensor::new(dims.to_vec(), x.clone()).unwrap(), Mode::Train).unwrap();
    let up = uniform(&mut r, 6, -1.0, 1.0);
    let dx = gap.backward(&Tensor::new(vec![2, 3], up.clone()).unwrap()).unwrap();
    let up64 = to64(&up);
    let num = numeric_grad(&to64(&x), &all(96), |q| dot(&reference::gap(&t4(dims, q)), &up64));
    record(&mut out, "global-avg-pool input", &to64(dx.data()), &num);
    out
}

pub fn linear_checks() -> Report {
    let mut out = Report::new();
    let mut r = rng(30);
    let x = uniform(&mut r, 3 * 5, -1.0, 1.0);
    let mut fc = Linear::new(5, 4, &mut osv_core::rng::stream(30, &[1]));
    fc.bias.value = Tensor::new(vec![4], uniform(&mut r, 4, -0.5, 0.5)).unwrap();
    fc.forward(&Tensor::new(vec![3, 5], x.clone()).unwrap(), Mode::Train).unwrap();
    let up = uniform(&mut r, 12, -1.0, 1.0);
    let dx = fc.backward(&Tensor::new(vec![3, 4], up.clone()).unwrap()).unwrap();
    let (x64, w64, b64, up64) = (to64(&x), to64(fc.weight.value.data()), to64(fc.bias.value.data()), to64(&up));
    let loss = |x: &[f64], w: &[f64], b: &[f64]| dot(&reference::linear(x, 3, w, b), &up64);
    let num = numeric_grad(&x64, &all(15), |p| loss(p, &w64, &b64));
    record(&mut out, "fully-connected input", &to64(dx.data()), &num);
    let num = numeric_grad(&w64, &all(20), |p| loss(&x64, p, &b64));
    record(&mut out, "fully-connected weight", &to64(fc.weight.grad.data()), &num);
    let num = numeric_grad(&b64, &all(4), |p| loss(&x64, &w64, p));
    record(&mut out, "fully-connected bias", &to64(fc.bias.grad.data()), &num);
    out
}

/// y = a + b hands the upstream gradient to both operands unchanged.
pub fn shortcut_checks() -> Report {
    let mut out = Report::new();
    let mut r = rng(31);
    let a = uniform(&mut r, 8, -1.0, 1.0);
    let b = uniform(&mut r, 8, -1.0, 1.0);
    let sum = osv_core::nn::add_shortcut(
        &Tensor::new(vec![1, 2, 2, 2], a.clone()).unwrap(),
        &Tensor::new(vec![1, 2, 2, 2], b.clone()).unwrap(),
    )
    .unwrap();
    let expected: Vec<f32> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    assert_eq!(sum.data(), &expected[..]);
    let up = to64(&uniform(&mut r, 8, -1.0, 1.0));
    let (a64, b64) = (to64(&a), to64(&b));
    let num = numeric_grad(&a64, &all(8), |p| p.iter().zip(&b64).zip(&up).map(|((x, y), u)| (x + y) * u).sum());
    record(&mut out, "add-shortcut main", &up, &num);
    let num = numeric_grad(&b64, &all(8), |p| a64.iter().zip(p).zip(&up).map(|((x, y), u)| (x + y) * u).sum());
    record(&mut out, "add-shortcut shortcut", &up, &num);
    out
}

pub fn softmax_checks() -> Report {
    let mut out = Report::new();
    let mut r = rng(32);
    let logits = uniform(&mut r, 4 * 7, -3.0, 3.0);
    let labels = [0usize, 6, 3, 3];
    let (_, grad) = softmax_cross_entropy(&Tensor::new(vec![4, 7], logits.clone()).unwrap(), &labels).unwrap();
    let num = numeric_grad(&to64(&logits), &all(28), |p| reference::cross_entropy(p, &labels));
    record(&mut out, "softmax cross-entropy logits", &to64(grad.data()), &num);
    out
}

/// Every per-layer check.
pub fn layer_checks() -> Report {
    let mut out = conv_checks();
    out.extend(batchnorm_checks());
    out.extend(relu_checks());
    out.extend(pooling_checks());
    out.extend(linear_checks());
    out.extend(shortcut_checks());
    out.extend(softmax_checks());
    out
}

/// Reference forward of the whole network with batch statistics.
fn reference_loss(
    cfg: &ResNetConfig,
    p: &HashMap<String, Vec<f64>>,
    x: &T4,
    labels: &[usize],
    masks: &mut reference::Masks,
) -> f64 {
    masks.next = 0;
    let eps = 1e-5;
    let bn = |x: &T4, name: &str| reference::bn_train(x, &p[&format!("{name}.gamma")], &p[&format!("{name}.beta")], eps);
    let mut h = reference::conv(x, &p["stem.conv.weight"], cfg.stem_channels, 7, 2, 3);
    h = bn(&h, "stem.bn");
    h = masks.relu(&h);
    h = reference::avg_pool(&h, 3, 2, 0);
    for (i, m) in [1usize, 2, 3].iter().enumerate() {
        let name = format!("block{}", i + 1);
        let out_ch = m * cfg.block_width;
        let mut a = reference::conv(&h, &p[&format!("{name}.conv1.weight")], out_ch, 3, 2, 1);
        a = bn(&a, &format!("{name}.bn1"));
        a = masks.relu(&a);
        a = reference::conv(&a, &p[&format!("{name}.conv2.weight")], out_ch, 3, 1, 1);
        a = bn(&a, &format!("{name}.bn2"));
        if cfg.residual {
            let s = reference::conv(&h, &p[&format!("{name}.proj.conv.weight")], out_ch, 1, 2, 0);
            let s = bn(&s, &format!("{name}.proj.bn"));
            for (v, w) in a.data.iter_mut().zip(&s.data) {
                *v += w;
            }
        }
        if cfg.relu_after_add {
            a = masks.relu(&a);
        }
        h = a;
    }
    let f = reference::gap(&h);
    let logits = reference::linear(&f, x.dims[0], &p["fc.weight"], &p["fc.bias"]);
    reference::cross_entropy(&logits, labels)
}

/// Composed network on a batch of 3 with cross-entropy loss. Checks up to
/// `per_tensor` coordinates of every parameter tensor; the last entry is
/// the error over all checked coordinates together.
pub fn network_check(cfg: &ResNetConfig, seed: u64, per_tensor: usize) -> Report {
    let batch = 3;
    let s = cfg.input_size;
    let mut r = rng(seed);
    let x = uniform(&mut r, batch * s * s, 0.0, 1.0);
    let labels = [0usize, 1, cfg.num_classes - 1];
    let mut model = ResNetModel::build(cfg.clone(), seed).unwrap();
    let xt = Tensor::new(vec![batch, 1, s, s], x.clone()).unwrap();
    let out = model.forward(&xt, Mode::Train).unwrap();
    let (_, dlogits) = softmax_cross_entropy(&out.logits, &labels).unwrap();
    model.backward(&dlogits).unwrap();

    let mut params: HashMap<String, Vec<f64>> = HashMap::new();
    let mut grads: Vec<(String, Vec<f64>)> = Vec::new();
    for (name, p) in model.named_params_mut() {
        params.insert(name.clone(), to64(p.value.data()));
        grads.push((name, to64(p.grad.data())));
    }
    let x64 = t4([batch, 1, s, s], &to64(&x));
    let mut masks = reference::Masks::recording();
    reference_loss(cfg, &params, &x64, &labels, &mut masks);
    let mut masks = masks.replay();

    let mut report = Report::new();
    let (mut analytic, mut numeric) = (Vec::new(), Vec::new());
    for (name, grad) in &grads {
        let n = grad.len();
        let idx: Vec<usize> = if n <= per_tensor {
            all(n)
        } else {
            (0..per_tensor).map(|_| r.random_range(0..n)).collect()
        };
        let base = params[name].clone();
        let num = numeric_grad(&base, &idx, |q| {
            let mut trial = params.clone();
            trial.insert(name.clone(), q.to_vec());
            reference_loss(cfg, &trial, &x64, &labels, &mut masks)
        });
        let a = pick(grad, &idx);
        record(&mut report, name.clone(), &a, &num);
        analytic.extend(a);
        numeric.extend(num);
    }
    assert!(analytic.len() <= 10_000);
    record(&mut report, "composed network", &analytic, &numeric);
    report
}
