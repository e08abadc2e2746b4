//! The eight-layer residual network used as the feature extractor.
//!
//! Input → Conv 7×7/2 → BN → ReLU → AvgPool 3×3/2 → three residual blocks
//! (widths 1·W, 2·W, 3·W, each Conv 3×3/2 → BN → ReLU → Conv 3×3/1 → BN,
//! plus a 1×1/2 projected shortcut) → global average pool → FC.
//! The pooled vector in front of the FC layer is the signature feature.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::fsutil;
use crate::imaging::{CanonicalInput, INPUT_SIZE};
use crate::nn::{
    add_shortcut, argmax_rows, checkpoint, sgd_step, softmax_cross_entropy, AvgPool2d, BatchNorm2d, Conv2d,
    GlobalAvgPool, Layer, LayerSpec, Linear, Mode, Param, Relu, SgdConfig, Tensor,
};
use crate::rng::{self, tag};

/// Width multipliers of the three residual blocks.
pub const BLOCK_MULTIPLIERS: [usize; 3] = [1, 2, 3];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResNetConfig {
    pub input_size: usize,
    pub in_channels: usize,
    pub stem_channels: usize,
    /// Block N has `N * block_width` channels.
    pub block_width: usize,
    pub num_classes: usize,
    /// Ablation switch: when false the shortcut is dropped entirely.
    pub residual: bool,
    /// Apply a ReLU after the residual sum.
    pub relu_after_add: bool,
}

impl ResNetConfig {
    pub fn standard(num_classes: usize) -> Self {
        Self {
            input_size: INPUT_SIZE,
            in_channels: 1,
            stem_channels: 64,
            block_width: 128,
            num_classes,
            residual: true,
            relu_after_add: false,
        }
    }

    /// Same topology at 62×62 with 8/16/24-channel blocks, for fast tests.
    pub fn micro(num_classes: usize) -> Self {
        Self {
            input_size: 62,
            stem_channels: 8,
            block_width: 8,
            ..Self::standard(num_classes)
        }
    }

    pub fn feature_dim(&self) -> usize {
        BLOCK_MULTIPLIERS[2] * self.block_width
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.stem_channels == 0 || self.block_width == 0 {
            return Err(Error::Config("channel counts must be positive".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::Config(format!(
                "need at least 2 classes, got {}",
                self.num_classes
            )));
        }
        self.spatial_trace().map(|_| ())
    }

    /// Spatial extent after each stage: input, stem conv, stem pool, blocks
    /// 1–3, global pool.
    pub fn spatial_trace(&self) -> Result<Vec<usize>> {
        let mut trace = vec![self.input_size];
        let mut n = stem_conv_spec(self).output_extent(self.input_size)?;
        trace.push(n);
        n = stem_pool_spec().output_extent(n)?;
        trace.push(n);
        for _ in BLOCK_MULTIPLIERS {
            n = LayerSpec::conv(1, 3, 2, 1).output_extent(n)?;
            trace.push(n);
        }
        trace.push(1);
        Ok(trace)
    }
}

fn stem_conv_spec(cfg: &ResNetConfig) -> LayerSpec {
    LayerSpec::conv(cfg.stem_channels, 7, 2, 3)
}

fn stem_pool_spec() -> LayerSpec {
    LayerSpec::avg_pool(3, 2, 0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SourceTaskKind {
    WordRecognition,
    WriterIdentification,
}

impl SourceTaskKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SourceTaskKind::WordRecognition => "word-rec",
            SourceTaskKind::WriterIdentification => "writer-id",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "word-rec" | "word" => Ok(SourceTaskKind::WordRecognition),
            "writer-id" | "writer" => Ok(SourceTaskKind::WriterIdentification),
            other => Err(Error::Config(format!("unknown task '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SourceTask {
    pub kind: SourceTaskKind,
    pub num_classes: usize,
}

impl SourceTask {
    pub fn new(kind: SourceTaskKind, num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::Config(format!(
                "{} task needs at least 2 classes, got {num_classes}",
                kind.as_str()
            )));
        }
        Ok(Self { kind, num_classes })
    }
}

struct ResidualBlock {
    conv1: Conv2d,
    bn1: BatchNorm2d,
    relu: Relu,
    conv2: Conv2d,
    bn2: BatchNorm2d,
    proj_conv: Conv2d,
    proj_bn: BatchNorm2d,
    out_relu: Relu,
    residual: bool,
    relu_after_add: bool,
}

impl ResidualBlock {
    fn new(in_ch: usize, out_ch: usize, cfg: &ResNetConfig, r: &mut rng::Rng) -> Result<Self> {
        Ok(Self {
            conv1: Conv2d::new(in_ch, LayerSpec::conv(out_ch, 3, 2, 1), r)?,
            bn1: BatchNorm2d::new(out_ch),
            relu: Relu::default(),
            conv2: Conv2d::new(out_ch, LayerSpec::conv(out_ch, 3, 1, 1), r)?,
            bn2: BatchNorm2d::new(out_ch),
            proj_conv: Conv2d::new(in_ch, LayerSpec::conv(out_ch, 1, 2, 0), r)?,
            proj_bn: BatchNorm2d::new(out_ch),
            out_relu: Relu::default(),
            residual: cfg.residual,
            relu_after_add: cfg.relu_after_add,
        })
    }

    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let h = self.conv1.forward(x, mode)?;
        let h = self.bn1.forward(&h, mode)?;
        let h = self.relu.forward(&h, mode)?;
        let h = self.conv2.forward(&h, mode)?;
        let mut out = self.bn2.forward(&h, mode)?;
        if self.residual {
            let s = self.proj_conv.forward(x, mode)?;
            let s = self.proj_bn.forward(&s, mode)?;
            out = add_shortcut(&out, &s)?;
        }
        if self.relu_after_add {
            out = self.out_relu.forward(&out, mode)?;
        }
        Ok(out)
    }

    fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let h = self.conv1.infer(x)?;
        let h = self.bn1.infer(&h)?;
        let h = self.relu.infer(&h)?;
        let h = self.conv2.infer(&h)?;
        let mut out = self.bn2.infer(&h)?;
        if self.residual {
            let s = self.proj_bn.infer(&self.proj_conv.infer(x)?)?;
            out = add_shortcut(&out, &s)?;
        }
        if self.relu_after_add {
            out = self.out_relu.infer(&out)?;
        }
        Ok(out)
    }

    fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let dy = if self.relu_after_add {
            self.out_relu.backward(dy)?
        } else {
            dy.clone()
        };
        let g = self.bn2.backward(&dy)?;
        let g = self.conv2.backward(&g)?;
        let g = self.relu.backward(&g)?;
        let g = self.bn1.backward(&g)?;
        let dx = self.conv1.backward(&g)?;
        if !self.residual {
            return Ok(dx);
        }
        let s = self.proj_bn.backward(&dy)?;
        let ds = self.proj_conv.backward(&s)?;
        add_shortcut(&dx, &ds)
    }

    fn named<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        push_conv(out, &format!("{prefix}.conv1"), &self.conv1);
        push_bn(out, &format!("{prefix}.bn1"), &self.bn1);
        push_conv(out, &format!("{prefix}.conv2"), &self.conv2);
        push_bn(out, &format!("{prefix}.bn2"), &self.bn2);
        push_conv(out, &format!("{prefix}.proj.conv"), &self.proj_conv);
        push_bn(out, &format!("{prefix}.proj.bn"), &self.proj_bn);
    }

    fn named_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, TensorSlot<'a>)>) {
        push_conv_mut(out, &format!("{prefix}.conv1"), &mut self.conv1);
        push_bn_mut(out, &format!("{prefix}.bn1"), &mut self.bn1);
        push_conv_mut(out, &format!("{prefix}.conv2"), &mut self.conv2);
        push_bn_mut(out, &format!("{prefix}.bn2"), &mut self.bn2);
        push_conv_mut(out, &format!("{prefix}.proj.conv"), &mut self.proj_conv);
        push_bn_mut(out, &format!("{prefix}.proj.bn"), &mut self.proj_bn);
    }
}

/// Mutable access to a named tensor: trainable parameters carry their
/// gradient, batch-norm running statistics do not.
pub enum TensorSlot<'a> {
    Param(&'a mut Param),
    Buffer(&'a mut Tensor),
}

impl TensorSlot<'_> {
    pub fn value(&self) -> &Tensor {
        match self {
            TensorSlot::Param(p) => &p.value,
            TensorSlot::Buffer(t) => t,
        }
    }

    pub fn value_mut(&mut self) -> &mut Tensor {
        match self {
            TensorSlot::Param(p) => &mut p.value,
            TensorSlot::Buffer(t) => t,
        }
    }
}

fn push_conv<'a>(out: &mut Vec<(String, &'a Tensor)>, name: &str, c: &'a Conv2d) {
    out.push((format!("{name}.weight"), &c.weight.value));
}

fn push_bn<'a>(out: &mut Vec<(String, &'a Tensor)>, name: &str, bn: &'a BatchNorm2d) {
    out.push((format!("{name}.gamma"), &bn.state.gamma.value));
    out.push((format!("{name}.beta"), &bn.state.beta.value));
    out.push((format!("{name}.running_mean"), &bn.state.running_mean));
    out.push((format!("{name}.running_var"), &bn.state.running_var));
}

fn push_conv_mut<'a>(out: &mut Vec<(String, TensorSlot<'a>)>, name: &str, c: &'a mut Conv2d) {
    out.push((format!("{name}.weight"), TensorSlot::Param(&mut c.weight)));
}

fn push_bn_mut<'a>(out: &mut Vec<(String, TensorSlot<'a>)>, name: &str, bn: &'a mut BatchNorm2d) {
    let s = &mut bn.state;
    out.push((format!("{name}.gamma"), TensorSlot::Param(&mut s.gamma)));
    out.push((format!("{name}.beta"), TensorSlot::Param(&mut s.beta)));
    out.push((format!("{name}.running_mean"), TensorSlot::Buffer(&mut s.running_mean)));
    out.push((format!("{name}.running_var"), TensorSlot::Buffer(&mut s.running_var)));
}

/// Logits and pre-FC features of one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutput {
    pub logits: Tensor,
    pub features: Tensor,
}

pub struct ResNetModel {
    config: ResNetConfig,
    stem_conv: Conv2d,
    stem_bn: BatchNorm2d,
    stem_relu: Relu,
    stem_pool: AvgPool2d,
    blocks: Vec<ResidualBlock>,
    gap: GlobalAvgPool,
    fc: Linear,
}

impl ResNetModel {
    /// Builds a freshly initialised network; weights depend only on `seed`.
    pub fn build(config: ResNetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut r = rng::stream(seed, &[tag::INIT]);
        let mut stem_conv = Conv2d::new(config.in_channels, stem_conv_spec(&config), &mut r)?;
        stem_conv.propagate_input_grad = false;
        let mut blocks = Vec::with_capacity(3);
        let mut in_ch = config.stem_channels;
        for m in BLOCK_MULTIPLIERS {
            let out_ch = m * config.block_width;
            blocks.push(ResidualBlock::new(in_ch, out_ch, &config, &mut r)?);
            in_ch = out_ch;
        }
        let fc = Linear::new(in_ch, config.num_classes, &mut r);
        Ok(Self {
            stem_bn: BatchNorm2d::new(config.stem_channels),
            stem_relu: Relu::default(),
            stem_pool: AvgPool2d::new(stem_pool_spec())?,
            gap: GlobalAvgPool::default(),
            stem_conv,
            blocks,
            fc,
            config,
        })
    }

    pub fn config(&self) -> &ResNetConfig {
        &self.config
    }

    pub fn feature_dim(&self) -> usize {
        self.config.feature_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.fc.outputs()
    }

    /// Number of layers that own trainable parameters.
    pub fn parameter_layer_count(&self) -> usize {
        // stem conv + stem bn + 3 × (conv1, bn1, conv2, bn2, proj conv, proj bn) + fc
        2 + self.blocks.len() * 6 + 1
    }

    /// Replaces the classification head with a fresh one for `num_classes`.
    pub fn replace_head(&mut self, num_classes: usize, seed: u64) -> Result<()> {
        if num_classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {num_classes}")));
        }
        let mut r = rng::stream(seed, &[tag::HEAD]);
        self.fc = Linear::new(self.feature_dim(), num_classes, &mut r);
        self.config.num_classes = num_classes;
        Ok(())
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let [_, c, h, w] = x.dims4()?;
        let s = self.config.input_size;
        if c != self.config.in_channels {
            return Err(Error::dim("input channels", self.config.in_channels, c));
        }
        if h != s {
            return Err(Error::dim("input height", s, h));
        }
        if w != s {
            return Err(Error::dim("input width", s, w));
        }
        Ok(())
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<ForwardOutput> {
        self.check_input(x)?;
        let h = self.stem_conv.forward(x, mode)?;
        let h = self.stem_bn.forward(&h, mode)?;
        let h = self.stem_relu.forward(&h, mode)?;
        let mut h = self.stem_pool.forward(&h, mode)?;
        for b in &mut self.blocks {
            h = b.forward(&h, mode)?;
        }
        let features = self.gap.forward(&h, mode)?;
        let logits = self.fc.forward(&features, mode)?;
        Ok(ForwardOutput { logits, features })
    }

    /// Cache-free inference with running statistics; checks every stage
    /// for non-finite activations.
    pub fn infer(&self, x: &Tensor) -> Result<ForwardOutput> {
        let features = self.features(x)?;
        let logits = self.fc.infer(&features)?;
        logits.ensure_finite("fc")?;
        Ok(ForwardOutput { logits, features })
    }

    /// Pre-FC feature vectors, (B, feature_dim).
    pub fn features(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let h = self.stem_conv.infer(x)?;
        let h = self.stem_bn.infer(&h)?;
        let h = self.stem_relu.infer(&h)?;
        let mut h = self.stem_pool.infer(&h)?;
        h.ensure_finite("stem")?;
        for (i, b) in self.blocks.iter().enumerate() {
            h = b.infer(&h)?;
            h.ensure_finite(&format!("block{}", i + 1))?;
        }
        let f = self.gap.infer(&h)?;
        f.ensure_finite("global-avg-pool")?;
        Ok(f)
    }

    /// Back-propagates a logit gradient, leaving parameter gradients in place.
    pub fn backward(&mut self, dlogits: &Tensor) -> Result<()> {
        let g = self.fc.backward(dlogits)?;
        let mut g = self.gap.backward(&g)?;
        for b in self.blocks.iter_mut().rev() {
            g = b.backward(&g)?;
        }
        let g = self.stem_pool.backward(&g)?;
        let g = self.stem_relu.backward(&g)?;
        let g = self.stem_bn.backward(&g)?;
        self.stem_conv.backward(&g)?;
        Ok(())
    }

    /// Every stored tensor (parameters and running statistics) in a fixed
    /// order; the FC head comes last.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        push_conv(&mut out, "stem.conv", &self.stem_conv);
        push_bn(&mut out, "stem.bn", &self.stem_bn);
        for (i, b) in self.blocks.iter().enumerate() {
            b.named(&format!("block{}", i + 1), &mut out);
        }
        out.push(("fc.weight".into(), &self.fc.weight.value));
        out.push(("fc.bias".into(), &self.fc.bias.value));
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, TensorSlot<'_>)> {
        let mut out = Vec::new();
        push_conv_mut(&mut out, "stem.conv", &mut self.stem_conv);
        push_bn_mut(&mut out, "stem.bn", &mut self.stem_bn);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.named_mut(&format!("block{}", i + 1), &mut out);
        }
        out.push(("fc.weight".into(), TensorSlot::Param(&mut self.fc.weight)));
        out.push(("fc.bias".into(), TensorSlot::Param(&mut self.fc.bias)));
        out
    }

    /// Trainable parameters with their names.
    pub fn named_params_mut(&mut self) -> Vec<(String, &mut Param)> {
        self.named_tensors_mut()
            .into_iter()
            .filter_map(|(n, s)| match s {
                TensorSlot::Param(p) => Some((n, p)),
                TensorSlot::Buffer(_) => None,
            })
            .collect()
    }

    pub fn backbone_tensors(&self) -> Vec<(String, &Tensor)> {
        self.named_tensors()
            .into_iter()
            .filter(|(n, _)| !n.starts_with("fc."))
            .collect()
    }

    /// SHA-256 over the encoded backbone (everything but the FC head).
    pub fn backbone_checksum(&self) -> String {
        let t = self.backbone_tensors();
        fsutil::sha256_hex(&checkpoint::encode(t.iter().map(|(n, t)| (n.as_str(), *t))))
    }

    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let t = self.named_tensors();
        checkpoint::encode(t.iter().map(|(n, t)| (n.as_str(), *t)))
    }

    /// Overwrites every tensor from `entries`; names and shapes must match
    /// exactly.
    pub fn load_entries(&mut self, entries: Vec<(String, Tensor)>) -> Result<()> {
        let mut by_name: BTreeMap<String, Tensor> = entries.into_iter().collect();
        let slots = self.named_tensors_mut();
        let expected = slots.len();
        for (name, mut slot) in slots {
            let t = by_name
                .remove(&name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
            if t.shape() != slot.value().shape() {
                return Err(Error::Checkpoint(format!(
                    "shape mismatch for {name}: checkpoint {:?}, model {:?}",
                    t.shape(),
                    slot.value().shape()
                )));
            }
            *slot.value_mut() = t;
        }
        if let Some(extra) = by_name.keys().next() {
            return Err(Error::Checkpoint(format!(
                "unexpected tensor {extra} (model has {expected})"
            )));
        }
        Ok(())
    }
}

/// Stacks canonical inputs into a (B, 1, S, S) batch.
pub fn batch_tensor(inputs: &[&CanonicalInput]) -> Result<Tensor> {
    let first = inputs.first().ok_or_else(|| Error::Usage("empty batch".into()))?;
    let s = first.size();
    let mut data = Vec::with_capacity(inputs.len() * s * s);
    for x in inputs {
        if x.size() != s {
            return Err(Error::dim("batch input size", s, x.size()));
        }
        data.extend_from_slice(x.data());
    }
    Tensor::new(vec![inputs.len(), 1, s, s], data)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f32,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
}

impl TrainLog {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.accuracy)
    }

    pub fn render(&self) -> String {
        let mut s = String::from("epoch,learning_rate,loss,accuracy\n");
        for e in &self.epochs {
            s.push_str(&format!("{},{},{:.6},{:.4}\n", e.epoch, e.learning_rate, e.loss, e.accuracy));
        }
        s
    }
}

/// Mini-batch training with softmax cross-entropy.
///
/// `bn_mode` selects how batch norm behaves while training: `Train` uses
/// batch statistics, `Infer` keeps the running statistics frozen.
pub fn train(
    model: &mut ResNetModel,
    inputs: &[&CanonicalInput],
    labels: &[usize],
    sgd: &SgdConfig,
    bn_mode: Mode,
) -> Result<TrainLog> {
    sgd.validate()?;
    if inputs.is_empty() {
        return Err(Error::Usage("empty training set".into()));
    }
    if inputs.len() != labels.len() {
        return Err(Error::dim("labels", inputs.len(), labels.len()));
    }
    let classes = model.num_classes();
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Usage(format!("label {bad} outside [0, {classes})")));
    }
    let mut velocity: Vec<Tensor> = model
        .named_params_mut()
        .iter()
        .map(|(_, p)| Tensor::zeros(p.value.shape()))
        .collect();
    let mut log = TrainLog::default();
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    for epoch in 0..sgd.epochs {
        let lr = sgd.learning_rate_at(epoch);
        let mut r = rng::stream(sgd.seed, &[tag::SHUFFLE, epoch as u64]);
        order.sort_unstable();
        order.shuffle(&mut r);
        let (mut loss_sum, mut correct) = (0.0f64, 0usize);
        for chunk in order.chunks(sgd.batch_size) {
            let batch: Vec<&CanonicalInput> = chunk.iter().map(|&i| inputs[i]).collect();
            let y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let x = batch_tensor(&batch)?;
            let out = model.forward(&x, bn_mode)?;
            let (loss, dlogits) = softmax_cross_entropy(&out.logits, &y)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite { layer: "loss".into() });
            }
            loss_sum += loss * chunk.len() as f64;
            correct += argmax_rows(&out.logits)?
                .iter()
                .zip(&y)
                .filter(|(p, t)| p == t)
                .count();
            model.backward(&dlogits)?;
            for ((name, p), v) in model.named_params_mut().into_iter().zip(&mut velocity) {
                let Param { value, grad } = p;
                sgd_step(&name, value, grad, v, lr, sgd.momentum, sgd.weight_decay)?;
            }
        }
        let n = inputs.len() as f64;
        log::info!("epoch {epoch}: loss {:.4} acc {:.3}", loss_sum / n, correct as f64 / n);
        log.epochs.push(EpochStats {
            epoch,
            learning_rate: lr,
            loss: loss_sum / n,
            accuracy: correct as f64 / n,
        });
    }
    Ok(log)
}

/// Trains on a source task with batch statistics.
pub fn train_source(
    model: &mut ResNetModel,
    inputs: &[&CanonicalInput],
    labels: &[usize],
    task: &SourceTask,
    sgd: &SgdConfig,
) -> Result<TrainLog> {
    if model.num_classes() != task.num_classes {
        return Err(Error::Config(format!(
            "model head has {} outputs but the {} task has {} classes",
            model.num_classes(),
            task.kind.as_str(),
            task.num_classes
        )));
    }
    train(model, inputs, labels, sgd, Mode::Train)
}

/// Classification accuracy in inference mode.
pub fn accuracy(model: &ResNetModel, inputs: &[&CanonicalInput], labels: &[usize], batch: usize) -> Result<f64> {
    if inputs.is_empty() {
        return Err(Error::Usage("empty evaluation set".into()));
    }
    let mut correct = 0;
    for (xs, ys) in inputs.chunks(batch.max(1)).zip(labels.chunks(batch.max(1))) {
        let out = model.infer(&batch_tensor(xs)?)?;
        correct += argmax_rows(&out.logits)?.iter().zip(ys).filter(|(p, t)| p == t).count();
    }
    Ok(correct as f64 / inputs.len() as f64)
}

/// Sidecar metadata stored next to a checkpoint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckpointMeta {
    pub config: ResNetConfig,
    pub task: SourceTaskKind,
    pub num_classes: usize,
    pub seed: u64,
}

impl CheckpointMeta {
    pub fn render(&self) -> String {
        let c = &self.config;
        format!(
            "format=OSVW\nversion={}\ntask={}\nnum_classes={}\nseed={}\ninput_size={}\nin_channels={}\nstem_channels={}\nblock_width={}\nresidual={}\nrelu_after_add={}\n",
            checkpoint::VERSION,
            self.task.as_str(),
            self.num_classes,
            self.seed,
            c.input_size,
            c.in_channels,
            c.stem_channels,
            c.block_width,
            c.residual,
            c.relu_after_add,
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let map: BTreeMap<&str, &str> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim(), v.trim()))
            .collect();
        let get = |k: &str| {
            map.get(k)
                .copied()
                .ok_or_else(|| Error::Checkpoint(format!("metadata missing '{k}'")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::Checkpoint(format!("metadata '{k}' is not a number")))
        };
        let flag = |k: &str| -> Result<bool> {
            get(k)?
                .parse()
                .map_err(|_| Error::Checkpoint(format!("metadata '{k}' is not a boolean")))
        };
        let num_classes = num("num_classes")?;
        let config = ResNetConfig {
            input_size: num("input_size")?,
            in_channels: num("in_channels")?,
            stem_channels: num("stem_channels")?,
            block_width: num("block_width")?,
            num_classes,
            residual: flag("residual")?,
            relu_after_add: flag("relu_after_add")?,
        };
        Ok(Self {
            config,
            task: SourceTaskKind::parse(get("task")?)?,
            num_classes,
            seed: get("seed")?
                .parse()
                .map_err(|_| Error::Checkpoint("metadata 'seed' is not a number".into()))?,
        })
    }
}

pub fn meta_path(checkpoint: &Path) -> std::path::PathBuf {
    let mut name = checkpoint.as_os_str().to_owned();
    name.push(".meta");
    name.into()
}

pub fn save_checkpoint(model: &ResNetModel, task: SourceTaskKind, seed: u64, path: &Path) -> Result<()> {
    fsutil::write_atomic(path, &model.to_checkpoint_bytes())?;
    let meta = CheckpointMeta {
        config: model.config().clone(),
        task,
        num_classes: model.num_classes(),
        seed,
    };
    fsutil::write_atomic(&meta_path(path), meta.render().as_bytes())
}

/// Reads only the metadata sidecar of a checkpoint.
pub fn load_checkpoint_meta(path: &Path) -> Result<CheckpointMeta> {
    CheckpointMeta::parse(&fsutil::read_string(&meta_path(path))?)
}

pub fn load_checkpoint(path: &Path) -> Result<(ResNetModel, CheckpointMeta)> {
    let meta = load_checkpoint_meta(path)?;
    let entries = checkpoint::decode(&fsutil::read(path)?)?;
    let mut model = ResNetModel::build(meta.config.clone(), meta.seed)?;
    model.load_entries(entries)?;
    Ok((model, meta))
}
