//! Learning strategies and feature extraction.

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::bytes::Reader;
use crate::error::{Error, Result};
use crate::fsutil;
use crate::imaging::CanonicalInput;
use crate::nn::{Mode, SgdConfig};
use crate::resnet::{self, batch_tensor, load_checkpoint, ResNetConfig, ResNetModel, TrainLog};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyKind {
    FromScratch,
    FixedPretrained,
    FineTune,
}

impl StrategyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyKind::FromScratch => "scratch",
            StrategyKind::FixedPretrained => "fixed",
            StrategyKind::FineTune => "finetune",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "scratch" | "from-scratch" => Ok(StrategyKind::FromScratch),
            "fixed" | "fixed-pretrained" => Ok(StrategyKind::FixedPretrained),
            "finetune" | "fine-tune" => Ok(StrategyKind::FineTune),
            other => Err(Error::Config(format!(
                "unknown strategy '{other}' (expected scratch, fixed or finetune)"
            ))),
        }
    }

    pub fn needs_checkpoint(&self) -> bool {
        !matches!(self, StrategyKind::FromScratch)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransferStrategy {
    pub kind: StrategyKind,
    pub source_checkpoint: Option<PathBuf>,
    pub finetune_epochs: usize,
    pub finetune_lr: f32,
}

impl TransferStrategy {
    pub fn from_scratch() -> Self {
        Self {
            kind: StrategyKind::FromScratch,
            source_checkpoint: None,
            finetune_epochs: 0,
            finetune_lr: 0.0,
        }
    }

    pub fn fixed(checkpoint: impl Into<PathBuf>) -> Self {
        Self {
            kind: StrategyKind::FixedPretrained,
            source_checkpoint: Some(checkpoint.into()),
            finetune_epochs: 0,
            finetune_lr: 0.0,
        }
    }

    pub fn fine_tune(checkpoint: impl Into<PathBuf>, epochs: usize, lr: f32) -> Self {
        Self {
            kind: StrategyKind::FineTune,
            source_checkpoint: Some(checkpoint.into()),
            finetune_epochs: epochs,
            finetune_lr: lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind.needs_checkpoint(), &self.source_checkpoint) {
            (true, None) => {
                return Err(Error::Config(format!(
                    "strategy '{}' requires a source checkpoint",
                    self.kind
                )))
            }
            (false, Some(p)) => {
                return Err(Error::Config(format!(
                    "strategy 'scratch' must not name a source checkpoint (got {})",
                    p.display()
                )))
            }
            _ => {}
        }
        // A zero step size is accepted: it reproduces the fixed strategy.
        if !(self.finetune_lr >= 0.0 && self.finetune_lr.is_finite()) {
            return Err(Error::Config(format!(
                "fine-tune learning rate must be non-negative, got {}",
                self.finetune_lr
            )));
        }
        Ok(())
    }
}

/// Signature-domain writer-identification task over the training users.
#[derive(Clone, Debug)]
pub struct SignatureTask<'a> {
    pub inputs: Vec<&'a CanonicalInput>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl<'a> SignatureTask<'a> {
    /// Builds the task from `(user_id, input)` pairs; labels are the rank
    /// of each user id among the distinct ids.
    pub fn from_users(samples: &[(u32, &'a CanonicalInput)]) -> Result<Self> {
        let mut ids: Vec<u32> = samples.iter().map(|s| s.0).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() < 2 {
            return Err(Error::Usage(format!(
                "signature task needs at least 2 writers, got {}",
                ids.len()
            )));
        }
        Ok(Self {
            inputs: samples.iter().map(|s| s.1).collect(),
            labels: samples.iter().map(|s| ids.binary_search(&s.0).unwrap()).collect(),
            num_classes: ids.len(),
        })
    }
}

/// Settings for the training done while preparing an extractor.
#[derive(Clone, Debug)]
pub struct PrepareOptions {
    /// Architecture for from-scratch training (the head width is replaced).
    pub scratch_config: ResNetConfig,
    /// Optimiser for from-scratch training; fine-tuning reuses its batch
    /// size, momentum, decay and seed with the strategy's own rate and
    /// epoch count.
    pub sgd: SgdConfig,
}

/// A frozen feature extractor.
pub struct Extractor {
    pub kind: StrategyKind,
    pub model: ResNetModel,
    pub log: TrainLog,
}

impl Extractor {
    pub fn checksum(&self) -> String {
        self.model.backbone_checksum()
    }

    pub fn feature_dim(&self) -> usize {
        self.model.feature_dim()
    }
}

/// Builds the extractor for `strategy`, training on `task` where the
/// strategy calls for it.
pub fn prepare_extractor(strategy: &TransferStrategy, task: &SignatureTask<'_>, opts: &PrepareOptions) -> Result<Extractor> {
    strategy.validate()?;
    let input_size = task
        .inputs
        .first()
        .map(|x| x.size())
        .ok_or_else(|| Error::Usage("empty signature task".into()))?;
    match strategy.kind {
        StrategyKind::FromScratch => {
            let mut config = opts.scratch_config.clone();
            config.num_classes = task.num_classes;
            if config.input_size != input_size {
                return Err(Error::dim("input size", config.input_size, input_size));
            }
            let mut model = ResNetModel::build(config, opts.sgd.seed)?;
            let log = resnet::train(&mut model, &task.inputs, &task.labels, &opts.sgd, Mode::Train)?;
            Ok(Extractor {
                kind: strategy.kind,
                model,
                log,
            })
        }
        StrategyKind::FixedPretrained | StrategyKind::FineTune => {
            let path = strategy.source_checkpoint.as_deref().expect("validated");
            let (model, _) = load_checkpoint(path)?;
            if model.config().input_size != input_size {
                return Err(Error::Checkpoint(format!(
                    "checkpoint {} expects {}×{} inputs but signatures are {}×{}",
                    path.display(),
                    model.config().input_size,
                    model.config().input_size,
                    input_size,
                    input_size
                )));
            }
            adapt_pretrained(strategy, model, task, opts)
        }
    }
}

/// Same as [`prepare_extractor`] for an already loaded source model.
pub fn adapt_pretrained(
    strategy: &TransferStrategy,
    mut model: ResNetModel,
    task: &SignatureTask<'_>,
    opts: &PrepareOptions,
) -> Result<Extractor> {
    let log = match strategy.kind {
        StrategyKind::FixedPretrained => TrainLog::default(),
        StrategyKind::FineTune => {
            model.replace_head(task.num_classes, opts.sgd.seed)?;
            let sgd = SgdConfig {
                learning_rate: strategy.finetune_lr,
                epochs: strategy.finetune_epochs,
                ..opts.sgd.clone()
            };
            // Running statistics stay frozen; every parameter trains.
            resnet::train(&mut model, &task.inputs, &task.labels, &sgd, Mode::Infer)?
        }
        StrategyKind::FromScratch => {
            return Err(Error::Usage("from-scratch training does not start from a source model".into()))
        }
    };
    Ok(Extractor {
        kind: strategy.kind,
        model,
        log,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SampleLabel {
    Genuine,
    RandomForgery,
    SkilledForgery,
}

impl SampleLabel {
    pub fn code(&self) -> u8 {
        match self {
            SampleLabel::Genuine => 0,
            SampleLabel::RandomForgery => 1,
            SampleLabel::SkilledForgery => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(SampleLabel::Genuine),
            1 => Some(SampleLabel::RandomForgery),
            2 => Some(SampleLabel::SkilledForgery),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SampleMeta {
    pub user_id: u32,
    pub sample_id: u32,
    pub label: SampleLabel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f32>,
    pub user_id: u32,
    pub sample_id: u32,
    pub label: SampleLabel,
}

/// One feature vector per input, in input order.
///
/// Chunks of `batch_size` are processed in parallel; results do not depend
/// on the batch size or on the thread count.
pub fn extract_features(
    model: &ResNetModel,
    inputs: &[&CanonicalInput],
    meta: &[SampleMeta],
    batch_size: usize,
) -> Result<Vec<FeatureVector>> {
    if inputs.len() != meta.len() {
        return Err(Error::dim("sample metadata", inputs.len(), meta.len()));
    }
    let batch_size = batch_size.max(1);
    let dim = model.feature_dim();
    let chunks: Vec<Vec<FeatureVector>> = inputs
        .par_chunks(batch_size)
        .zip(meta.par_chunks(batch_size))
        .map(|(xs, ms)| {
            let f = model.features(&batch_tensor(xs)?)?;
            Ok(f.data()
                .chunks_exact(dim)
                .zip(ms)
                .map(|(v, m)| FeatureVector {
                    values: v.to_vec(),
                    user_id: m.user_id,
                    sample_id: m.sample_id,
                    label: m.label,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Contents of the text index written beside a feature file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureIndex {
    pub records: usize,
    pub dim: usize,
    pub extractor: String,
}

pub fn index_path(features: &Path) -> PathBuf {
    features.with_extension("idx")
}

pub fn encode_features(features: &[FeatureVector], dim: usize) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(features.len() * (9 + 4 * dim));
    for f in features {
        if f.values.len() != dim {
            return Err(Error::dim("feature vector", dim, f.values.len()));
        }
        if f.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                layer: format!("feature record user {} sample {}", f.user_id, f.sample_id),
            });
        }
        out.extend_from_slice(&f.user_id.to_le_bytes());
        out.extend_from_slice(&f.sample_id.to_le_bytes());
        out.push(f.label.code());
        for v in &f.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_features(bytes: &[u8], dim: usize) -> Result<Vec<FeatureVector>> {
    let record = 9 + 4 * dim;
    if !bytes.len().is_multiple_of(record) {
        return Err(Error::Parse {
            offset: bytes.len() - bytes.len() % record,
            message: format!("partial feature record (record size {record})"),
        });
    }
    let mut r = Reader::new(bytes);
    let mut out = Vec::with_capacity(bytes.len() / record);
    while r.pos < bytes.len() {
        let user_id = r.u32()?;
        let sample_id = r.u32()?;
        let at = r.pos;
        let code = r.u8()?;
        let label = SampleLabel::from_code(code).ok_or_else(|| Error::Parse {
            offset: at,
            message: format!("unknown label code {code}"),
        })?;
        let mut values = Vec::with_capacity(dim);
        for _ in 0..dim {
            values.push(r.f32()?);
        }
        out.push(FeatureVector {
            values,
            user_id,
            sample_id,
            label,
        });
    }
    Ok(out)
}

impl FeatureIndex {
    pub fn render(&self) -> String {
        format!(
            "records={}\ndim={}\nextractor={}\n",
            self.records, self.dim, self.extractor
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut records = None;
        let mut dim = None;
        let mut extractor = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                offset: lineno,
                message: format!("expected key=value, got '{line}'"),
            })?;
            let num = || {
                v.parse::<usize>().map_err(|_| Error::Parse {
                    offset: lineno,
                    message: format!("'{k}' is not a number"),
                })
            };
            match k {
                "records" => records = Some(num()?),
                "dim" => dim = Some(num()?),
                "extractor" => extractor = Some(v.to_string()),
                _ => {}
            }
        }
        let missing = |k: &str| Error::Parse {
            offset: 0,
            message: format!("feature index missing '{k}'"),
        };
        Ok(Self {
            records: records.ok_or_else(|| missing("records"))?,
            dim: dim.ok_or_else(|| missing("dim"))?,
            extractor: extractor.ok_or_else(|| missing("extractor"))?,
        })
    }
}

pub fn save_features(path: &Path, features: &[FeatureVector], dim: usize, extractor_checksum: &str) -> Result<()> {
    let bytes = encode_features(features, dim)?;
    fsutil::write_atomic(path, &bytes)?;
    let index = FeatureIndex {
        records: features.len(),
        dim,
        extractor: extractor_checksum.to_string(),
    };
    fsutil::write_atomic(&index_path(path), index.render().as_bytes())
}

pub fn load_features(path: &Path) -> Result<(Vec<FeatureVector>, FeatureIndex)> {
    let index = FeatureIndex::parse(&fsutil::read_string(&index_path(path))?)?;
    let features = decode_features(&fsutil::read(path)?, index.dim)?;
    if features.len() != index.records {
        return Err(Error::Parse {
            offset: 0,
            message: format!(
                "index lists {} records but {} holds {}",
                index.records,
                path.display(),
                features.len()
            ),
        });
    }
    Ok((features, index))
}
