//! Writer-dependent verification protocol.
//!
//! For each seed, every user's genuine samples are split into a training
//! part and an unseen test part. A verifier per user is trained on the
//! training genuines against random forgeries drawn from other users'
//! genuine samples, then scored on the unseen genuines and on the user's
//! skilled forgeries.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::eer::{compute_eer, EerResult, ScoreSet};
use crate::error::{Error, Result};
use crate::imaging::CanonicalInput;
use crate::resnet::{load_checkpoint, SourceTaskKind};
use crate::rng::{self, tag};
use crate::svm::{train_user_verifier, KernelSpec, PoolEntry, UserVerifier, DEFAULT_FORGERY_COUNT};
use crate::synth::{load_inputs, EntryLabel, Manifest};
use crate::transfer::{
    extract_features, prepare_extractor, FeatureVector, PrepareOptions, SampleLabel, SampleMeta, SignatureTask,
    StrategyKind, TransferStrategy,
};

#[derive(Clone, Debug)]
pub struct SignatureSample {
    pub sample_id: u32,
    pub input: CanonicalInput,
}

#[derive(Clone, Debug)]
pub struct SignatureUser {
    pub user_id: u32,
    pub genuine: Vec<SignatureSample>,
    pub skilled: Vec<SignatureSample>,
}

#[derive(Clone, Debug, Default)]
pub struct SignatureDataset {
    pub users: Vec<SignatureUser>,
}

impl SignatureDataset {
    /// Genuine and skilled samples of every writer in the manifest.
    pub fn load(manifest: &Manifest, input_size: usize) -> Result<Self> {
        let entries: Vec<_> = manifest
            .entries
            .iter()
            .filter(|e| matches!(e.label, EntryLabel::Genuine | EntryLabel::Skilled))
            .collect();
        if entries.is_empty() {
            return Err(Error::Usage("manifest lists no signature samples".into()));
        }
        let inputs = load_inputs(manifest, &entries, input_size)?;
        let mut users: Vec<SignatureUser> = Vec::new();
        for (e, input) in entries.iter().zip(inputs) {
            let pos = match users.binary_search_by_key(&e.writer_id, |u| u.user_id) {
                Ok(p) => p,
                Err(p) => {
                    users.insert(
                        p,
                        SignatureUser {
                            user_id: e.writer_id,
                            genuine: Vec::new(),
                            skilled: Vec::new(),
                        },
                    );
                    p
                }
            };
            let sample = SignatureSample {
                sample_id: e.index,
                input,
            };
            match e.label {
                EntryLabel::Genuine => users[pos].genuine.push(sample),
                _ => users[pos].skilled.push(sample),
            }
        }
        for u in &mut users {
            u.genuine.sort_by_key(|s| s.sample_id);
            u.skilled.sort_by_key(|s| s.sample_id);
        }
        Ok(Self { users })
    }

    /// Every genuine sample tagged with its writer.
    pub fn all_genuine(&self) -> Vec<(u32, &CanonicalInput)> {
        self.users
            .iter()
            .flat_map(|u| u.genuine.iter().map(move |s| (u.user_id, &s.input)))
            .collect()
    }

    /// The training genuines of the `(train_count, seed)` split of every
    /// user with enough samples; the material for signature-domain
    /// extractor training.
    pub fn training_genuine(&self, train_count: usize, seed: u64) -> Vec<(u32, &CanonicalInput)> {
        self.users
            .iter()
            .filter_map(|u| {
                let (train, _) = split_genuine(u.user_id, u.genuine.len(), train_count, seed)?;
                Some(train.into_iter().map(move |i| (u.user_id, &u.genuine[i].input)))
            })
            .flatten()
            .collect()
    }

    /// Every sample with its metadata, genuine before skilled per user.
    pub fn samples(&self) -> (Vec<&CanonicalInput>, Vec<SampleMeta>) {
        let mut inputs = Vec::new();
        let mut meta = Vec::new();
        for u in &self.users {
            for (set, label) in [(&u.genuine, SampleLabel::Genuine), (&u.skilled, SampleLabel::SkilledForgery)] {
                for s in set {
                    inputs.push(&s.input);
                    meta.push(SampleMeta {
                        user_id: u.user_id,
                        sample_id: s.sample_id,
                        label,
                    });
                }
            }
        }
        (inputs, meta)
    }
}

/// Feature vectors of one user.
#[derive(Clone, Debug, PartialEq)]
pub struct UserFeatures {
    pub user_id: u32,
    pub genuine: Vec<FeatureVector>,
    pub skilled: Vec<FeatureVector>,
}

/// Groups features by user (ascending ids), ordering samples by id.
pub fn group_features(features: &[FeatureVector]) -> Vec<UserFeatures> {
    let mut sorted: Vec<&FeatureVector> = features.iter().collect();
    sorted.sort_by_key(|f| (f.user_id, f.sample_id));
    let mut users: Vec<UserFeatures> = Vec::new();
    for f in sorted {
        if users.last().is_none_or(|u| u.user_id != f.user_id) {
            users.push(UserFeatures {
                user_id: f.user_id,
                genuine: Vec::new(),
                skilled: Vec::new(),
            });
        }
        let u = users.last_mut().unwrap();
        match f.label {
            SampleLabel::Genuine => u.genuine.push(f.clone()),
            SampleLabel::SkilledForgery => u.skilled.push(f.clone()),
            SampleLabel::RandomForgery => {}
        }
    }
    users
}

/// Indices of the training and test genuines of `user_id`.
///
/// The permutation depends only on (seed, user), so the training set for a
/// smaller count is a prefix of the one for a larger count. Returns `None`
/// when fewer than `train_count + 1` genuines exist.
pub fn split_genuine(user_id: u32, n_genuine: usize, train_count: usize, seed: u64) -> Option<(Vec<usize>, Vec<usize>)> {
    if n_genuine < train_count + 1 {
        return None;
    }
    let mut order: Vec<usize> = (0..n_genuine).collect();
    order.shuffle(&mut rng::stream(seed, &[tag::SPLIT, user_id as u64]));
    let test = order.split_off(train_count);
    Some((order, test))
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifierSettings {
    pub kernel: KernelSpec,
    pub c: f64,
    pub forgery_count: usize,
}

impl VerifierSettings {
    pub fn new(kernel: KernelSpec) -> Self {
        Self {
            kernel,
            c: 1.0,
            forgery_count: DEFAULT_FORGERY_COUNT,
        }
    }
}

/// Users that can take part in a run with `train_count` training genuines.
pub fn eligible_users(users: &[UserFeatures], train_count: usize) -> Vec<&UserFeatures> {
    users
        .iter()
        .filter(|u| {
            if u.genuine.len() < train_count + 1 {
                log::warn!(
                    "user {} excluded: {} genuine samples, need {}",
                    u.user_id,
                    u.genuine.len(),
                    train_count + 1
                );
                false
            } else if u.skilled.is_empty() {
                log::warn!("user {} excluded: no skilled forgeries to test against", u.user_id);
                false
            } else {
                true
            }
        })
        .collect()
}

/// Trains one verifier per eligible user, in ascending user order.
pub fn train_verifiers(
    users: &[UserFeatures],
    train_count: usize,
    seed: u64,
    settings: &VerifierSettings,
) -> Result<Vec<UserVerifier>> {
    if train_count == 0 {
        return Err(Error::Config("train count must be at least 1".into()));
    }
    let eligible = eligible_users(users, train_count);
    eligible
        .par_iter()
        .map(|u| {
            let (train, _) = split_genuine(u.user_id, u.genuine.len(), train_count, seed).expect("eligible");
            let genuine: Vec<&[f32]> = train.iter().map(|&i| u.genuine[i].values.as_slice()).collect();
            let pool: Vec<PoolEntry> = users
                .iter()
                .filter(|o| o.user_id != u.user_id)
                .flat_map(|o| o.genuine.iter().map(move |f| PoolEntry { user_id: o.user_id, x: &f.values }))
                .collect();
            train_user_verifier(
                u.user_id,
                &genuine,
                &pool,
                &settings.kernel,
                settings.c,
                seed,
                settings.forgery_count,
            )
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserResult {
    pub user_id: u32,
    pub eer: f64,
    pub threshold: f64,
    pub scores: ScoreSet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub users: Vec<UserResult>,
    /// EER over all users' scores with a single global threshold.
    pub pooled: EerResult,
}

impl RunResult {
    /// Mean of the per-user EERs (user-specific thresholds).
    pub fn mean_user_eer(&self) -> f64 {
        self.users.iter().map(|u| u.eer).sum::<f64>() / self.users.len() as f64
    }
}

/// Scores each verifier on its user's unseen genuines and skilled forgeries.
pub fn score_users(users: &[UserFeatures], verifiers: &[UserVerifier], train_count: usize, seed: u64) -> Result<RunResult> {
    if verifiers.is_empty() {
        return Err(Error::Protocol("no user could be evaluated".into()));
    }
    let results: Vec<UserResult> = verifiers
        .par_iter()
        .map(|v| {
            let u = users
                .iter()
                .find(|u| u.user_id == v.user_id)
                .ok_or_else(|| Error::Protocol(format!("no features for user {}", v.user_id)))?;
            let (_, test) = split_genuine(u.user_id, u.genuine.len(), train_count, seed).ok_or_else(|| {
                Error::Protocol(format!("user {} has too few genuines for {train_count} training samples", u.user_id))
            })?;
            let genuine = test.iter().map(|&i| v.score(&u.genuine[i].values)).collect::<Result<_>>()?;
            let forgery = u.skilled.iter().map(|f| v.score(&f.values)).collect::<Result<_>>()?;
            let scores = ScoreSet::new(genuine, forgery);
            let r = compute_eer(&scores)?;
            Ok(UserResult {
                user_id: u.user_id,
                eer: r.eer,
                threshold: r.threshold,
                scores,
            })
        })
        .collect::<Result<_>>()?;
    let mut pooled = ScoreSet::default();
    for r in &results {
        pooled.extend(&r.scores);
    }
    Ok(RunResult {
        seed,
        pooled: compute_eer(&pooled)?,
        users: results,
    })
}

/// Trains and scores one run on precomputed features.
pub fn evaluate_run(users: &[UserFeatures], train_count: usize, seed: u64, settings: &VerifierSettings) -> Result<RunResult> {
    let verifiers = train_verifiers(users, train_count, seed, settings)?;
    score_users(users, &verifiers, train_count, seed)
}

#[derive(Clone, Debug)]
pub struct ProtocolConfig {
    pub train_counts: Vec<usize>,
    pub seeds: Vec<u64>,
    pub strategy: TransferStrategy,
    pub kernels: Vec<KernelSpec>,
    pub c: f64,
    pub forgery_count: usize,
    /// Training settings for strategies that train on signatures.
    pub prepare: PrepareOptions,
    pub extract_batch: usize,
}

impl ProtocolConfig {
    pub fn runs(&self) -> usize {
        self.seeds.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.strategy.validate()?;
        if self.train_counts.is_empty() || self.train_counts.contains(&0) {
            return Err(Error::Config("train counts must be a non-empty list of positive counts".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if self.kernels.is_empty() {
            return Err(Error::Config("at least one kernel is required".into()));
        }
        for k in &self.kernels {
            k.validate()?;
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("C must be positive, got {}", self.c)));
        }
        if self.forgery_count == 0 {
            return Err(Error::Config("random forgery count must be positive".into()));
        }
        self.prepare.sgd.validate()
    }
}

/// Results of one (train count, strategy, kernel) cell over all seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct CellReport {
    pub train_count: usize,
    /// Column key, e.g. `word-rec+ft` or `scratch`.
    pub strategy: String,
    pub kernel: String,
    pub runs: Vec<RunResult>,
}

impl CellReport {
    pub fn pooled_eers(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.pooled.eer).collect()
    }

    pub fn user_mean_eers(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.mean_user_eer()).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub cells: Vec<CellReport>,
}

impl EvalReport {
    pub fn merge(&mut self, other: EvalReport) {
        self.cells.extend(other.cells);
    }
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Column key for a strategy and the task its checkpoint was trained on.
pub fn strategy_key(kind: StrategyKind, source: Option<SourceTaskKind>) -> String {
    match (kind, source) {
        (StrategyKind::FromScratch, _) | (_, None) => "scratch".into(),
        (StrategyKind::FixedPretrained, Some(t)) => t.as_str().into(),
        (StrategyKind::FineTune, Some(t)) => format!("{}+ft", t.as_str()),
    }
}

/// Runs the protocol for one strategy over every train count, seed and
/// kernel of `config`.
pub fn run_protocol(dataset: &SignatureDataset, config: &ProtocolConfig) -> Result<EvalReport> {
    config.validate()?;
    let (inputs, meta) = dataset.samples();
    if inputs.is_empty() {
        return Err(Error::Usage("empty signature dataset".into()));
    }
    let source_task = match &config.strategy.source_checkpoint {
        Some(p) => Some(load_checkpoint(p)?.1.task),
        None => None,
    };
    let key = strategy_key(config.strategy.kind, source_task);
    let fixed_features = if config.strategy.kind == StrategyKind::FixedPretrained {
        let task = SignatureTask::from_users(&dataset.all_genuine())?;
        let ex = prepare_extractor(&config.strategy, &task, &config.prepare)?;
        Some(extract_features(&ex.model, &inputs, &meta, config.extract_batch)?)
    } else {
        None
    };

    let mut cells: Vec<CellReport> = Vec::new();
    for &count in &config.train_counts {
        let mut runs_per_kernel: Vec<Vec<RunResult>> = vec![Vec::new(); config.kernels.len()];
        for &seed in &config.seeds {
            let features = match &fixed_features {
                Some(f) => f.clone(),
                None => {
                    let train = dataset.training_genuine(count, seed);
                    let task = SignatureTask::from_users(&train)?;
                    let mut prepare = config.prepare.clone();
                    prepare.sgd.seed = seed;
                    let ex = prepare_extractor(&config.strategy, &task, &prepare)?;
                    log::info!(
                        "{key}: extractor for train count {count}, seed {seed} ready (final train acc {:.3})",
                        ex.log.final_accuracy().unwrap_or(f64::NAN)
                    );
                    extract_features(&ex.model, &inputs, &meta, config.extract_batch)?
                }
            };
            let users = group_features(&features);
            for (k, kernel) in config.kernels.iter().enumerate() {
                let settings = VerifierSettings {
                    kernel: *kernel,
                    c: config.c,
                    forgery_count: config.forgery_count,
                };
                let run = evaluate_run(&users, count, seed, &settings)?;
                log::info!(
                    "{key} {} n={count} seed={seed}: pooled EER {:.4}, mean user EER {:.4}",
                    kernel.label(),
                    run.pooled.eer,
                    run.mean_user_eer()
                );
                runs_per_kernel[k].push(run);
            }
        }
        for (kernel, runs) in config.kernels.iter().zip(runs_per_kernel) {
            cells.push(CellReport {
                train_count: count,
                strategy: key.clone(),
                kernel: kernel.label(),
                runs,
            });
        }
    }
    Ok(EvalReport { cells })
}
