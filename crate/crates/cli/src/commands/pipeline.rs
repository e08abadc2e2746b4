use anyhow::Result;
use osv_core::EvalReport;

use super::{evaluate, pretrain, synth};
use crate::args::{
    ConfigArg, CorpusKind, EvaluateArgs, List, PipelineArgs, PretrainArgs, SynthArgs, TrainArgs,
};

/// Synthesizes both corpora, pretrains one checkpoint per source task and
/// evaluates every strategy. Layout below `--out`: `handwriting/`,
/// `signatures/`, `checkpoints/<task>.osvw`, `report.csv`, `report.txt`.
pub fn run(a: &PipelineArgs) -> Result<EvalReport> {
    let hw = a.out.join("handwriting");
    let sig = a.out.join("signatures");
    let synth_args = |kind, out| SynthArgs {
        config: ConfigArg::default(),
        out,
        kind,
        writers: if kind == CorpusKind::Handwriting { a.hw_writers } else { a.writers },
        words: a.hw_words,
        samples: a.hw_samples,
        genuine: a.genuine,
        skilled: a.skilled,
        forgery_scale: a.forgery_scale,
        seed: a.seed,
    };
    let runs_pretrained = a.strategies.0.iter().any(|s| s.needs_checkpoint());
    let tasks = if runs_pretrained { a.tasks.0.clone() } else { Vec::new() };
    // Validate everything the later stages need before generating data.
    synth::spec(&synth_args(CorpusKind::Handwriting, hw.clone()))?;
    synth::spec(&synth_args(CorpusKind::Signatures, sig.clone()))?;

    if !tasks.is_empty() {
        synth::run(&synth_args(CorpusKind::Handwriting, hw.clone()))?;
    }
    synth::run(&synth_args(CorpusKind::Signatures, sig.clone()))?;

    let mut checkpoints = Vec::new();
    for task in tasks {
        let out = a.out.join("checkpoints").join(format!("{}.osvw", task.as_str()));
        pretrain::run(&PretrainArgs {
            config: ConfigArg::default(),
            data: hw.clone(),
            out: out.clone(),
            task,
            arch: a.arch,
            train: TrainArgs {
                epochs: a.pretrain_epochs,
                lr: a.pretrain_lr,
                ..a.train.clone()
            },
            test_fraction: a.test_fraction,
            seed: a.seed,
        })?;
        checkpoints.push(out);
    }

    evaluate::run(&EvaluateArgs {
        config: ConfigArg::default(),
        data: sig,
        out: a.out.clone(),
        strategies: a.strategies.clone(),
        checkpoints: (!checkpoints.is_empty()).then_some(List(checkpoints)),
        arch: a.arch,
        train: a.train.clone(),
        finetune: a.finetune.clone(),
        protocol: a.protocol.clone(),
    })
}
