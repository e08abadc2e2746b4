use std::path::PathBuf;

use anyhow::Result;
use osv_core::fsutil;
use osv_core::resnet::{accuracy, save_checkpoint, train_source};
use osv_core::rng::{self, tag};
use osv_core::synth::{load_inputs, EntryLabel, ManifestEntry};
use osv_core::{ResNetModel, SourceTask, SourceTaskKind};
use rand::seq::SliceRandom;

use super::load_manifest;
use crate::args::PretrainArgs;
use crate::UsageError;

/// Training log written beside a checkpoint.
pub fn log_path(checkpoint: &std::path::Path) -> PathBuf {
    let mut name = checkpoint.as_os_str().to_owned();
    name.push(".log.csv");
    name.into()
}

/// Class index of each handwriting entry for `task`: the rank of its word
/// or writer id.
fn labels(entries: &[&ManifestEntry], task: SourceTaskKind) -> (Vec<usize>, usize) {
    let key = |e: &ManifestEntry| match (task, e.label) {
        (SourceTaskKind::WordRecognition, EntryLabel::Word(w)) => w,
        _ => e.writer_id,
    };
    let mut ids: Vec<u32> = entries.iter().map(|e| key(e)).collect();
    ids.sort_unstable();
    ids.dedup();
    let labels = entries.iter().map(|e| ids.binary_search(&key(e)).unwrap()).collect();
    (labels, ids.len())
}

pub fn run(a: &PretrainArgs) -> Result<()> {
    if !(0.0..1.0).contains(&a.test_fraction) {
        return Err(UsageError(format!("test fraction {} outside [0, 1)", a.test_fraction)).into());
    }
    let sgd = a.train.sgd(a.seed);
    sgd.validate()?;
    let manifest = load_manifest(&a.data)?;
    let entries: Vec<&ManifestEntry> = manifest
        .entries
        .iter()
        .filter(|e| matches!(e.label, EntryLabel::Word(_)))
        .collect();
    if entries.is_empty() {
        return Err(UsageError(format!("{} lists no handwriting samples", a.data.display())).into());
    }
    let (labels, classes) = labels(&entries, a.task);
    let task = SourceTask::new(a.task, classes)?;
    let config = a.arch.config(classes);
    config.validate()?;

    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.shuffle(&mut rng::stream(a.seed, &[tag::SPLIT]));
    let n_test = (a.test_fraction * entries.len() as f64).round() as usize;
    let (test, train) = order.split_at(n_test.min(entries.len() - 1));

    log::info!(
        "{}: {classes} classes, {} training and {} test images",
        a.task.as_str(),
        train.len(),
        test.len()
    );
    let inputs = load_inputs(&manifest, &entries, config.input_size)?;
    let pick = |idx: &[usize]| -> (Vec<_>, Vec<usize>) { (idx.iter().map(|&i| &inputs[i]).collect(), idx.iter().map(|&i| labels[i]).collect()) };
    let (train_x, train_y) = pick(train);
    let mut model = ResNetModel::build(config, a.seed)?;
    let log = train_source(&mut model, &train_x, &train_y, &task, &sgd)?;
    let (eval_x, eval_y, which) = if test.is_empty() {
        (train_x, train_y, "training")
    } else {
        let (x, y) = pick(test);
        (x, y, "held-out")
    };
    let acc = accuracy(&model, &eval_x, &eval_y, a.train.batch_size)?;

    save_checkpoint(&model, a.task, a.seed, &a.out)?;
    fsutil::write_atomic(&log_path(&a.out), log.render().as_bytes())?;
    println!(
        "{} accuracy on {} {which} samples: {acc:.4}; checkpoint {}",
        a.task.as_str(),
        eval_x.len(),
        a.out.display()
    );
    Ok(())
}
