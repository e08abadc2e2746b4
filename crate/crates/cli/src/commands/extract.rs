use anyhow::Result;
use osv_core::eval::SignatureDataset;
use osv_core::resnet::load_checkpoint_meta;
use osv_core::transfer::{extract_features, prepare_extractor, save_features, PrepareOptions, SignatureTask};
use osv_core::StrategyKind;

use super::{load_manifest, require_file, strategy};
use crate::args::ExtractArgs;
use crate::UsageError;

pub fn run(a: &ExtractArgs) -> Result<()> {
    let strategy = strategy(a.strategy, a.checkpoint.clone(), &a.finetune)?;
    let sgd = a.train.sgd(a.seed);
    sgd.validate()?;
    if a.train_count == 0 {
        return Err(UsageError("train count must be at least 1".into()).into());
    }
    let input_size = match &strategy.source_checkpoint {
        Some(p) => {
            require_file(p, "checkpoint")?;
            load_checkpoint_meta(p)?.config.input_size
        }
        None => a.arch.config(2).input_size,
    };
    let manifest = load_manifest(&a.data)?;
    let dataset = SignatureDataset::load(&manifest, input_size)?;
    let samples = match strategy.kind {
        StrategyKind::FixedPretrained => dataset.all_genuine(),
        _ => dataset.training_genuine(a.train_count, a.seed),
    };
    let task = SignatureTask::from_users(&samples)?;
    let opts = PrepareOptions {
        scratch_config: a.arch.config(task.num_classes),
        sgd,
    };
    let extractor = prepare_extractor(&strategy, &task, &opts)?;
    let (inputs, meta) = dataset.samples();
    let features = extract_features(&extractor.model, &inputs, &meta, a.extract_batch)?;
    save_features(&a.out, &features, extractor.feature_dim(), &extractor.checksum())?;
    println!(
        "wrote {} {}-dimensional features to {} (extractor {})",
        features.len(),
        extractor.feature_dim(),
        a.out.display(),
        extractor.checksum()
    );
    Ok(())
}
