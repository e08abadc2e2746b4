pub mod evaluate;
pub mod extract;
pub mod pipeline;
pub mod pretrain;
pub mod report;
pub mod synth;
pub mod train_verifiers;

use std::path::{Path, PathBuf};

use osv_core::synth::corpus::MANIFEST_NAME;
use osv_core::synth::Manifest;
use osv_core::TransferStrategy;

use crate::args::FinetuneArgs;
use crate::UsageError;

/// Loads the manifest of a corpus directory or manifest file, with a
/// usage error when it does not exist.
pub fn load_manifest(path: &Path) -> anyhow::Result<Manifest> {
    let file = if path.is_dir() { path.join(MANIFEST_NAME) } else { path.to_path_buf() };
    if !file.is_file() {
        return Err(UsageError(format!("no corpus manifest at {}", file.display())).into());
    }
    Ok(Manifest::load(path)?)
}

pub fn strategy(
    kind: osv_core::StrategyKind,
    checkpoint: Option<PathBuf>,
    finetune: &FinetuneArgs,
) -> osv_core::Result<TransferStrategy> {
    let s = TransferStrategy {
        kind,
        source_checkpoint: checkpoint,
        finetune_epochs: finetune.finetune_epochs,
        finetune_lr: finetune.finetune_lr,
    };
    s.validate()?;
    Ok(s)
}

pub fn require_file(path: &Path, what: &str) -> Result<(), UsageError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(UsageError(format!("{what} {} does not exist", path.display())))
    }
}
