use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use anyhow::Result;
use osv_core::eval::{render_csv, render_table, run_protocol, strategy_key, SignatureDataset};
use osv_core::fsutil;
use osv_core::resnet::load_checkpoint_meta;
use osv_core::transfer::PrepareOptions;
use osv_core::{EvalReport, KernelSpec, ProtocolConfig, StrategyKind};

use super::{load_manifest, require_file, strategy};
use crate::args::EvaluateArgs;
use crate::UsageError;

/// One protocol run per strategy and checkpoint, keyed by table column.
struct Planned {
    key: String,
    input_size: usize,
    config: ProtocolConfig,
}

fn plan(a: &EvaluateArgs) -> Result<Vec<Planned>> {
    let checkpoints = a.checkpoints.as_ref().map(|l| l.0.clone()).unwrap_or_default();
    for p in &checkpoints {
        require_file(p, "checkpoint")?;
    }
    let mut planned: Vec<Planned> = Vec::new();
    for kind in distinct(&a.strategies.0) {
        let sources: Vec<Option<std::path::PathBuf>> = match kind {
            StrategyKind::FromScratch => vec![None],
            _ if checkpoints.is_empty() => {
                return Err(UsageError(format!("strategy '{kind}' needs --checkpoints")).into());
            }
            _ => checkpoints.iter().cloned().map(Some).collect(),
        };
        for source in sources {
            let (task, model_config) = match &source {
                Some(p) => {
                    let meta = load_checkpoint_meta(p)?;
                    (Some(meta.task), meta.config)
                }
                None => (None, a.arch.config(2)),
            };
            let key = strategy_key(kind, task);
            if planned.iter().any(|p| p.key == key) {
                return Err(UsageError(format!("two runs would both fill the '{key}' column")).into());
            }
            let kernels = a
                .protocol
                .kernels
                .0
                .iter()
                .map(|k| KernelSpec::parse(k, model_config.feature_dim()))
                .collect::<osv_core::Result<Vec<_>>>()?;
            let config = ProtocolConfig {
                train_counts: a.protocol.train_counts.0.clone(),
                seeds: a.protocol.seed_list.0.clone(),
                strategy: strategy(kind, source, &a.finetune)?,
                kernels,
                c: a.protocol.c,
                forgery_count: a.protocol.forgeries,
                prepare: PrepareOptions {
                    scratch_config: a.arch.config(2),
                    sgd: a.train.sgd(0),
                },
                extract_batch: a.protocol.extract_batch,
            };
            config.validate()?;
            planned.push(Planned {
                key,
                input_size: model_config.input_size,
                config,
            });
        }
    }
    Ok(planned)
}

/// The listed strategies without repeats, in order.
fn distinct(kinds: &[StrategyKind]) -> Vec<StrategyKind> {
    let mut seen = Vec::new();
    for &k in kinds {
        if !seen.contains(&k) {
            seen.push(k);
        }
    }
    seen
}

pub fn run(a: &EvaluateArgs) -> Result<EvalReport> {
    let planned = plan(a)?;
    let manifest = load_manifest(&a.data)?;
    let mut datasets: BTreeMap<usize, SignatureDataset> = BTreeMap::new();
    let mut report = EvalReport::default();
    for p in &planned {
        if let Entry::Vacant(slot) = datasets.entry(p.input_size) {
            slot.insert(SignatureDataset::load(&manifest, p.input_size)?);
        }
        log::info!("evaluating {}", p.key);
        report.merge(run_protocol(&datasets[&p.input_size], &p.config)?);
    }
    let table = render_table(&report);
    fsutil::write_atomic(&a.out.join("report.csv"), render_csv(&report).as_bytes())?;
    fsutil::write_atomic(&a.out.join("report.txt"), table.as_bytes())?;
    print!("{table}");
    Ok(report)
}
