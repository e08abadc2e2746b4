//! End-to-end training behaviour and output shapes of the residual network.

#[path = "support/fixtures.rs"]
mod fixtures;

use osv_core::nn::{Mode, SgdConfig};
use osv_core::resnet::{self, batch_tensor, load_checkpoint, save_checkpoint};
use osv_core::{ResNetConfig, ResNetModel, SourceTaskKind};
use proptest::prelude::*;

#[test]
fn micro_network_learns_a_four_class_task() {
    let (inputs, labels) = fixtures::patterned(4, 50, 62, 21);
    let refs: Vec<_> = inputs.iter().collect();
    let mut model = ResNetModel::build(ResNetConfig::micro(4), 3).unwrap();
    let sgd = SgdConfig {
        learning_rate: 0.05,
        batch_size: 16,
        epochs: 10,
        seed: 3,
        ..SgdConfig::default()
    };
    let log = resnet::train(&mut model, &refs, &labels, &sgd, Mode::Train).unwrap();
    assert_eq!(log.epochs.len(), 10);
    let (test, test_labels) = fixtures::patterned(4, 10, 62, 22);
    let test_refs: Vec<_> = test.iter().collect();
    let acc = resnet::accuracy(&model, &test_refs, &test_labels, 16).unwrap();
    assert!(acc >= 0.9, "held-out accuracy {acc}");
}

#[test]
fn training_stays_finite() {
    let inputs = fixtures::noise(24, 62, 30);
    let labels: Vec<usize> = (0..24).map(|i| i % 3).collect();
    let refs: Vec<_> = inputs.iter().collect();
    let mut model = ResNetModel::build(ResNetConfig::micro(3), 30).unwrap();
    let sgd = SgdConfig {
        learning_rate: 0.1,
        batch_size: 8,
        epochs: 5,
        seed: 30,
        ..SgdConfig::default()
    };
    let log = resnet::train(&mut model, &refs, &labels, &sgd, Mode::Train).unwrap();
    assert!(log.epochs.iter().all(|e| e.loss.is_finite()));
    for (name, t) in model.named_tensors() {
        assert!(t.data().iter().all(|v| v.is_finite()), "{name}");
    }
}

#[test]
fn zero_epochs_keep_the_initialisation() {
    let dir = tempfile::tempdir().unwrap();
    let (inputs, labels) = fixtures::patterned(2, 4, 62, 40);
    let refs: Vec<_> = inputs.iter().collect();
    let mut model = ResNetModel::build(ResNetConfig::micro(2), 40).unwrap();
    let init = model.to_checkpoint_bytes();
    let sgd = SgdConfig {
        epochs: 0,
        ..SgdConfig::default()
    };
    let log = resnet::train(&mut model, &refs, &labels, &sgd, Mode::Train).unwrap();
    assert!(log.epochs.is_empty());
    assert_eq!(model.to_checkpoint_bytes(), init);
    let path = dir.path().join("m.osvw");
    save_checkpoint(&model, SourceTaskKind::WordRecognition, 40, &path).unwrap();
    let (loaded, meta) = load_checkpoint(&path).unwrap();
    assert_eq!(loaded.to_checkpoint_bytes(), init);
    assert_eq!(meta.task, SourceTaskKind::WordRecognition);
}

#[test]
fn standard_network_shapes() {
    let cfg = ResNetConfig::standard(7);
    assert_eq!(cfg.spatial_trace().unwrap(), vec![242, 121, 60, 30, 15, 8, 1]);
    let model = ResNetModel::build(cfg, 1).unwrap();
    assert_eq!(model.feature_dim(), 384);
    let inputs = fixtures::noise(1, 242, 1);
    let f = model.features(&batch_tensor(&[&inputs[0]]).unwrap()).unwrap();
    assert_eq!(f.shape(), &[1, 384]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]
    #[test]
    fn micro_feature_shape_for_any_batch(batch in 1usize..6, seed in 0u64..1000) {
        let model = ResNetModel::build(ResNetConfig::micro(2), seed).unwrap();
        let inputs = fixtures::noise(batch, 62, seed);
        let refs: Vec<_> = inputs.iter().collect();
        let x = batch_tensor(&refs).unwrap();
        prop_assert_eq!(model.features(&x).unwrap().shape().to_vec(), vec![batch, 24]);
        prop_assert_eq!(model.infer(&x).unwrap().logits.shape().to_vec(), vec![batch, 2]);
    }
}
