//! Deterministic inputs shared by the benchmarks in `benches/`.

use osv_core::imaging::GrayImage;
use osv_core::nn::Tensor;
use osv_core::svm::TrainingSet;
use osv_core::synth::{generate_sample, SampleKind, SampleRequest, WriterProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut r = rng(seed);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| r.random_range(-1.0f32..1.0)).collect()).unwrap()
}

/// A verifier-sized problem: `genuine` positives near one centre and
/// `forgeries` negatives spread around the origin.
pub fn training_set(genuine: usize, forgeries: usize, dim: usize, seed: u64) -> TrainingSet {
    let mut r = rng(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..genuine + forgeries {
        let positive = i < genuine;
        x.push(
            (0..dim)
                .map(|k| {
                    let centre = if positive && k % 7 == 0 { 0.8 } else { 0.3 };
                    centre + r.random_range(-0.25f32..0.25)
                })
                .collect(),
        );
        y.push(if positive { 1 } else { -1 });
    }
    TrainingSet::new(x, y).unwrap()
}

/// Scores of `n` genuine and `n` forgery attempts with overlapping
/// distributions.
pub fn scores(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let genuine = (0..n).map(|_| r.random_range(-0.5..1.5)).collect();
    let forgery = (0..n).map(|_| r.random_range(-1.5..0.5)).collect();
    (genuine, forgery)
}

pub fn signature_image(seed: u64) -> GrayImage {
    let writer = WriterProfile::new(seed);
    generate_sample(&SampleRequest::new(&writer, SampleKind::Genuine, seed + 1))
}
