#![allow(dead_code)]
//! Small labelled image sets for training tests.

use osv_core::CanonicalInput;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `per_class` noisy copies of a class-specific bar pattern, interleaved
/// by class.
pub fn patterned(classes: usize, per_class: usize, size: usize, seed: u64) -> (Vec<CanonicalInput>, Vec<usize>) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(classes * per_class);
    let mut labels = Vec::with_capacity(classes * per_class);
    for _ in 0..per_class {
        for c in 0..classes {
            let mut data = vec![0.0f32; size * size];
            let band = size / (classes + 1);
            let start = (c * size) / classes;
            for y in 0..size {
                for x in 0..size {
                    let on = if c % 2 == 0 {
                        (start..start + band).contains(&y)
                    } else {
                        (start..start + band).contains(&x)
                    };
                    let noise: f32 = r.random_range(0.0..0.3);
                    data[y * size + x] = if on { 1.0 - noise } else { noise };
                }
            }
            inputs.push(CanonicalInput::from_vec(size, data).unwrap());
            labels.push(c);
        }
    }
    (inputs, labels)
}

/// Uniform noise inputs in [0, 1).
pub fn noise(count: usize, size: usize, seed: u64) -> Vec<CanonicalInput> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let data = (0..size * size).map(|_| r.random_range(0.0f32..1.0)).collect();
            CanonicalInput::from_vec(size, data).unwrap()
        })
        .collect()
}
