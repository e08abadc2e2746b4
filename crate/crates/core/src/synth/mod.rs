//! Synthetic handwriting and signature corpora.

pub mod corpus;
pub mod generator;

pub use generator::{
    generate_sample, word_shape, SampleKind, SampleRequest, WriterProfile, CANVAS_HEIGHT, CANVAS_WIDTH,
    GENERATOR_VERSION, GENUINE_JITTER, SKILLED_NOISE_UNIT,
};
pub use corpus::{corpus_checksum, generate_corpus, load_inputs, plan_corpus, CorpusSpec, EntryLabel, Manifest, ManifestEntry};
