use anyhow::Result;
use osv_core::synth::{corpus_checksum, generate_corpus, CorpusSpec, Manifest};

use crate::args::{CorpusKind, SynthArgs};

pub fn spec(a: &SynthArgs) -> osv_core::Result<CorpusSpec> {
    let mut spec = match a.kind {
        CorpusKind::Handwriting => CorpusSpec::handwriting(a.writers, a.words, a.samples, a.seed),
        CorpusKind::Signatures => CorpusSpec::signatures(a.writers, a.genuine, a.skilled, a.seed),
    };
    spec.forgery_scale = a.forgery_scale;
    spec.validate()?;
    Ok(spec)
}

pub fn run(a: &SynthArgs) -> Result<Manifest> {
    let spec = spec(a)?;
    log::info!("generating {} samples into {}", count(&spec), a.out.display());
    let manifest = generate_corpus(&spec, &a.out)?;
    println!(
        "wrote {} samples to {} (checksum {})",
        manifest.entries.len(),
        a.out.display(),
        corpus_checksum(&manifest)?
    );
    Ok(manifest)
}

fn count(spec: &CorpusSpec) -> usize {
    spec.writers * (spec.words * spec.samples_per_cell + spec.genuine + spec.skilled)
}
