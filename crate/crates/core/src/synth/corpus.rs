//! On-disk corpora and their manifest.
//!
//! Layout: `writers/<id>/{word_<k>|genuine|skilled}/<n>.pgm` under the
//! corpus root, plus `manifest.txt` with one line per file:
//! `path writer_id label sample_seed`.

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::generator::{generate_sample, SampleKind, SampleRequest, WriterProfile, GENERATOR_VERSION};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::imaging::{pgm, preprocess_to, CanonicalInput};
use crate::rng::{self, tag};

pub const MANIFEST_NAME: &str = "manifest.txt";

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSpec {
    pub writers: usize,
    /// Word classes per writer; 0 for a signature-only corpus.
    pub words: usize,
    pub samples_per_cell: usize,
    pub genuine: usize,
    pub skilled: usize,
    pub master_seed: u64,
    pub forgery_scale: f64,
}

impl CorpusSpec {
    pub fn handwriting(writers: usize, words: usize, samples_per_cell: usize, master_seed: u64) -> Self {
        Self {
            writers,
            words,
            samples_per_cell,
            genuine: 0,
            skilled: 0,
            master_seed,
            forgery_scale: 0.3,
        }
    }

    pub fn signatures(writers: usize, genuine: usize, skilled: usize, master_seed: u64) -> Self {
        Self {
            writers,
            words: 0,
            samples_per_cell: 0,
            genuine,
            skilled,
            master_seed,
            forgery_scale: 0.3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.writers == 0 {
            return Err(Error::Config("corpus needs at least one writer".into()));
        }
        if self.words > 0 && self.samples_per_cell == 0 {
            return Err(Error::Config("samples per word must be at least 1".into()));
        }
        if self.words == 0 && self.genuine == 0 && self.skilled == 0 {
            return Err(Error::Config("corpus would contain no samples".into()));
        }
        if !(self.forgery_scale >= 0.0 && self.forgery_scale.is_finite()) {
            return Err(Error::Config(format!(
                "forgery scale must be non-negative, got {}",
                self.forgery_scale
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntryLabel {
    Word(u32),
    Genuine,
    Skilled,
}

impl EntryLabel {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "genuine" => Some(EntryLabel::Genuine),
            "skilled" => Some(EntryLabel::Skilled),
            _ => s.strip_prefix("word_")?.parse().ok().map(EntryLabel::Word),
        }
    }
}

impl fmt::Display for EntryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntryLabel::Word(k) => write!(f, "word_{k}"),
            EntryLabel::Genuine => f.write_str("genuine"),
            EntryLabel::Skilled => f.write_str("skilled"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Relative to the corpus root, `/`-separated.
    pub path: String,
    pub writer_id: u32,
    pub label: EntryLabel,
    pub index: u32,
    pub sample_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn render(&self) -> String {
        let mut s = format!("# osv corpus, generator v{GENERATOR_VERSION}\n");
        for e in &self.entries {
            s.push_str(&format!("{} {} {} {}\n", e.path, e.writer_id, e.label, e.sample_seed));
        }
        s
    }

    pub fn parse(text: &str, root: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| Error::Parse {
                offset: lineno + 1,
                message: format!("manifest line {}: {msg}", lineno + 1),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [path, writer, label, seed] = fields[..] else {
                return Err(bad("expected 4 fields"));
            };
            let writer_id = writer.parse().map_err(|_| bad("bad writer id"))?;
            let label = EntryLabel::parse(label).ok_or_else(|| bad("bad label"))?;
            let sample_seed = seed.parse().map_err(|_| bad("bad sample seed"))?;
            let index = Path::new(path)
                .file_stem()
                .and_then(|s| s.to_str())
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("file name is not <n>.pgm"))?;
            entries.push(ManifestEntry {
                path: path.to_string(),
                writer_id,
                label,
                index,
                sample_seed,
            });
        }
        Ok(Self {
            root: root.to_path_buf(),
            entries,
        })
    }

    /// Reads `manifest.txt` from a corpus directory (or a manifest path).
    pub fn load(path: &Path) -> Result<Self> {
        let (file, root) = if path.is_dir() {
            (path.join(MANIFEST_NAME), path.to_path_buf())
        } else {
            (path.to_path_buf(), path.parent().unwrap_or(Path::new(".")).to_path_buf())
        };
        Self::parse(&fsutil::read_string(&file)?, &root)
    }

    pub fn file_path(&self, e: &ManifestEntry) -> PathBuf {
        self.root.join(&e.path)
    }

    pub fn writer_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.entries.iter().map(|e| e.writer_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn word_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self
            .entries
            .iter()
            .filter_map(|e| match e.label {
                EntryLabel::Word(k) => Some(k),
                _ => None,
            })
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

fn writer_seed(master_seed: u64, writer: u32) -> u64 {
    rng::derive(master_seed, &[tag::WRITER, writer as u64])
}

fn sample_seed(master_seed: u64, writer: u32, label: EntryLabel, n: u32) -> u64 {
    let cell = match label {
        EntryLabel::Word(k) => 2 + k as u64,
        EntryLabel::Genuine => 0,
        EntryLabel::Skilled => 1,
    };
    rng::derive(master_seed, &[tag::SAMPLE, writer as u64, cell, n as u64])
}

/// Lists the samples of a corpus without rendering them.
pub fn plan_corpus(spec: &CorpusSpec) -> Result<Vec<ManifestEntry>> {
    spec.validate()?;
    let mut out = Vec::new();
    for w in 0..spec.writers as u32 {
        let mut cells: Vec<(EntryLabel, usize)> = (0..spec.words as u32)
            .map(|k| (EntryLabel::Word(k), spec.samples_per_cell))
            .collect();
        cells.push((EntryLabel::Genuine, spec.genuine));
        cells.push((EntryLabel::Skilled, spec.skilled));
        for (label, count) in cells {
            for n in 0..count as u32 {
                out.push(ManifestEntry {
                    path: format!("writers/{w:03}/{label}/{n:03}.pgm"),
                    writer_id: w,
                    label,
                    index: n,
                    sample_seed: sample_seed(spec.master_seed, w, label, n),
                });
            }
        }
    }
    Ok(out)
}

/// Writes every sample and the manifest under `root`.
pub fn generate_corpus(spec: &CorpusSpec, root: &Path) -> Result<Manifest> {
    let entries = plan_corpus(spec)?;
    let profiles: Vec<WriterProfile> = (0..spec.writers as u32)
        .map(|w| WriterProfile::new(writer_seed(spec.master_seed, w)))
        .collect();
    entries.par_iter().try_for_each(|e| {
        let kind = match e.label {
            EntryLabel::Word(word_id) => SampleKind::Word {
                vocabulary_seed: spec.master_seed,
                word_id,
            },
            EntryLabel::Genuine => SampleKind::Genuine,
            EntryLabel::Skilled => SampleKind::Skilled {
                scale: spec.forgery_scale,
            },
        };
        let img = generate_sample(&SampleRequest::new(&profiles[e.writer_id as usize], kind, e.sample_seed));
        pgm::save(&img, &root.join(&e.path))
    })?;
    let manifest = Manifest {
        root: root.to_path_buf(),
        entries,
    };
    fsutil::write_atomic(&root.join(MANIFEST_NAME), manifest.render().as_bytes())?;
    Ok(manifest)
}

/// Loads and preprocesses the listed samples at `input_size`, in order.
pub fn load_inputs(manifest: &Manifest, entries: &[&ManifestEntry], input_size: usize) -> Result<Vec<CanonicalInput>> {
    entries
        .par_iter()
        .map(|e| Ok(preprocess_to(&pgm::load(&manifest.file_path(e))?, input_size)))
        .collect()
}

/// SHA-256 over the manifest and every listed file, in manifest order.
pub fn corpus_checksum(manifest: &Manifest) -> Result<String> {
    let mut all = manifest.render().into_bytes();
    for e in &manifest.entries {
        all.extend_from_slice(fsutil::sha256_hex(&fsutil::read(&manifest.file_path(e))?).as_bytes());
    }
    Ok(fsutil::sha256_hex(&all))
}
