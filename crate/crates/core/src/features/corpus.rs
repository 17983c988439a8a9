//! Corpus manifests.
//!
//! A manifest is UTF-8 text, one utterance per line, tab-separated fields in
//! this order:
//!
//! ```text
//! id <TAB> text <TAB> seed <TAB> duration_s
//! ```
//!
//! Lines starting with `#` are comments. `seed` regenerates the utterance
//! bit-for-bit through [`synthesize_utterance`](super::synthesize_utterance)
//! under the same [`CorpusConfig`].

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{derive_seed, seeded_rng};

use super::{synthesize_utterance, CorpusConfig, Utterance};

#[derive(Clone, Debug, PartialEq)]
pub struct UtteranceRecord {
    pub id: String,
    pub text: String,
    pub seed: u64,
    pub duration_secs: f64,
}

impl UtteranceRecord {
    pub fn synthesize(&self, cfg: &CorpusConfig) -> Result<Utterance> {
        let labels = cfg.alphabet.encode(&self.text)?;
        synthesize_utterance(&labels, cfg, self.seed)
    }
}

/// Sizes and seed of a generated corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSpec {
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    pub min_symbols: usize,
    pub max_symbols: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec { n_train: 2000, n_valid: 100, n_test: 200, min_symbols: 3, max_symbols: 8, seed: 1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub train: Vec<UtteranceRecord>,
    pub valid: Vec<UtteranceRecord>,
    pub test: Vec<UtteranceRecord>,
}

/// Random "words" over the non-space labels, separated by single spaces; never
/// starts or ends with a space.
fn random_text<R: Rng>(cfg: &CorpusConfig, len: usize, rng: &mut R) -> String {
    let letters: Vec<char> = cfg.alphabet.labels().iter().copied().filter(|&c| c != ' ').collect();
    let has_space = cfg.alphabet.labels().contains(&' ');
    let mut out = String::with_capacity(len);
    let mut prev_space = true;
    for i in 0..len {
        let interior = i > 0 && i + 1 < len;
        if has_space && interior && !prev_space && rng.gen_bool(0.25) {
            out.push(' ');
            prev_space = true;
        } else {
            out.push(letters[rng.gen_range(0..letters.len())]);
            prev_space = false;
        }
    }
    out
}

pub fn generate_corpus(spec: &CorpusSpec, cfg: &CorpusConfig) -> Result<Corpus> {
    if spec.min_symbols == 0 || spec.min_symbols > spec.max_symbols {
        return Err(Error::Usage(format!(
            "bad utterance length range {}..={}",
            spec.min_symbols, spec.max_symbols
        )));
    }
    let mut rng = seeded_rng(spec.seed);
    let total = spec.n_train + spec.n_valid + spec.n_test;
    let texts: Vec<String> = (0..total)
        .map(|_| {
            let len = rng.gen_range(spec.min_symbols..=spec.max_symbols);
            random_text(cfg, len, &mut rng)
        })
        .collect();
    let records = texts
        .into_par_iter()
        .enumerate()
        .map(|(i, text)| {
            let (split, idx) = if i < spec.n_train {
                ("train", i)
            } else if i < spec.n_train + spec.n_valid {
                ("valid", i - spec.n_train)
            } else {
                ("test", i - spec.n_train - spec.n_valid)
            };
            let seed = derive_seed(spec.seed, i as u64);
            let labels = cfg.alphabet.encode(&text)?;
            let u = synthesize_utterance(&labels, cfg, seed)?;
            Ok(UtteranceRecord {
                id: format!("{split}-{idx:05}"),
                text,
                seed,
                duration_secs: u.waveform.duration_secs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut it = records.into_iter();
    let train = it.by_ref().take(spec.n_train).collect();
    let valid = it.by_ref().take(spec.n_valid).collect();
    let test = it.collect();
    Ok(Corpus { train, valid, test })
}

pub fn format_manifest(records: &[UtteranceRecord]) -> String {
    let mut out = String::from("# id\ttext\tseed\tduration_s\n");
    for r in records {
        writeln!(out, "{}\t{}\t{}\t{:.6}", r.id, r.text, r.seed, r.duration_secs).expect("string write");
    }
    out
}

pub fn parse_manifest(text: &str) -> Result<Vec<UtteranceRecord>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::Format(format!("manifest line {}: expected 4 fields, got {}", n + 1, fields.len())));
        }
        let bad = |what: &str| Error::Format(format!("manifest line {}: bad {what}", n + 1));
        out.push(UtteranceRecord {
            id: fields[0].to_string(),
            text: fields[1].to_string(),
            seed: fields[2].parse().map_err(|_| bad("seed"))?,
            duration_secs: fields[3].parse().map_err(|_| bad("duration"))?,
        });
    }
    Ok(out)
}

pub fn write_manifest(path: impl AsRef<Path>, records: &[UtteranceRecord]) -> Result<()> {
    fs::write(path, format_manifest(records))?;
    Ok(())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<UtteranceRecord>> {
    parse_manifest(&fs::read_to_string(path)?)
}
