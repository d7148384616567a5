//! Subword-enriched word vectors, document vectors and the supervised
//! averaged-embedding classifier.
//!
//! Words are represented by their own input row plus the rows of their
//! hashed character n-grams. Only buckets reachable from the training
//! vocabulary are stored; any other bucket is an all-zero row.

mod skipgram;
mod subword;
mod supervised;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binio::{fnv1a64, BinReader, BinWriter};
use crate::error::{Error, Result};

pub use skipgram::train_unsupervised;
pub use subword::{char_ngrams, ngram_buckets};
pub use supervised::{train_supervised, ClassifierModel, Prediction, SupervisedReport};

use subword::SubwordTable;

const VEC_MAGIC: &[u8] = b"TFVEC1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub min_n: usize,
    pub max_n: usize,
    pub buckets: u32,
    /// Initial learning rate, decayed linearly to zero over training.
    pub lr: f64,
    pub epochs: usize,
    pub min_count: u64,
    pub seed: u64,
    /// Number of SGD shards run concurrently. Only 1 is reproducible.
    pub threads: usize,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            min_n: 3,
            max_n: 6,
            buckets: 2_000_000,
            lr: 0.05,
            epochs: 5,
            min_count: 1,
            seed: 42,
            threads: 1,
        }
    }
}

impl EmbedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dim must be at least 1"));
        }
        if self.window == 0 {
            return Err(Error::invalid("window must be at least 1"));
        }
        if self.negatives == 0 {
            return Err(Error::invalid("negatives must be at least 1"));
        }
        if self.min_n == 0 || self.min_n > self.max_n {
            return Err(Error::invalid(format!(
                "need 1 <= min_n <= max_n, got {}..{}",
                self.min_n, self.max_n
            )));
        }
        if self.buckets == 0 {
            return Err(Error::invalid("buckets must be at least 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("lr must be positive, got {}", self.lr)));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.min_count == 0 {
            return Err(Error::invalid("min_count must be at least 1"));
        }
        if self.threads == 0 {
            return Err(Error::invalid("threads must be at least 1"));
        }
        Ok(())
    }
}

/// Bucket ids of the n-grams of `word` under `cfg`.
pub fn extract_ngrams(word: &str, cfg: &EmbedConfig) -> Vec<u32> {
    ngram_buckets(word, cfg.min_n, cfg.max_n, cfg.buckets)
}

/// An N-component document vector. `empty` is set when no token had a
/// non-zero vector, in which case `values` is all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct DocVector {
    pub values: Vec<f64>,
    pub empty: bool,
}

/// Gradient of a scalar loss, keyed by matrix row. Rows are listed once,
/// ascending.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Gradient {
    pub input: Vec<(usize, Vec<f64>)>,
    pub output: Vec<(usize, Vec<f64>)>,
}

impl Gradient {
    pub(crate) fn accumulate(rows: &[usize], grads: &[Vec<f64>]) -> Vec<(usize, Vec<f64>)> {
        let mut out: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
        for (&r, g) in rows.iter().zip(grads) {
            let e = out.entry(r).or_insert_with(|| vec![0.0; g.len()]);
            for (a, b) in e.iter_mut().zip(g) {
                *a += b;
            }
        }
        out.into_iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    config: EmbedConfig,
    input: SubwordTable,
    /// Row-major `words x dim`.
    output: Vec<f32>,
}

impl EmbeddingModel {
    pub fn config(&self) -> &EmbedConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.input.dim
    }

    /// Words that survived `min_count`, in row order.
    pub fn words(&self) -> &[String] {
        &self.input.words
    }

    pub fn word_id(&self, word: &str) -> Option<u32> {
        self.input.word_index.get(word).copied()
    }

    /// Number of stored n-gram bucket rows.
    pub fn active_buckets(&self) -> usize {
        self.input.bucket_ids.len()
    }

    /// Input rows summed into `word`'s vector: its own row when known, then
    /// the rows of its stored n-grams.
    pub fn input_rows(&self, word: &str) -> Vec<usize> {
        self.input.token_rows(word)
    }

    pub fn input_matrix(&self) -> &[f32] {
        &self.input.matrix
    }

    pub fn input_matrix_mut(&mut self) -> &mut [f32] {
        &mut self.input.matrix
    }

    pub fn output_matrix(&self) -> &[f32] {
        &self.output
    }

    pub fn output_matrix_mut(&mut self) -> &mut [f32] {
        &mut self.output
    }

    /// Sum of the word row (if in vocabulary) and its n-gram rows.
    pub fn word_vector(&self, word: &str) -> Vec<f64> {
        self.input.sum_rows(&self.input.token_rows(word))
    }

    /// The n-gram part of a word's vector alone.
    pub fn ngram_vector(&self, word: &str) -> Vec<f64> {
        self.input.sum_rows(&self.input.ngram_rows(word))
    }

    pub fn doc_vector<S: AsRef<str>>(&self, tokens: &[S]) -> DocVector {
        mean_of_unit_vectors(self.dim(), tokens.iter().map(|t| self.word_vector(t.as_ref())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BinWriter::create(path, VEC_MAGIC)?;
        w.json(&self.config)?;
        write_table(&mut w, &self.input)?;
        w.f32s(&self.output)?;
        w.finish()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BinReader::open(path, VEC_MAGIC)?;
        let config: EmbedConfig = r.json()?;
        config.validate()?;
        let input = read_table(&mut r, &config)?;
        let output = r.f32s(input.words.len() * config.dim)?;
        r.expect_eof()?;
        check_finite(path, &output)?;
        Ok(EmbeddingModel { config, input, output })
    }
}

/// Free-function form of [`EmbeddingModel::doc_vector`].
pub fn doc_vector<S: AsRef<str>>(model: &EmbeddingModel, tokens: &[S]) -> DocVector {
    model.doc_vector(tokens)
}

/// Mean of L2-normalised vectors, skipping zero vectors.
pub(crate) fn mean_of_unit_vectors(dim: usize, vectors: impl Iterator<Item = Vec<f64>>) -> DocVector {
    let mut acc = vec![0.0; dim];
    let mut n = 0usize;
    for v in vectors {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            continue;
        }
        for (a, x) in acc.iter_mut().zip(&v) {
            *a += x / norm;
        }
        n += 1;
    }
    if n == 0 {
        return DocVector {
            values: acc,
            empty: true,
        };
    }
    acc.iter_mut().for_each(|a| *a /= n as f64);
    DocVector {
        values: acc,
        empty: false,
    }
}

pub(crate) fn words_hash(words: &[String]) -> u64 {
    let mut bytes = Vec::new();
    for w in words {
        bytes.extend_from_slice(w.as_bytes());
        bytes.push(0);
    }
    fnv1a64(&bytes)
}

fn write_table(w: &mut BinWriter, table: &SubwordTable) -> Result<()> {
    w.u64(words_hash(&table.words))?;
    w.len(table.words.len())?;
    for word in &table.words {
        w.str(word)?;
    }
    w.len(table.bucket_ids.len())?;
    w.u32s(&table.bucket_ids)?;
    w.f32s(&table.matrix)
}

fn read_table(r: &mut BinReader, cfg: &EmbedConfig) -> Result<SubwordTable> {
    let hash = r.u64()?;
    let n = r.len()?;
    let mut words = Vec::with_capacity(n);
    for _ in 0..n {
        words.push(r.str()?);
    }
    let found = words_hash(&words);
    if found != hash {
        return Err(Error::VocabularyMismatch { expected: hash, found });
    }
    let word_index: std::collections::HashMap<String, u32> =
        words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
    if word_index.len() != words.len() {
        return Err(Error::format(r.path(), "duplicate word in vocabulary"));
    }
    let nb = r.len()?;
    let bucket_ids = r.u32s(nb)?;
    if bucket_ids.windows(2).any(|p| p[0] >= p[1]) || bucket_ids.iter().any(|&b| b >= cfg.buckets) {
        return Err(Error::format(
            r.path(),
            "bucket ids must be ascending and below the bucket count",
        ));
    }
    let matrix = r.f32s((n + nb) * cfg.dim)?;
    check_finite(r.path(), &matrix)?;
    if matrix.is_empty() {
        return Err(Error::format(r.path(), "empty embedding table"));
    }
    Ok(SubwordTable::with_buckets(
        words,
        word_index,
        bucket_ids,
        cfg.dim,
        cfg.min_n,
        cfg.max_n,
        cfg.buckets,
        matrix,
    ))
}

fn check_finite(path: &Path, values: &[f32]) -> Result<()> {
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::format(path, "non-finite matrix entry"));
    }
    Ok(())
}
