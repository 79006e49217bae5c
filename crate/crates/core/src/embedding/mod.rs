//! Word embeddings: a subword skip-gram trainer for the local background
//! corpus, a reader for pre-trained text vectors, and sentence vectors.

mod io;
mod skipgram;
pub mod subword;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{load_pretrained_vectors, parse_text_vectors, write_text_vectors};
pub use skipgram::{
    negative_sampling_loss, negative_sampling_loss_and_gradient, train_subword_skipgram,
    train_subword_skipgram_with_report, NsGradient, TrainingReport,
};

use crate::preprocess::TokenizedMessage;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("invalid embedding configuration: {0}")]
    Config(String),
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: word `{word}` has {found} values, expected {expected}")]
    DimensionMismatch {
        line: usize,
        word: String,
        expected: usize,
        found: usize,
    },
    #[error("not an embedding model file (bad magic)")]
    BadMagic,
    #[error("unsupported embedding model format version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt model file: {0}")]
    Corrupt(String),
}

/// Skip-gram hyperparameters. Defaults: 20 dimensions, a 5-word window,
/// 5 negatives, 5 epochs at learning rate 0.05 (linearly decayed),
/// character 3- to 6-grams hashed into 2,000,000 buckets, min count 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkipGramParams {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub min_n: usize,
    pub max_n: usize,
    pub buckets: u32,
    pub min_count: u64,
    pub seed: u64,
    /// 1 trains deterministically; more uses lock-free parallel workers.
    pub threads: usize,
}

impl Default for SkipGramParams {
    fn default() -> Self {
        SkipGramParams {
            dim: 20,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.05,
            min_n: 3,
            max_n: 6,
            buckets: 2_000_000,
            min_count: 1,
            seed: 0,
            threads: 1,
        }
    }
}

impl SkipGramParams {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        let fail = |m: &str| Err(EmbeddingError::Config(m.to_string()));
        if self.dim == 0 {
            return fail("dim must be at least 1");
        }
        if self.window == 0 {
            return fail("window must be at least 1");
        }
        if self.negatives == 0 {
            return fail("negatives must be at least 1");
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if self.min_n == 0 || self.max_n < self.min_n {
            return fail("n-gram range must satisfy 1 <= min_n <= max_n");
        }
        if self.buckets == 0 {
            return fail("buckets must be positive");
        }
        if self.min_count == 0 {
            return fail("min_count must be at least 1");
        }
        if self.threads == 0 {
            return fail("threads must be at least 1");
        }
        Ok(())
    }
}

/// Hashed n-gram rows. Only buckets hit by some vocabulary word are stored;
/// every other bucket reads as absent.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SubwordTable {
    pub min_n: usize,
    pub max_n: usize,
    pub buckets: u32,
    /// Sorted bucket ids, aligned with `rows`.
    pub ids: Vec<u32>,
    pub rows: Vec<f32>,
}

impl SubwordTable {
    fn row(&self, bucket: u32, dim: usize) -> Option<&[f32]> {
        self.ids
            .binary_search(&bucket)
            .ok()
            .map(|i| &self.rows[i * dim..(i + 1) * dim])
    }
}

/// Vocabulary plus vectors. Trained models also carry subword rows, so any
/// non-empty word gets a vector; pre-trained text vectors are lookup-only.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    dim: usize,
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    /// Composed input vectors, `words.len() * dim`.
    vectors: Vec<f32>,
    subwords: Option<SubwordTable>,
    params: Option<SkipGramParams>,
}

impl EmbeddingModel {
    pub(crate) fn from_parts(
        dim: usize,
        words: Vec<String>,
        counts: Vec<u64>,
        vectors: Vec<f32>,
        subwords: Option<SubwordTable>,
        params: Option<SkipGramParams>,
    ) -> Self {
        debug_assert_eq!(vectors.len(), words.len() * dim);
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        EmbeddingModel {
            dim,
            words,
            counts,
            index,
            vectors,
            subwords,
            params,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_len(&self) -> usize {
        self.words.len()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Training count per word; zero for pre-trained vectors.
    pub fn count(&self, word: &str) -> Option<u64> {
        self.index.get(word).map(|&i| self.counts[i])
    }

    pub fn params(&self) -> Option<&SkipGramParams> {
        self.params.as_ref()
    }

    pub fn has_subwords(&self) -> bool {
        self.subwords.is_some()
    }

    /// Vector for `word`. Out-of-vocabulary words average whichever of their
    /// n-gram rows exist; with none (or no subword table) the result is zero.
    pub fn word_vector(&self, word: &str) -> Vec<f32> {
        let mut out = vec![0.0; self.dim];
        if word.is_empty() {
            return out;
        }
        if let Some(&i) = self.index.get(word) {
            out.copy_from_slice(&self.vectors[i * self.dim..(i + 1) * self.dim]);
            return out;
        }
        if let Some(table) = &self.subwords {
            let mut n = 0usize;
            for b in subword::ngram_buckets(word, table.min_n, table.max_n, table.buckets) {
                if let Some(row) = table.row(b, self.dim) {
                    add_assign(&mut out, row);
                    n += 1;
                }
            }
            if n > 0 {
                scale(&mut out, 1.0 / n as f32);
            }
        }
        out
    }

    /// Mean of the L2-normalized token vectors; zero-norm tokens are skipped
    /// and an empty message yields the zero vector.
    pub fn sentence_vector(&self, tm: &TokenizedMessage) -> Vec<f32> {
        self.sentence_vector_of(tm.tokens.iter().map(String::as_str))
    }

    pub fn sentence_vector_of<'a>(&self, tokens: impl IntoIterator<Item = &'a str>) -> Vec<f32> {
        let mut out = vec![0.0f32; self.dim];
        let mut n = 0usize;
        for token in tokens {
            let mut v = self.word_vector(token);
            let norm = l2_norm(&v);
            if norm > 0.0 {
                scale(&mut v, 1.0 / norm);
                add_assign(&mut out, &v);
                n += 1;
            }
        }
        if n > 0 {
            scale(&mut out, 1.0 / n as f32);
        }
        out
    }
}

/// Free-function form of [`EmbeddingModel::word_vector`].
pub fn word_vector(model: &EmbeddingModel, word: &str) -> Vec<f32> {
    model.word_vector(word)
}

pub fn sentence_vector(model: &EmbeddingModel, tm: &TokenizedMessage) -> Vec<f32> {
    model.sentence_vector(tm)
}

pub fn cosine(a: &[f32], b: &[f32]) -> f32 {
    let dot: f32 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let denom = l2_norm(a) * l2_norm(b);
    if denom > 0.0 {
        dot / denom
    } else {
        0.0
    }
}

fn l2_norm(v: &[f32]) -> f32 {
    v.iter().map(|x| x * x).sum::<f32>().sqrt()
}

fn add_assign(acc: &mut [f32], v: &[f32]) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += x;
    }
}

fn scale(v: &mut [f32], s: f32) {
    for x in v {
        *x *= s;
    }
}
