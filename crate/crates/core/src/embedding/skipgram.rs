//! Skip-gram with negative sampling over words and hashed character n-grams.
//!
//! A word's input representation is the mean of its own row and its n-gram
//! rows. Each (center, context) pair is a binary logistic problem against the
//! context's output vector plus `negatives` output vectors drawn from the
//! unigram distribution raised to 3/4. Like the reference bag-of-tricks
//! trainer, every input row of the center word takes the full step computed
//! for the hidden (mean) vector.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU32, Ordering};

use num_traits::Float;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::subword::ngram_buckets;
use super::{EmbeddingError, EmbeddingModel, SkipGramParams, SubwordTable};
use crate::dataset::Corpus;

fn sigmoid<F: Float>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

fn log_sigmoid<F: Float>(z: F) -> F {
    if z >= F::zero() {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

/// One logistic term: `(loss, d loss / d score)` where score = hidden · target.
fn ns_term<F: Float>(hidden: &[F], target: &[F], positive: bool) -> (F, F) {
    let z = dot(hidden, target);
    if positive {
        (-log_sigmoid(z), sigmoid(z) - F::one())
    } else {
        (-log_sigmoid(-z), sigmoid(z))
    }
}

fn mean_rows<F: Float>(rows: &[Vec<F>]) -> Vec<F> {
    let dim = rows.first().map_or(0, Vec::len);
    let n = F::from(rows.len()).unwrap();
    let mut h = vec![F::zero(); dim];
    for r in rows {
        for (a, &x) in h.iter_mut().zip(r) {
            *a = *a + x;
        }
    }
    h.iter_mut().for_each(|a| *a = *a / n);
    h
}

/// Negative-sampling loss of one example:
/// `-log σ(c·h) - Σ_k log σ(-n_k·h)` with `h` the mean of `input_rows`.
pub fn negative_sampling_loss(input_rows: &[Vec<f64>], context: &[f64], negatives: &[Vec<f64>]) -> f64 {
    let h = mean_rows(input_rows);
    let mut loss = ns_term(&h, context, true).0;
    for n in negatives {
        loss += ns_term(&h, n, false).0;
    }
    loss
}

/// Exact gradient of [`negative_sampling_loss`] with respect to every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct NsGradient {
    pub loss: f64,
    pub input_rows: Vec<Vec<f64>>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

pub fn negative_sampling_loss_and_gradient(
    input_rows: &[Vec<f64>],
    context: &[f64],
    negatives: &[Vec<f64>],
) -> NsGradient {
    let h = mean_rows(input_rows);
    let dim = h.len();
    let mut grad_h = vec![0.0; dim];
    let mut term = |target: &[f64], positive: bool| -> (f64, Vec<f64>) {
        let (l, g) = ns_term(&h, target, positive);
        for (gh, &t) in grad_h.iter_mut().zip(target) {
            *gh += g * t;
        }
        (l, h.iter().map(|&x| g * x).collect())
    };
    let (mut loss, context_grad) = term(context, true);
    let mut negative_grads = Vec::with_capacity(negatives.len());
    for n in negatives {
        let (l, g) = term(n, false);
        loss += l;
        negative_grads.push(g);
    }
    let share = 1.0 / input_rows.len() as f64;
    let row_grad: Vec<f64> = grad_h.iter().map(|g| g * share).collect();
    NsGradient {
        loss,
        input_rows: vec![row_grad; input_rows.len()],
        context: context_grad,
        negatives: negative_grads,
    }
}

/// Per-epoch mean negative-sampling loss over all (center, context) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    pub epoch_losses: Vec<f64>,
    pub pairs: u64,
}

pub fn train_subword_skipgram(
    corpus: &Corpus,
    params: &SkipGramParams,
) -> Result<EmbeddingModel, EmbeddingError> {
    train_subword_skipgram_with_report(corpus, params).map(|(m, _)| m)
}

pub fn train_subword_skipgram_with_report(
    corpus: &Corpus,
    params: &SkipGramParams,
) -> Result<(EmbeddingModel, TrainingReport), EmbeddingError> {
    params.validate()?;
    let layout = Layout::build(corpus, params)?;
    let dim = params.dim;
    let n_input = layout.words.len() + layout.bucket_ids.len();

    let mut init_rng = ChaCha8Rng::seed_from_u64(params.seed);
    let bound = 1.0 / dim as f32;
    let input: Vec<f32> = (0..n_input * dim)
        .map(|_| init_rng.random_range(-bound..bound))
        .collect();
    let output = vec![0.0f32; layout.words.len() * dim];

    let mut stats = vec![(0.0f64, 0u64); params.epochs];
    let (input, output) = if params.threads <= 1 {
        let mut store = Dense { dim, input, output };
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(1));
        run_worker(&mut store, &layout, &layout.sentences, params, &mut rng, &mut stats);
        (store.input, store.output)
    } else {
        let input: Vec<AtomicU32> = input.into_iter().map(|x| AtomicU32::new(x.to_bits())).collect();
        let output: Vec<AtomicU32> = output.into_iter().map(|x| AtomicU32::new(x.to_bits())).collect();
        let chunk = layout.sentences.len().div_ceil(params.threads).max(1);
        let shards: Vec<&[Vec<u32>]> = layout.sentences.chunks(chunk).collect();
        let worker_stats: Vec<Vec<(f64, u64)>> = std::thread::scope(|scope| {
            let handles: Vec<_> = shards
                .into_iter()
                .enumerate()
                .map(|(w, shard)| {
                    let (input, output, layout) = (&input, &output, &layout);
                    scope.spawn(move || {
                        let mut store = Shared { dim, input, output };
                        let mut rng =
                            ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(1 + w as u64));
                        let mut s = vec![(0.0, 0); params.epochs];
                        run_worker(&mut store, layout, shard, params, &mut rng, &mut s);
                        s
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        for ws in worker_stats {
            for (acc, (l, c)) in stats.iter_mut().zip(ws) {
                acc.0 += l;
                acc.1 += c;
            }
        }
        let unwrap = |v: Vec<AtomicU32>| -> Vec<f32> {
            v.into_iter().map(|a| f32::from_bits(a.into_inner())).collect()
        };
        (unwrap(input), unwrap(output))
    };
    drop(output);

    let report = TrainingReport {
        epoch_losses: stats
            .iter()
            .map(|&(l, c)| if c > 0 { l / c as f64 } else { 0.0 })
            .collect(),
        pairs: stats.iter().map(|s| s.1).sum(),
    };

    let nwords = layout.words.len();
    let mut vectors = vec![0.0f32; nwords * dim];
    for (w, rows) in layout.word_rows.iter().enumerate() {
        let out = &mut vectors[w * dim..(w + 1) * dim];
        for &r in rows {
            for (o, x) in out.iter_mut().zip(&input[r * dim..(r + 1) * dim]) {
                *o += x;
            }
        }
        let inv = 1.0 / rows.len() as f32;
        out.iter_mut().for_each(|o| *o *= inv);
    }
    let subwords = SubwordTable {
        min_n: params.min_n,
        max_n: params.max_n,
        buckets: params.buckets,
        rows: input[nwords * dim..].to_vec(),
        ids: layout.bucket_ids,
    };
    let model = EmbeddingModel::from_parts(
        dim,
        layout.words,
        layout.counts,
        vectors,
        Some(subwords),
        Some(params.clone()),
    );
    Ok((model, report))
}

struct Layout {
    words: Vec<String>,
    counts: Vec<u64>,
    bucket_ids: Vec<u32>,
    /// Input rows composing each word: its own row, then its n-gram rows.
    word_rows: Vec<Vec<usize>>,
    sentences: Vec<Vec<u32>>,
    negatives: WeightedIndex<f64>,
}

impl Layout {
    fn build(corpus: &Corpus, params: &SkipGramParams) -> Result<Self, EmbeddingError> {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for m in &corpus.messages {
            for t in &m.tokens {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut vocab: Vec<(&str, u64)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= params.min_count)
            .collect();
        if vocab.is_empty() {
            return Err(EmbeddingError::EmptyCorpus);
        }
        vocab.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let index: HashMap<&str, u32> = vocab
            .iter()
            .enumerate()
            .map(|(i, &(w, _))| (w, i as u32))
            .collect();
        let word_buckets: Vec<Vec<u32>> = vocab
            .iter()
            .map(|&(w, _)| ngram_buckets(w, params.min_n, params.max_n, params.buckets))
            .collect();
        let mut bucket_ids: Vec<u32> = word_buckets.iter().flatten().copied().collect();
        bucket_ids.sort_unstable();
        bucket_ids.dedup();

        let nwords = vocab.len();
        let word_rows = word_buckets
            .iter()
            .enumerate()
            .map(|(w, bs)| {
                std::iter::once(w)
                    .chain(bs.iter().map(|b| {
                        nwords + bucket_ids.binary_search(b).expect("bucket registered")
                    }))
                    .collect()
            })
            .collect();

        let sentences = corpus
            .messages
            .iter()
            .map(|m| {
                m.tokens
                    .iter()
                    .filter_map(|t| index.get(t.as_str()).copied())
                    .collect::<Vec<u32>>()
            })
            .filter(|s| !s.is_empty())
            .collect();

        let negatives = WeightedIndex::new(vocab.iter().map(|&(_, c)| (c as f64).powf(0.75)))
            .map_err(|e| EmbeddingError::Config(format!("negative sampling table: {e}")))?;

        Ok(Layout {
            words: vocab.iter().map(|&(w, _)| w.to_string()).collect(),
            counts: vocab.iter().map(|&(_, c)| c).collect(),
            bucket_ids,
            word_rows,
            sentences,
            negatives,
        })
    }
}

trait Store {
    fn load_input(&self, row: usize, out: &mut [f32]);
    fn add_input(&mut self, row: usize, delta: &[f32]);
    fn load_output(&self, row: usize, out: &mut [f32]);
    fn add_output(&mut self, row: usize, delta: &[f32]);
}

struct Dense {
    dim: usize,
    input: Vec<f32>,
    output: Vec<f32>,
}

impl Store for Dense {
    fn load_input(&self, row: usize, out: &mut [f32]) {
        out.copy_from_slice(&self.input[row * self.dim..(row + 1) * self.dim]);
    }

    fn add_input(&mut self, row: usize, delta: &[f32]) {
        for (p, d) in self.input[row * self.dim..(row + 1) * self.dim].iter_mut().zip(delta) {
            *p += d;
        }
    }

    fn load_output(&self, row: usize, out: &mut [f32]) {
        out.copy_from_slice(&self.output[row * self.dim..(row + 1) * self.dim]);
    }

    fn add_output(&mut self, row: usize, delta: &[f32]) {
        for (p, d) in self.output[row * self.dim..(row + 1) * self.dim].iter_mut().zip(delta) {
            *p += d;
        }
    }
}

/// Lock-free shared parameters. Concurrent read-modify-write cycles may
/// lose updates; only statistical convergence is promised.
struct Shared<'a> {
    dim: usize,
    input: &'a [AtomicU32],
    output: &'a [AtomicU32],
}

fn load_atomic(src: &[AtomicU32], out: &mut [f32]) {
    for (o, a) in out.iter_mut().zip(src) {
        *o = f32::from_bits(a.load(Ordering::Relaxed));
    }
}

fn add_atomic(dst: &[AtomicU32], delta: &[f32]) {
    for (a, d) in dst.iter().zip(delta) {
        let v = f32::from_bits(a.load(Ordering::Relaxed)) + d;
        a.store(v.to_bits(), Ordering::Relaxed);
    }
}

impl Store for Shared<'_> {
    fn load_input(&self, row: usize, out: &mut [f32]) {
        load_atomic(&self.input[row * self.dim..(row + 1) * self.dim], out);
    }

    fn add_input(&mut self, row: usize, delta: &[f32]) {
        add_atomic(&self.input[row * self.dim..(row + 1) * self.dim], delta);
    }

    fn load_output(&self, row: usize, out: &mut [f32]) {
        load_atomic(&self.output[row * self.dim..(row + 1) * self.dim], out);
    }

    fn add_output(&mut self, row: usize, delta: &[f32]) {
        add_atomic(&self.output[row * self.dim..(row + 1) * self.dim], delta);
    }
}

fn run_worker<S: Store>(
    store: &mut S,
    layout: &Layout,
    sentences: &[Vec<u32>],
    params: &SkipGramParams,
    rng: &mut ChaCha8Rng,
    stats: &mut [(f64, u64)],
) {
    let dim = params.dim;
    let nwords = layout.words.len();
    let shard_tokens: usize = sentences.iter().map(Vec::len).sum();
    let total = (shard_tokens * params.epochs).max(1) as f64;
    let mut processed = 0usize;

    let mut hidden = vec![0.0f32; dim];
    let mut row = vec![0.0f32; dim];
    let mut grad = vec![0.0f32; dim];
    let mut delta = vec![0.0f32; dim];

    for stat in stats.iter_mut() {
        for sentence in sentences {
            let lr = (params.learning_rate * (1.0 - processed as f64 / total)) as f32;
            for (pos, &center) in sentence.iter().enumerate() {
                let rows = &layout.word_rows[center as usize];
                let span = rng.random_range(1..=params.window);
                let lo = pos.saturating_sub(span);
                let hi = (pos + span).min(sentence.len() - 1);
                for (c, &target) in sentence.iter().enumerate().take(hi + 1).skip(lo) {
                    if c == pos {
                        continue;
                    }
                    hidden.iter_mut().for_each(|h| *h = 0.0);
                    for &r in rows {
                        store.load_input(r, &mut row);
                        hidden.iter_mut().zip(&row).for_each(|(h, x)| *h += x);
                    }
                    let inv = 1.0 / rows.len() as f32;
                    hidden.iter_mut().for_each(|h| *h *= inv);
                    grad.iter_mut().for_each(|g| *g = 0.0);

                    let mut loss = 0.0f32;
                    let mut step = |store: &mut S, t: usize, positive: bool| {
                        store.load_output(t, &mut row);
                        let (l, g) = ns_term(&hidden, &row, positive);
                        loss += l;
                        let a = -lr * g;
                        grad.iter_mut().zip(&row).for_each(|(gr, o)| *gr += a * o);
                        delta.iter_mut().zip(&hidden).for_each(|(d, h)| *d = a * h);
                        store.add_output(t, &delta);
                    };
                    step(store, target as usize, true);
                    for _ in 0..params.negatives {
                        if nwords < 2 {
                            break;
                        }
                        let neg = loop {
                            let n = layout.negatives.sample(rng) as u32;
                            if n != target {
                                break n;
                            }
                        };
                        step(store, neg as usize, false);
                    }
                    for &r in rows {
                        store.add_input(r, &grad);
                    }
                    stat.0 += loss as f64;
                    stat.1 += 1;
                }
            }
            processed += sentence.len();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::cosine;
    use crate::preprocess::TokenizedMessage;

    fn corpus(sentences: &[&[&str]]) -> Corpus {
        Corpus::new(
            sentences
                .iter()
                .enumerate()
                .map(|(i, s)| TokenizedMessage {
                    id: i.to_string(),
                    tokens: s.iter().map(|t| t.to_string()).collect(),
                })
                .collect(),
        )
    }

    fn small_params(seed: u64) -> SkipGramParams {
        SkipGramParams {
            dim: 10,
            buckets: 10_000,
            seed,
            ..SkipGramParams::default()
        }
    }

    #[test]
    fn empty_corpus_is_a_config_error() {
        assert!(matches!(
            train_subword_skipgram(&Corpus::default(), &small_params(1)),
            Err(EmbeddingError::EmptyCorpus)
        ));
        let bad = SkipGramParams { dim: 0, ..small_params(1) };
        assert!(matches!(
            train_subword_skipgram(&corpus(&[&["a"]]), &bad),
            Err(EmbeddingError::Config(_))
        ));
    }

    #[test]
    fn min_count_filters_vocab() {
        let c = corpus(&[&["a", "b", "a"], &["a", "c"]]);
        let p = SkipGramParams { min_count: 2, ..small_params(1) };
        let m = train_subword_skipgram(&c, &p).unwrap();
        assert_eq!(m.words(), ["a"]);
        assert_eq!(m.count("a"), Some(3));
    }

    #[test]
    fn single_word_vocab_trains() {
        let c = corpus(&[&["solo", "solo", "solo"]]);
        let m = train_subword_skipgram(&c, &small_params(3)).unwrap();
        assert_eq!(m.vocab_len(), 1);
        assert!(m.word_vector("solo").iter().all(|x| x.is_finite()));
    }

    #[test]
    fn seeded_training_is_reproducible() {
        let c = corpus(&[&["a", "b", "c"], &["c", "d"], &["a", "d", "e", "b"]]);
        let m1 = train_subword_skipgram(&c, &small_params(9)).unwrap();
        let m2 = train_subword_skipgram(&c, &small_params(9)).unwrap();
        assert_eq!(m1, m2);
        let m3 = train_subword_skipgram(&c, &small_params(10)).unwrap();
        assert_ne!(m1, m3);
    }

    #[test]
    fn vocab_vector_is_mean_of_word_and_ngram_rows() {
        let c = corpus(&[&["ab", "cd"]]);
        let m = train_subword_skipgram(&c, &small_params(2)).unwrap();
        let table = m.subwords.as_ref().unwrap();
        let dim = m.dim();
        // OOV path over the same n-grams averages only the n-gram rows.
        let buckets = ngram_buckets("ab", table.min_n, table.max_n, table.buckets);
        let mut ngram_mean = vec![0.0f32; dim];
        for b in &buckets {
            let r = table.row(*b, dim).unwrap();
            ngram_mean.iter_mut().zip(r).for_each(|(a, x)| *a += x);
        }
        let n = buckets.len() as f32;
        let composed = m.word_vector("ab");
        // composed = (word_row + sum ngram) / (n + 1), so it differs from the ngram mean
        let ngram_only: Vec<f32> = ngram_mean.iter().map(|x| x / n).collect();
        assert!(cosine(&composed, &ngram_only) < 0.9999);
    }

    #[test]
    fn parallel_mode_produces_usable_vectors() {
        let mut sentences: Vec<Vec<&str>> = Vec::new();
        for _ in 0..200 {
            sentences.push(vec!["alpha", "beta"]);
            sentences.push(vec!["gamma", "delta"]);
        }
        let refs: Vec<&[&str]> = sentences.iter().map(Vec::as_slice).collect();
        let p = SkipGramParams { threads: 4, ..small_params(5) };
        let (m, report) = train_subword_skipgram_with_report(&corpus(&refs), &p).unwrap();
        assert_eq!(report.epoch_losses.len(), 5);
        assert!(report.epoch_losses.last() < report.epoch_losses.first());
        assert!(m.word_vector("alpha").iter().all(|x| x.is_finite()));
    }
}
