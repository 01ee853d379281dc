//! Skip-gram word vectors trained with negative sampling.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectors::VectorTable;

const UNIGRAM_TABLE_SIZE: usize = 1 << 20;
const MAX_EXP: f32 = 6.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgnsConfig {
    pub dimension: usize,
    pub window: usize,
    pub negative: usize,
    pub epochs: usize,
    pub min_count: u64,
    pub learning_rate: f32,
    pub seed: u64,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dimension: 100,
            window: 5,
            negative: 5,
            epochs: 5,
            min_count: 5,
            learning_rate: 0.025,
            seed: 1,
        }
    }
}

/// Trained input vectors, one row per vocabulary token.
#[derive(Clone, Debug, PartialEq)]
pub struct WordVectors {
    dimension: usize,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    counts: Vec<u64>,
    vectors: Vec<f32>,
    /// Training workers; results are reproducible for a fixed count.
    pub workers: usize,
}

impl WordVectors {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    /// Tokens by descending count, ties by token.
    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn count(&self, token: &str) -> u64 {
        self.index_of(token).map_or(0, |i| self.counts[i])
    }

    pub fn vector(&self, token: &str) -> Option<&[f32]> {
        self.index_of(token).map(|i| self.row(i))
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        Some(cosine_f32(self.vector(a)?, self.vector(b)?))
    }

    pub fn to_table(&self) -> VectorTable {
        let mut table = VectorTable::new(self.dimension);
        for (i, token) in self.vocab.iter().enumerate() {
            table
                .push(token.clone(), self.row(i))
                .expect("vocabulary tokens are unique");
        }
        table
    }

    /// Rebuilds word vectors from a table. Counts are not stored on disk and
    /// come back as zero.
    pub fn from_table(table: &VectorTable) -> Self {
        let vocab: Vec<String> = table.keys().to_vec();
        let index = vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        let vectors = (0..table.len())
            .flat_map(|i| table.row(i).iter().copied())
            .collect();
        WordVectors {
            dimension: table.dimension(),
            counts: vec![0; vocab.len()],
            vocab,
            index,
            vectors,
            workers: 1,
        }
    }
}

pub(crate) fn cosine_f32(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0f64, 0f64, 0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

/// Trains skip-gram vectors with negative sampling on tokenized sentences.
///
/// Training is single-threaded and fully determined by `config.seed`.
pub fn train_word_vectors<S: AsRef<str>>(
    sentences: &[Vec<S>],
    config: &SgnsConfig,
) -> Result<WordVectors> {
    if sentences.is_empty() {
        return Err(Error::Lexicon("empty training corpus".into()));
    }
    if config.dimension < 2 {
        return Err(Error::Lexicon("dimension must be at least 2".into()));
    }
    if config.window < 1 {
        return Err(Error::Lexicon("window must be at least 1".into()));
    }

    let mut raw_counts: HashMap<&str, u64> = HashMap::new();
    for s in sentences {
        for t in s {
            *raw_counts.entry(t.as_ref()).or_default() += 1;
        }
    }
    let mut vocab: Vec<(&str, u64)> = raw_counts
        .into_iter()
        .filter(|&(_, n)| n >= config.min_count)
        .collect();
    if vocab.is_empty() {
        return Err(Error::Lexicon(format!(
            "empty vocabulary: no token occurs at least {} times",
            config.min_count
        )));
    }
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let index: HashMap<String, usize> = vocab
        .iter()
        .enumerate()
        .map(|(i, &(t, _))| (t.to_string(), i))
        .collect();
    let encoded: Vec<Vec<u32>> = sentences
        .iter()
        .map(|s| {
            s.iter()
                .filter_map(|t| index.get(t.as_ref()).map(|&i| i as u32))
                .collect()
        })
        .filter(|s: &Vec<u32>| s.len() > 1)
        .collect();

    let dim = config.dimension;
    let v = vocab.len();
    let mut rng = crate::rng::seeded(config.seed);
    let mut input: Vec<f32> = (0..v * dim)
        .map(|_| (rng.random::<f32>() - 0.5) / dim as f32)
        .collect();
    let mut output = vec![0f32; v * dim];
    let table = unigram_table(&vocab);

    let total_words: usize = encoded.iter().map(Vec::len).sum::<usize>() * config.epochs;
    let mut processed = 0usize;
    let start_lr = config.learning_rate;
    let mut grad = vec![0f32; dim];

    for _ in 0..config.epochs {
        for sentence in &encoded {
            for (pos, &center) in sentence.iter().enumerate() {
                let progress = processed as f32 / (total_words.max(1) as f32);
                let lr = (start_lr * (1.0 - progress)).max(start_lr * 1e-4);
                processed += 1;

                let shrink = rng.random_range(0..config.window);
                let reach = config.window - shrink;
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(sentence.len() - 1);
                for (cpos, &context) in sentence.iter().enumerate().take(hi + 1).skip(lo) {
                    if cpos == pos {
                        continue;
                    }
                    let l1 = context as usize * dim;
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for d in 0..=config.negative {
                        let (target, label) = if d == 0 {
                            (center, 1.0f32)
                        } else {
                            let t = table[rng.random_range(0..table.len())];
                            if t == center {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let l2 = target as usize * dim;
                        let dot: f32 = input[l1..l1 + dim]
                            .iter()
                            .zip(&output[l2..l2 + dim])
                            .map(|(a, b)| a * b)
                            .sum();
                        let g = (label - sigmoid(dot)) * lr;
                        for k in 0..dim {
                            grad[k] += g * output[l2 + k];
                            output[l2 + k] += g * input[l1 + k];
                        }
                    }
                    for k in 0..dim {
                        input[l1 + k] += grad[k];
                    }
                }
            }
        }
    }

    if input.iter().any(|x| !x.is_finite()) {
        return Err(Error::Lexicon("training diverged to non-finite vectors".into()));
    }
    Ok(WordVectors {
        dimension: dim,
        vocab: vocab.iter().map(|&(t, _)| t.to_string()).collect(),
        index,
        counts: vocab.iter().map(|&(_, n)| n).collect(),
        vectors: input,
        workers: 1,
    })
}

fn sigmoid(x: f32) -> f32 {
    if x > MAX_EXP {
        1.0
    } else if x < -MAX_EXP {
        0.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

/// Negative-sampling table with probabilities proportional to count^0.75.
fn unigram_table(vocab: &[(&str, u64)]) -> Vec<u32> {
    let weights: Vec<f64> = vocab.iter().map(|&(_, n)| (n as f64).powf(0.75)).collect();
    let total: f64 = weights.iter().sum();
    let size = UNIGRAM_TABLE_SIZE.min(vocab.len() * 1000).max(vocab.len());
    let mut table = Vec::with_capacity(size);
    let mut cumulative = 0.0;
    let mut i = 0usize;
    for slot in 0..size {
        let position = (slot as f64 + 0.5) / size as f64;
        while i + 1 < vocab.len() && (cumulative + weights[i]) / total < position {
            cumulative += weights[i];
            i += 1;
        }
        table.push(i as u32);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted_corpus(n: usize) -> Vec<Vec<String>> {
        let mut rng = crate::rng::seeded(3);
        // aa and ab share sentences drawn from one filler pool, zz lives in
        // sentences from a disjoint pool.
        let pool_a: Vec<String> = (0..20).map(|i| format!("f{i}")).collect();
        let pool_z: Vec<String> = (0..20).map(|i| format!("g{i}")).collect();
        (0..n)
            .map(|i| {
                let fillers = if i % 2 == 0 { &pool_a } else { &pool_z };
                let mut s: Vec<String> = (0..6)
                    .map(|_| fillers[rng.random_range(0..fillers.len())].clone())
                    .collect();
                if i % 2 == 0 {
                    s.insert(2, "aa".into());
                    s.insert(3, "ab".into());
                } else {
                    s.insert(3, "zz".into());
                }
                s
            })
            .collect()
    }

    fn small_config() -> SgnsConfig {
        SgnsConfig {
            dimension: 24,
            epochs: 3,
            ..SgnsConfig::default()
        }
    }

    #[test]
    fn co_occurring_tokens_end_up_closer() {
        let wv = train_word_vectors(&planted_corpus(10_000), &small_config()).unwrap();
        let near = wv.cosine("aa", "ab").unwrap();
        let far = wv.cosine("aa", "zz").unwrap();
        assert!(near > far, "cos(aa,ab)={near} cos(aa,zz)={far}");
    }

    #[test]
    fn identical_seed_identical_vectors() {
        let corpus = planted_corpus(500);
        let a = train_word_vectors(&corpus, &small_config()).unwrap();
        let b = train_word_vectors(&corpus, &small_config()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn below_min_count_is_fatal() {
        let corpus = vec![vec!["one", "two", "three"]];
        assert!(train_word_vectors(&corpus, &SgnsConfig::default()).is_err());
        let empty: Vec<Vec<&str>> = Vec::new();
        assert!(train_word_vectors(&empty, &SgnsConfig::default()).is_err());
    }

    #[test]
    fn vocab_respects_min_count() {
        let wv = train_word_vectors(&planted_corpus(200), &small_config()).unwrap();
        assert!(wv.vocab().iter().all(|t| wv.count(t) >= 5));
        assert!(wv.vector("aa").unwrap().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn unigram_table_follows_smoothed_counts() {
        let table = unigram_table(&[("a", 16), ("b", 1)]);
        let a = table.iter().filter(|&&i| i == 0).count() as f64 / table.len() as f64;
        let expected = 8.0 / 9.0;
        assert!((a - expected).abs() < 1e-3);
    }
}
