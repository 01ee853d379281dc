//! Tweet embeddings and their per-user aggregation.
//!
//! Sentence encoders are external: the production path reads precomputed
//! tweet vectors from a file. The word-vector provider averages trained word
//! vectors so the pipeline can run without any encoder.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::corpus::{EventLabel, Tweet, UserId};
use crate::error::{Error, Result};
use crate::lexicon::WordVectors;
use crate::vectors::VectorTable;

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        EmbeddingVector(values)
    }

    pub fn zeros(dimension: usize) -> Self {
        EmbeddingVector(vec![0.0; dimension])
    }

    pub fn from_f32(values: &[f32]) -> Self {
        EmbeddingVector(values.iter().map(|&x| x as f64).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    pub fn sub(&self, other: &EmbeddingVector) -> EmbeddingVector {
        EmbeddingVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, k: f64) -> EmbeddingVector {
        EmbeddingVector(self.0.iter().map(|x| x * k).collect())
    }

    /// Arithmetic mean of equal-length vectors; `None` for an empty input.
    pub fn mean<'a>(vectors: impl IntoIterator<Item = &'a EmbeddingVector>) -> Option<Self> {
        let mut iter = vectors.into_iter();
        let first = iter.next()?;
        let mut sum = first.0.clone();
        let mut n = 1usize;
        for v in iter {
            for (s, x) in sum.iter_mut().zip(&v.0) {
                *s += x;
            }
            n += 1;
        }
        Some(EmbeddingVector(sum.into_iter().map(|s| s / n as f64).collect()))
    }
}

pub enum EmbeddingProvider<'a> {
    /// Vectors keyed by tweet id, passed through unchanged.
    Precomputed(&'a VectorTable),
    /// IDF-weighted mean of word vectors, normalized to unit length.
    WordVectorMean(&'a WordVectors),
}

#[derive(Clone, Debug, Default)]
pub struct TweetEmbeddings {
    pub vectors: HashMap<String, EmbeddingVector>,
    /// Tweets with no in-vocabulary token; their vector is zero.
    pub out_of_vocabulary: Vec<String>,
    pub dimension: usize,
}

impl TweetEmbeddings {
    pub fn get(&self, tweet_id: &str) -> Option<&EmbeddingVector> {
        self.vectors.get(tweet_id)
    }

    pub fn is_flagged(&self, tweet_id: &str) -> bool {
        self.out_of_vocabulary.binary_search_by(|t| t.as_str().cmp(tweet_id)).is_ok()
    }
}

/// Embeds `(tweet id, clean text)` pairs.
pub fn embed_tweets<'t>(
    tweets: impl IntoIterator<Item = (&'t str, &'t str)>,
    provider: &EmbeddingProvider<'_>,
) -> Result<TweetEmbeddings> {
    let tweets: Vec<(&str, &str)> = tweets.into_iter().collect();
    match provider {
        EmbeddingProvider::Precomputed(table) => {
            let missing: Vec<&str> = tweets
                .iter()
                .map(|&(id, _)| id)
                .filter(|id| table.get(id).is_none())
                .collect();
            if !missing.is_empty() {
                return Err(Error::MissingEmbeddings {
                    count: missing.len(),
                    first: missing.iter().take(10).map(|s| s.to_string()).collect(),
                });
            }
            let vectors = tweets
                .iter()
                .map(|&(id, _)| (id.to_string(), EmbeddingVector::from_f32(table.get(id).unwrap())))
                .collect();
            Ok(TweetEmbeddings {
                vectors,
                out_of_vocabulary: Vec::new(),
                dimension: table.dimension(),
            })
        }
        EmbeddingProvider::WordVectorMean(wv) => Ok(word_vector_mean(&tweets, wv)),
    }
}

fn word_vector_mean(tweets: &[(&str, &str)], wv: &WordVectors) -> TweetEmbeddings {
    // Smoothed IDF over the tweets being embedded.
    let mut df: HashMap<&str, usize> = HashMap::new();
    for &(_, text) in tweets {
        let mut seen: Vec<&str> = text.split_whitespace().collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_default() += 1;
        }
    }
    let n = tweets.len() as f64;
    let idf = |t: &str| ((1.0 + n) / (1.0 + df[t] as f64)).ln() + 1.0;

    let dim = wv.dimension();
    let mut out = TweetEmbeddings {
        dimension: dim,
        ..TweetEmbeddings::default()
    };
    for &(id, text) in tweets {
        let mut acc = vec![0f64; dim];
        let mut any = false;
        for token in text.split_whitespace() {
            if let Some(v) = wv.vector(token) {
                let w = idf(token);
                for (a, &x) in acc.iter_mut().zip(v) {
                    *a += w * x as f64;
                }
                any = true;
            }
        }
        let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !any || norm == 0.0 {
            out.out_of_vocabulary.push(id.to_string());
            out.vectors.insert(id.to_string(), EmbeddingVector::zeros(dim));
        } else {
            out.vectors
                .insert(id.to_string(), EmbeddingVector(acc.iter().map(|x| x / norm).collect()));
        }
    }
    out.out_of_vocabulary.sort();
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserEmbedding {
    pub user_id: UserId,
    pub event: EventLabel,
    pub vector: EmbeddingVector,
    pub tweet_count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct UserEmbeddingReport {
    pub users: usize,
    pub excluded_below_min_tweets: usize,
}

/// Averages each user's event tweet vectors. Tweets flagged as
/// out-of-vocabulary carry no content and are left out of the mean. Output
/// is ordered by user id.
pub fn user_embeddings<'t>(
    event: &EventLabel,
    event_tweets: impl IntoIterator<Item = &'t Tweet>,
    tweet_vectors: &TweetEmbeddings,
    min_tweets: usize,
) -> Result<(Vec<UserEmbedding>, UserEmbeddingReport)> {
    let min_tweets = min_tweets.max(1);
    let mut by_user: BTreeMap<&str, Vec<&EmbeddingVector>> = BTreeMap::new();
    for t in event_tweets {
        if tweet_vectors.is_flagged(&t.id) {
            continue;
        }
        let v = tweet_vectors.get(&t.id).ok_or_else(|| Error::MissingEmbeddings {
            count: 1,
            first: vec![t.id.clone()],
        })?;
        by_user.entry(t.author_id.as_str()).or_default().push(v);
    }
    let mut report = UserEmbeddingReport::default();
    let mut out = Vec::new();
    for (user, vs) in by_user {
        if vs.len() < min_tweets {
            report.excluded_below_min_tweets += 1;
            continue;
        }
        out.push(UserEmbedding {
            user_id: user.to_string(),
            event: event.clone(),
            vector: EmbeddingVector::mean(vs.iter().copied()).expect("non-empty"),
            tweet_count: vs.len(),
        });
    }
    report.users = out.len();
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_timestamp;
    use proptest::prelude::*;

    fn tweet(id: &str, author: &str) -> Tweet {
        Tweet {
            id: id.into(),
            author_id: author.into(),
            created_at: parse_timestamp("2020-01-01T00:00:00Z").unwrap(),
            raw_text: String::new(),
            retweeted_user_id: None,
            retweet_count: 0,
            clean_text: String::new(),
        }
    }

    fn embeddings(rows: &[(&str, Vec<f64>)]) -> TweetEmbeddings {
        TweetEmbeddings {
            dimension: rows.first().map_or(0, |r| r.1.len()),
            vectors: rows
                .iter()
                .map(|(k, v)| (k.to_string(), EmbeddingVector::new(v.clone())))
                .collect(),
            out_of_vocabulary: Vec::new(),
        }
    }

    #[test]
    fn precomputed_passes_through() {
        let mut table = VectorTable::new(3);
        table.push("t1", &[0.25, -1.5, 3.0]).unwrap();
        let e = embed_tweets([("t1", "whatever")], &EmbeddingProvider::Precomputed(&table)).unwrap();
        assert_eq!(e.get("t1").unwrap().values(), &[0.25, -1.5, 3.0]);
    }

    #[test]
    fn precomputed_missing_ids_are_listed() {
        let table = VectorTable::new(3);
        let ids: Vec<String> = (0..12).map(|i| format!("t{i:02}")).collect();
        let err = embed_tweets(
            ids.iter().map(|s| (s.as_str(), "")),
            &EmbeddingProvider::Precomputed(&table),
        )
        .unwrap_err();
        match err {
            Error::MissingEmbeddings { count, first } => {
                assert_eq!(count, 12);
                assert_eq!(first.len(), 10);
            }
            other => panic!("{other}"),
        }
    }

    fn word_vectors() -> WordVectors {
        let mut t = VectorTable::new(2);
        t.push("farm", &[3.0, 4.0]).unwrap();
        t.push("law", &[1.0, 0.0]).unwrap();
        WordVectors::from_table(&t)
    }

    #[test]
    fn single_token_fallback_is_normalized_word_vector() {
        let wv = word_vectors();
        let e = embed_tweets([("a", "farm"), ("b", "law farm")], &EmbeddingProvider::WordVectorMean(&wv))
            .unwrap();
        let v = e.get("a").unwrap().values();
        assert!((v[0] - 0.6).abs() < 1e-12 && (v[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn all_oov_is_zero_and_flagged() {
        let wv = word_vectors();
        let e = embed_tweets([("a", "nothing known"), ("b", "")], &EmbeddingProvider::WordVectorMean(&wv))
            .unwrap();
        assert!(e.get("a").unwrap().is_zero());
        assert!(e.is_flagged("a") && e.is_flagged("b"));
    }

    #[test]
    fn user_mean_and_threshold() {
        let tweets = [tweet("x", "u1"), tweet("y", "u1"), tweet("z", "u2")];
        let e = embeddings(&[("x", vec![1.0, 0.0]), ("y", vec![0.0, 1.0]), ("z", vec![2.0, 2.0])]);
        let event = EventLabel::new("E");
        let (users, report) = user_embeddings(&event, &tweets, &e, 1).unwrap();
        assert_eq!(users[0].vector.values(), &[0.5, 0.5]);
        assert_eq!(users.len(), 2);
        assert_eq!(report.excluded_below_min_tweets, 0);

        let (users, report) = user_embeddings(&event, &tweets, &e, 2).unwrap();
        assert_eq!(users.len(), 1);
        assert_eq!(users[0].user_id, "u1");
        assert_eq!(report.excluded_below_min_tweets, 1);
    }

    #[test]
    fn user_means_match_direct_recomputation() {
        use rand::Rng;
        let mut rng = crate::rng::seeded(11);
        let mut tweets = Vec::new();
        let mut rows = Vec::new();
        for u in 0..5 {
            for k in 0..(u + 1) {
                let id = format!("u{u}t{k}");
                tweets.push(tweet(&id, &format!("u{u}")));
                rows.push((id, (0..4).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>()));
            }
        }
        let e = embeddings(&rows.iter().map(|(k, v)| (k.as_str(), v.clone())).collect::<Vec<_>>());
        let (users, _) = user_embeddings(&EventLabel::new("E"), &tweets, &e, 1).unwrap();
        for ue in &users {
            let own: Vec<&Vec<f64>> = rows
                .iter()
                .filter(|(k, _)| k.starts_with(&format!("{}t", ue.user_id)))
                .map(|(_, v)| v)
                .collect();
            for d in 0..4 {
                let expected = own.iter().map(|v| v[d]).sum::<f64>() / own.len() as f64;
                assert!((ue.vector.values()[d] - expected).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn mean_is_order_and_duplication_invariant(
            vs in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 3), 1..8)
        ) {
            let vecs: Vec<EmbeddingVector> = vs.iter().cloned().map(EmbeddingVector::new).collect();
            let m = EmbeddingVector::mean(&vecs).unwrap();
            let max_norm = vecs.iter().map(EmbeddingVector::norm).fold(0.0, f64::max);
            prop_assert!(m.norm() <= max_norm + 1e-9);

            let rev: Vec<_> = vecs.iter().rev().cloned().collect();
            let doubled: Vec<_> = vecs.iter().chain(vecs.iter()).cloned().collect();
            for other in [EmbeddingVector::mean(&rev).unwrap(), EmbeddingVector::mean(&doubled).unwrap()] {
                for (a, b) in m.values().iter().zip(other.values()) {
                    prop_assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }
}
