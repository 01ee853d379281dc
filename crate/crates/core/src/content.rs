//! Content polarity against a partisan axis, and prominence-scored terms.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::Serialize;

use crate::corpus::{tokens, Party, UserId, UserTable};
use crate::embedding::{EmbeddingVector, UserEmbedding};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PartisanAxis {
    /// `x_tilde - y_tilde`.
    pub axis: EmbeddingVector,
    pub x_tilde: EmbeddingVector,
    pub y_tilde: EmbeddingVector,
    /// INC politicians, largest r first.
    pub x_users: Vec<UserId>,
    /// BJP politicians, smallest r first.
    pub y_users: Vec<UserId>,
    pub n: usize,
}

impl PartisanAxis {
    pub fn from_poles(x_tilde: EmbeddingVector, y_tilde: EmbeddingVector) -> Result<Self> {
        if x_tilde.dimension() != y_tilde.dimension() {
            return Err(Error::DimensionMismatch {
                expected: x_tilde.dimension(),
                found: y_tilde.dimension(),
            });
        }
        let axis = x_tilde.sub(&y_tilde);
        if axis.is_zero() {
            return Err(Error::Content("partisan axis has zero norm".into()));
        }
        Ok(PartisanAxis {
            axis,
            x_tilde,
            y_tilde,
            x_users: Vec::new(),
            y_users: Vec::new(),
            n: 0,
        })
    }

    /// The same axis with the parties exchanged.
    pub fn swapped(&self) -> PartisanAxis {
        PartisanAxis {
            axis: self.axis.scale(-1.0),
            x_tilde: self.y_tilde.clone(),
            y_tilde: self.x_tilde.clone(),
            x_users: self.y_users.clone(),
            y_users: self.x_users.clone(),
            n: self.n,
        }
    }
}

/// Mean embedding of the `n` INC politicians with the largest retweet
/// polarity minus that of the `n` BJP politicians with the smallest.
pub fn partisan_axis(
    embeddings: &[UserEmbedding],
    retweet_scores: &BTreeMap<UserId, f64>,
    users: &UserTable,
    n: usize,
) -> Result<PartisanAxis> {
    if n == 0 {
        return Err(Error::Content("n must be positive".into()));
    }
    let mut inc: Vec<(f64, &UserEmbedding)> = Vec::new();
    let mut bjp: Vec<(f64, &UserEmbedding)> = Vec::new();
    for e in embeddings {
        let Some(&r) = retweet_scores.get(&e.user_id) else {
            continue;
        };
        match users.party_of(&e.user_id) {
            Some(Party::Inc) => inc.push((r, e)),
            Some(Party::Bjp) => bjp.push((r, e)),
            _ => {}
        }
    }
    if inc.len() < n || bjp.len() < n {
        return Err(Error::TooFewPoliticians {
            needed: n,
            inc: inc.len(),
            bjp: bjp.len(),
        });
    }
    inc.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.user_id.cmp(&b.1.user_id)));
    bjp.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.user_id.cmp(&b.1.user_id)));
    inc.truncate(n);
    bjp.truncate(n);
    let x_tilde = EmbeddingVector::mean(inc.iter().map(|(_, e)| &e.vector)).expect("n > 0");
    let y_tilde = EmbeddingVector::mean(bjp.iter().map(|(_, e)| &e.vector)).expect("n > 0");
    let mut axis = PartisanAxis::from_poles(x_tilde, y_tilde)?;
    axis.x_users = inc.iter().map(|(_, e)| e.user_id.clone()).collect();
    axis.y_users = bjp.iter().map(|(_, e)| e.user_id.clone()).collect();
    axis.n = n;
    Ok(axis)
}

/// Cosine of the user vector with the axis; `None` for a zero vector.
pub fn content_polarity(user_vector: &EmbeddingVector, axis: &PartisanAxis) -> Option<f64> {
    let nu = user_vector.norm();
    if nu == 0.0 || !nu.is_finite() {
        return None;
    }
    let c = user_vector.dot(&axis.axis) / (nu * axis.axis.norm());
    Some(c.clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ContentScores {
    pub scores: BTreeMap<UserId, f64>,
    /// Users with a zero embedding.
    pub unscored: Vec<UserId>,
}

pub fn content_scores(embeddings: &[UserEmbedding], axis: &PartisanAxis) -> ContentScores {
    let mut out = ContentScores::default();
    for e in embeddings {
        match content_polarity(&e.vector, axis) {
            Some(c) => {
                out.scores.insert(e.user_id.clone(), c);
            }
            None => out.unscored.push(e.user_id.clone()),
        }
    }
    out
}

pub fn write_content_csv(writer: impl Write, event: &str, scores: &ContentScores) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["user_id", "event", "c_score"])?;
    for (u, c) in &scores.scores {
        w.write_record([u.as_str(), event, &format!("{c:.10}")])?;
    }
    w.flush().map_err(|e| Error::io("content_scores.csv", e))?;
    Ok(())
}

pub const PROMINENCE_ALPHA: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProminenceRow {
    pub term: String,
    pub count_a: u64,
    pub count_b: u64,
    /// Score toward side A; the score toward B is its negation.
    pub score: f64,
}

impl ProminenceRow {
    pub fn score_b(&self) -> f64 {
        -self.score
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProminenceTable {
    /// Every term passing `min_count`, by score descending then term.
    pub rows: Vec<ProminenceRow>,
    pub top_a: Vec<String>,
    pub top_b: Vec<String>,
    pub alpha: f64,
    pub min_count: u64,
    pub tokens_a: u64,
    pub tokens_b: u64,
}

fn count_terms<'a>(texts: impl IntoIterator<Item = &'a str>) -> (HashMap<&'a str, u64>, u64, usize) {
    let mut counts = HashMap::new();
    let mut total = 0;
    let mut docs = 0;
    for t in texts {
        docs += 1;
        for tok in tokens(t) {
            *counts.entry(tok).or_default() += 1;
            total += 1;
        }
    }
    (counts, total, docs)
}

/// Smoothed log ratio of each term's relative frequency in A versus B:
/// `ln((c_A/N_A + a) / (c_B/N_B + a))` with `a = alpha / (N_A + N_B)`.
pub fn prominence<'a>(
    tweets_a: impl IntoIterator<Item = &'a str>,
    tweets_b: impl IntoIterator<Item = &'a str>,
    min_count: u64,
    top_m: usize,
) -> Result<ProminenceTable> {
    let (ca, na, da) = count_terms(tweets_a);
    let (cb, nb, db) = count_terms(tweets_b);
    if da == 0 || db == 0 {
        return Err(Error::Content("prominence needs tweets on both sides".into()));
    }
    if na == 0 || nb == 0 {
        return Err(Error::Content("one side has no tokens".into()));
    }
    let floor = PROMINENCE_ALPHA / (na + nb) as f64;
    let mut terms: Vec<&str> = ca.keys().chain(cb.keys()).copied().collect();
    terms.sort_unstable();
    terms.dedup();
    let mut rows: Vec<ProminenceRow> = terms
        .into_iter()
        .filter_map(|t| {
            let a = ca.get(t).copied().unwrap_or(0);
            let b = cb.get(t).copied().unwrap_or(0);
            if a + b < min_count {
                return None;
            }
            let pa = a as f64 / na as f64;
            let pb = b as f64 / nb as f64;
            Some(ProminenceRow {
                term: t.to_string(),
                count_a: a,
                count_b: b,
                score: (pa + floor).ln() - (pb + floor).ln(),
            })
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::Content(format!(
            "no term occurs at least {min_count} times"
        )));
    }
    rows.sort_by(|x, y| y.score.total_cmp(&x.score).then_with(|| x.term.cmp(&y.term)));
    let top_a = rows
        .iter()
        .filter(|r| r.score > 0.0)
        .take(top_m)
        .map(|r| r.term.clone())
        .collect();
    let top_b = rows
        .iter()
        .rev()
        .filter(|r| r.score < 0.0)
        .take(top_m)
        .map(|r| r.term.clone())
        .collect();
    Ok(ProminenceTable {
        rows,
        top_a,
        top_b,
        alpha: PROMINENCE_ALPHA,
        min_count,
        tokens_a: na,
        tokens_b: nb,
    })
}

/// `term,count_A,count_B,score`.
pub fn write_prominence_csv(writer: impl Write, table: &ProminenceTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["term", "count_A", "count_B", "score"])?;
    for r in &table.rows {
        w.write_record([
            r.term.as_str(),
            &r.count_a.to_string(),
            &r.count_b.to_string(),
            &format!("{:.10}", r.score),
        ])?;
    }
    w.flush().map_err(|e| Error::io("prominence.csv", e))?;
    Ok(())
}
