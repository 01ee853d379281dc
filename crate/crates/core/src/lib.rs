//! Influencer polarization analysis.
//!
//! The crate covers the full path from a tweet corpus to per-user polarity
//! scores and the statistics built on top of them:
//!
//! - [`corpus`]: tweet and user ingestion, retweet extraction, text normalization
//! - [`lexicon`]: skip-gram word vectors, keyword expansion, event classification
//! - [`embedding`]: tweet embedding providers and per-user aggregation
//! - [`stance`]: 2D projection, density-based clustering, party labeling
//! - [`rtgraph`]: retweet graph, anchor selection, hitting times, retweet polarity
//! - [`content`]: partisan axis, content polarity, prominence tables
//! - [`stats`]: aggregate polarity, quartiles, ANOVA, OLS, retweet-rate cohort
//! - [`datagen`]: synthetic worlds with planted ground truth
//! - [`report`] and [`pipeline`]: figure data, file emission, orchestration

pub mod content;
pub mod corpus;
pub mod datagen;
pub mod embedding;
pub mod error;
pub mod lexicon;
pub mod pipeline;
pub mod report;
pub mod rtgraph;
pub mod stance;
pub mod stats;
pub mod vectors;

mod rng;

pub use corpus::{Category, CorpusHandle, EventLabel, Party, Role, Tweet, UserProfile, UserTable};
pub use embedding::{EmbeddingVector, UserEmbedding};
pub use error::{Error, Result};
pub use lexicon::{EventLexicon, WordVectors};
pub use rtgraph::{AnchorSets, HittingProfile, RetweetGraph};
pub use stance::{Projection2D, Side, StanceClusters};
