//! Config-driven orchestration of the full analysis.
//!
//! `run` reads a tweet corpus and user table, builds event lexicons,
//! classifies tweets, detects stance, scores retweet and content polarity
//! per event, runs the cross-event statistics and writes every artifact
//! into the output directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::content::{
    content_scores, partisan_axis, prominence, write_content_csv, write_prominence_csv,
};
use crate::corpus::{
    ingest_tweets, retweet_pairs, tokens, CorpusHandle, EventLabel, InputFormat, Party, Tweet,
    UserId, UserTable,
};
use crate::embedding::{embed_tweets, user_embeddings, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::lexicon::{
    default_seeds, expand_keywords, train_word_vectors, Classifier, EventLexicon, ExpansionConfig,
    SgnsConfig, SimilarityRule,
};
use crate::report::{
    histogram_buckets, prominence_svg, retweet_totals, scatter_svg, stem_svg, timeline,
    write_atomic, write_bytes_atomic, write_category_csv, write_histogram_csv, write_timeline_csv,
    RetweetHistogram,
};
use crate::rtgraph::{build_graph, score_graph, write_gexf, write_scores_csv, HittingMethod, WalkParams};
use crate::stance::{cluster, label_clusters, project_2d, write_cluster_csv, Side, StanceClusters, UmapConfig};
use crate::stats::{
    aggregate_polarity, anova_confidence_intervals, category_medians, follower_quartiles, median,
    ols_regression, one_way_anova, pairwise_welch, retweet_rate_comparison, AnovaResult,
    CategoryMedians, ConfidenceInterval, FollowerLevel, PairwiseTest, PerEventScores, RateComparison,
    RateSplit, RegressionResult,
};
use crate::vectors::VectorTable;

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "INFPOLAR_OUTPUT_DIR";

/// Files written for every event, relative to `events/<event>/`.
pub const EVENT_ARTIFACTS: [&str; 9] = [
    "scores.csv",
    "content_scores.csv",
    "clusters.csv",
    "clusters.svg",
    "graph.gexf",
    "prominence.csv",
    "prominence.svg",
    "categories.csv",
    "categories.svg",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub tweets: Option<PathBuf>,
    pub users: Option<PathBuf>,
    /// Precomputed tweet embeddings; without it tweets are embedded as the
    /// IDF-weighted mean of the trained word vectors.
    pub embeddings: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub events: Vec<EventLabel>,
    /// Seed keywords per event; built-in events fall back to their defaults.
    pub seeds: BTreeMap<EventLabel, Vec<String>>,

    pub tau_add: f64,
    pub max_rounds: usize,
    pub similarity_rule: SimilarityRule,
    pub sgns_dimension: usize,
    pub sgns_window: usize,
    pub sgns_negative: usize,
    pub sgns_epochs: usize,
    pub sgns_min_count: u64,
    pub sgns_seed: u64,

    pub min_tweets: usize,
    pub umap_neighbors: usize,
    pub umap_min_dist: f64,
    pub umap_seed: u64,
    pub min_cluster_size: usize,

    pub edge_threshold: usize,
    pub anchors_k: usize,
    pub hitting_method: HittingMethod,
    pub walks_per_vertex: u32,
    pub max_steps: u64,
    pub walk_seed: u64,
    pub weighted_walks: bool,
    /// Keep users outside both stance clusters as graph vertices.
    pub include_noise_vertices: bool,

    pub axis_n: usize,
    pub prominence_min_count: u64,
    pub prominence_top: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let sgns = SgnsConfig::default();
        let umap = UmapConfig::default();
        let walk = WalkParams::default();
        let expansion = ExpansionConfig::default();
        PipelineConfig {
            tweets: None,
            users: None,
            embeddings: None,
            output_dir: PathBuf::from("out"),
            events: Vec::new(),
            seeds: BTreeMap::new(),
            tau_add: expansion.tau_add,
            max_rounds: expansion.max_rounds,
            similarity_rule: expansion.rule,
            sgns_dimension: sgns.dimension,
            sgns_window: sgns.window,
            sgns_negative: sgns.negative,
            sgns_epochs: sgns.epochs,
            sgns_min_count: sgns.min_count,
            sgns_seed: sgns.seed,
            min_tweets: 1,
            umap_neighbors: umap.n_neighbors,
            umap_min_dist: umap.min_dist,
            umap_seed: umap.seed,
            min_cluster_size: 15,
            edge_threshold: 2,
            anchors_k: 100,
            hitting_method: HittingMethod::Auto,
            walks_per_vertex: walk.walks_per_vertex,
            max_steps: walk.max_steps,
            walk_seed: walk.seed,
            weighted_walks: false,
            include_noise_vertices: true,
            axis_n: 10,
            prominence_min_count: 10,
            prominence_top: 30,
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Parses a `--set` value as a TOML value, falling back to a bare string.
fn parse_override_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

impl PipelineConfig {
    /// Parses a TOML document, applies `key=value` overrides, and resolves
    /// relative paths against `base_dir`.
    pub fn from_toml(text: &str, overrides: &[String], base_dir: &Path) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| config_err(format!("invalid TOML: {e}")))?;
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| config_err(format!("override `{item}` is not key=value")))?;
            let value = parse_override_value(value.trim());
            let mut path: Vec<&str> = key.trim().split('.').collect();
            let last = path.pop().filter(|k| !k.is_empty()).ok_or_else(|| config_err("empty override key"))?;
            let mut cursor = &mut table;
            for part in path {
                cursor = cursor
                    .entry(part.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                    .as_table_mut()
                    .ok_or_else(|| config_err(format!("override `{key}`: `{part}` is not a table")))?;
            }
            cursor.insert(last.to_string(), value);
        }
        let mut config: PipelineConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| config_err(e.message().to_string()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        config.tweets.as_mut().map(resolve);
        config.users.as_mut().map(resolve);
        config.embeddings.as_mut().map(resolve);
        resolve(&mut config.output_dir);
        Ok(config)
    }

    /// Reads the config file, applies overrides and the output-directory
    /// environment variable, and validates the result.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut config = Self::from_toml(&text, overrides, base)?;
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            config.output_dir = PathBuf::from(dir);
        }
        config.validate()?;
        Ok(config)
    }

    /// Seeds per configured event, in event order.
    pub fn event_seeds(&self) -> Result<Vec<(EventLabel, BTreeSet<String>)>> {
        self.events
            .iter()
            .map(|e| {
                let seeds: BTreeSet<String> = match self.seeds.get(e) {
                    Some(s) => s.iter().map(|k| k.trim().to_lowercase()).filter(|k| !k.is_empty()).collect(),
                    None => default_seeds(e.as_str())
                        .unwrap_or_default()
                        .iter()
                        .map(|s| s.to_string())
                        .collect(),
                };
                if seeds.is_empty() {
                    return Err(config_err(format!("event {e} has no seed keywords")));
                }
                Ok((e.clone(), seeds))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let tweets = self.tweets.as_ref().ok_or_else(|| config_err("missing `tweets` path"))?;
        let users = self.users.as_ref().ok_or_else(|| config_err("missing `users` path"))?;
        for (name, p) in [("tweets", Some(tweets)), ("users", Some(users)), ("embeddings", self.embeddings.as_ref())] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(config_err(format!("{name} file {} does not exist", p.display())));
                }
            }
        }
        if self.events.is_empty() {
            return Err(config_err("no events configured"));
        }
        let distinct: BTreeSet<_> = self.events.iter().collect();
        if distinct.len() != self.events.len() {
            return Err(config_err("duplicate event labels"));
        }
        if let Some(extra) = self.seeds.keys().find(|k| !self.events.contains(k)) {
            return Err(config_err(format!("seeds given for unlisted event {extra}")));
        }
        self.event_seeds()?;
        if !(self.tau_add > 0.0 && self.tau_add <= 1.0) {
            return Err(config_err("tau_add must be in (0, 1]"));
        }
        if self.min_cluster_size < 2 {
            return Err(config_err("min_cluster_size must be at least 2"));
        }
        if self.umap_neighbors < 2 {
            return Err(config_err("umap_neighbors must be at least 2"));
        }
        for (name, v) in [
            ("edge_threshold", self.edge_threshold),
            ("anchors_k", self.anchors_k),
            ("axis_n", self.axis_n),
            ("sgns_dimension", self.sgns_dimension.saturating_sub(1)),
            ("sgns_window", self.sgns_window),
            ("min_tweets", self.min_tweets),
        ] {
            if v == 0 {
                return Err(config_err(format!("{name} is out of range")));
            }
        }
        if self.walks_per_vertex == 0 || self.max_steps == 0 {
            return Err(config_err("walks_per_vertex and max_steps must be positive"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, excluding the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn sgns(&self) -> SgnsConfig {
        SgnsConfig {
            dimension: self.sgns_dimension,
            window: self.sgns_window,
            negative: self.sgns_negative,
            epochs: self.sgns_epochs,
            min_count: self.sgns_min_count,
            seed: self.sgns_seed,
            ..SgnsConfig::default()
        }
    }

    fn umap(&self) -> UmapConfig {
        UmapConfig {
            n_neighbors: self.umap_neighbors,
            min_dist: self.umap_min_dist,
            seed: self.umap_seed,
            ..UmapConfig::default()
        }
    }

    fn walk(&self) -> WalkParams {
        WalkParams {
            max_steps: self.max_steps,
            walks_per_vertex: self.walks_per_vertex,
            seed: self.walk_seed,
            weighted: self.weighted_walks,
            ..WalkParams::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LexiconSummary {
    pub seeds: usize,
    pub expanded: usize,
    pub rounds_run: usize,
    pub classified_tweets: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EventSummary {
    pub users_embedded: usize,
    pub excluded_below_min_tweets: usize,
    pub clusters: usize,
    pub noise_users: usize,
    pub side_sizes: BTreeMap<String, usize>,
    pub graph_vertices: usize,
    pub graph_edges: usize,
    pub hitting_method: String,
    pub truncated_walk_vertices: usize,
    pub retweet_scored: usize,
    pub content_scored: usize,
    pub content_unscored: usize,
    pub axis_x_users: Vec<UserId>,
    pub axis_y_users: Vec<UserId>,
    pub prominence_top_x: Vec<String>,
    pub prominence_top_y: Vec<String>,
    pub categories: CategoryMedians,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FollowerAnalysis {
    pub cuts: [f64; 3],
    pub sizes: BTreeMap<String, usize>,
    pub anova: Option<AnovaResult>,
    pub confidence_intervals: Vec<ConfidenceInterval>,
    /// Pairwise Welch t-tests with Bonferroni correction.
    pub pairwise: Vec<PairwiseTest>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatsSummary {
    pub influencers_scored: usize,
    pub followers: BTreeMap<String, FollowerAnalysis>,
    pub regression: BTreeMap<String, RegressionResult>,
    pub retweet_rate: RateComparison,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub tweets_loaded: usize,
    pub tweets_skipped: usize,
    pub users: usize,
    pub word_vectors: usize,
    pub embedding_provider: String,
    pub lexicons: BTreeMap<EventLabel, LexiconSummary>,
    pub events: BTreeMap<EventLabel, EventSummary>,
    pub stats: StatsSummary,
    pub table1: BTreeMap<String, RetweetHistogram>,
    pub timeline_peaks: BTreeMap<String, Option<String>>,
    pub files: Vec<String>,
    pub warnings: Vec<String>,
}

/// In-memory results of one event, for callers that want more than files.
#[derive(Clone, Debug)]
pub struct EventOutcome {
    pub clusters: StanceClusters,
    pub retweet_scores: BTreeMap<UserId, f64>,
    pub content_scores: BTreeMap<UserId, f64>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub lexicons: Vec<EventLexicon>,
    pub classified: BTreeMap<String, BTreeSet<EventLabel>>,
    pub events: BTreeMap<EventLabel, EventOutcome>,
}

struct Outputs {
    root: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(Outputs {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn path(&mut self, rel: &str) -> Result<PathBuf> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        self.files.push(rel.to_string());
        Ok(p)
    }

    fn write(&mut self, rel: &str, f: impl FnOnce(&mut dyn std::io::Write) -> Result<()>) -> Result<()> {
        let p = self.path(rel)?;
        write_atomic(&p, f)
    }

    fn bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let p = self.path(rel)?;
        write_bytes_atomic(&p, bytes)
    }
}

/// Runs the pipeline without progress output.
pub fn run(config: &PipelineConfig) -> Result<RunOutput> {
    run_with_progress(config, |_| {})
}

pub fn run_with_progress(config: &PipelineConfig, mut progress: impl FnMut(&str)) -> Result<RunOutput> {
    config.validate()?;
    let event_seeds = config.event_seeds()?;
    let mut out = Outputs::create(&config.output_dir)?;
    let mut warnings = Vec::new();

    progress("ingesting corpus");
    let users = UserTable::from_csv(config.users.as_ref().expect("validated"))?;
    let corpus = ingest_tweets(config.tweets.as_ref().expect("validated"), InputFormat::Jsonl, users)?;
    warnings.extend(corpus.report().warnings.iter().cloned());

    progress("training word vectors");
    let all_seeds: BTreeSet<&str> = event_seeds.iter().flat_map(|(_, s)| s.iter().map(String::as_str)).collect();
    let filtered: Vec<Vec<&str>> = corpus
        .tweets()
        .iter()
        .map(|t| tokens(&t.clean_text).collect::<Vec<_>>())
        .filter(|toks| toks.iter().any(|t| all_seeds.contains(t)))
        .collect();
    let vectors = train_word_vectors(&filtered, &config.sgns())?;
    out.write("word_vectors.bin", |w| {
        vectors.to_table().write_to(w).map_err(|e| Error::io("word_vectors.bin", e))
    })?;

    progress("expanding keywords");
    let expansion = ExpansionConfig {
        tau_add: config.tau_add,
        max_rounds: config.max_rounds,
        rule: config.similarity_rule,
    };
    let mut lexicons = Vec::new();
    for (event, seeds) in &event_seeds {
        let exclusion: BTreeSet<String> = event_seeds
            .iter()
            .filter(|(e, _)| e != event)
            .flat_map(|(_, s)| s.iter().cloned())
            .collect();
        let lex = expand_keywords(event.clone(), seeds, &vectors, &expansion, &exclusion)?;
        let mut json = serde_json::to_vec_pretty(&lex)?;
        json.push(b'\n');
        out.bytes(&format!("lexicons/{}.json", event), &json)?;
        lexicons.push(lex);
    }

    progress("classifying tweets");
    let classifier = Classifier::new(&lexicons);
    let mut classified: BTreeMap<String, BTreeSet<EventLabel>> = BTreeMap::new();
    let mut by_event: BTreeMap<&EventLabel, Vec<&Tweet>> = BTreeMap::new();
    for t in corpus.tweets() {
        let labels = classifier.classify(&t.clean_text);
        if labels.is_empty() {
            continue;
        }
        for l in &labels {
            let key = lexicons.iter().find(|x| &x.event == l).map(|x| &x.event).expect("known event");
            by_event.entry(key).or_default().push(t);
        }
        classified.insert(t.id.clone(), labels);
    }
    let lexicon_summary = lexicons
        .iter()
        .map(|l| {
            (
                l.event.clone(),
                LexiconSummary {
                    seeds: l.seeds.len(),
                    expanded: l.expanded.len(),
                    rounds_run: l.rounds_run,
                    classified_tweets: by_event.get(&l.event).map_or(0, Vec::len),
                },
            )
        })
        .collect();

    progress("embedding tweets");
    let precomputed = match &config.embeddings {
        Some(p) => Some(VectorTable::load(p)?),
        None => None,
    };
    let provider = match &precomputed {
        Some(table) => EmbeddingProvider::Precomputed(table),
        None => EmbeddingProvider::WordVectorMean(&vectors),
    };
    let event_tweet_ids: BTreeSet<&str> = classified.keys().map(String::as_str).collect();
    let embedded = embed_tweets(
        corpus
            .tweets()
            .iter()
            .filter(|t| event_tweet_ids.contains(t.id.as_str()))
            .map(|t| (t.id.as_str(), t.clean_text.as_str())),
        &provider,
    )?;
    if !embedded.out_of_vocabulary.is_empty() {
        warnings.push(format!(
            "{} event tweets had no in-vocabulary tokens and were left out of user embeddings",
            embedded.out_of_vocabulary.len()
        ));
    }

    let mut events = BTreeMap::new();
    let mut outcomes = BTreeMap::new();
    let mut r_all = PerEventScores::new();
    let mut c_all = PerEventScores::new();
    for lex in &lexicons {
        let event = &lex.event;
        progress(&format!("event {event}: stance detection"));
        let tweets = by_event.get(event).cloned().unwrap_or_default();
        let (summary, outcome) = run_event(config, &corpus, event, &tweets, &embedded, &mut out, &mut progress)?;
        r_all.insert(event.clone(), outcome.retweet_scores.clone());
        c_all.insert(event.clone(), outcome.content_scores.clone());
        events.insert(event.clone(), summary);
        outcomes.insert(event.clone(), outcome);
    }

    progress("statistics");
    let stats = run_stats(&corpus, &classified, &r_all, &c_all)?;

    progress("timelines");
    let mut timeline_peaks = BTreeMap::new();
    let mut table1 = BTreeMap::new();
    let mut hist_rows = Vec::new();
    for party in [Party::Bjp, Party::Inc] {
        let t = timeline(&corpus, party);
        out.write(&format!("timeline_{}.csv", party.as_str()), |w| write_timeline_csv(w, &t))?;
        timeline_peaks.insert(party.as_str().to_string(), t.peak_week().map(str::to_string));
        let h = histogram_buckets(retweet_totals(&corpus, party).into_values());
        table1.insert(party.as_str().to_string(), h.clone());
        hist_rows.push((party, h));
    }
    out.write("table1.csv", |w| write_histogram_csv(w, &hist_rows))?;

    let mut summary = RunSummary {
        config_hash: config.hash(),
        tweets_loaded: corpus.report().loaded,
        tweets_skipped: corpus.report().skipped,
        users: corpus.users().len(),
        word_vectors: vectors.len(),
        embedding_provider: match provider {
            EmbeddingProvider::Precomputed(_) => "precomputed".into(),
            EmbeddingProvider::WordVectorMean(_) => "word-vector-mean".into(),
        },
        lexicons: lexicon_summary,
        events,
        stats,
        table1,
        timeline_peaks,
        files: Vec::new(),
        warnings,
    };
    out.files.push("summary.json".into());
    out.files.sort();
    summary.files = out.files.clone();
    let mut json = serde_json::to_vec_pretty(&summary)?;
    json.push(b'\n');
    write_bytes_atomic(&config.output_dir.join("summary.json"), &json)?;
    progress("done");
    Ok(RunOutput {
        summary,
        lexicons,
        classified,
        events: outcomes,
    })
}

fn run_event(
    config: &PipelineConfig,
    corpus: &CorpusHandle,
    event: &EventLabel,
    tweets: &[&Tweet],
    embedded: &crate::embedding::TweetEmbeddings,
    out: &mut Outputs,
    progress: &mut impl FnMut(&str),
) -> Result<(EventSummary, EventOutcome)> {
    let users = corpus.users();
    let dir = format!("events/{event}");
    let mut warnings = Vec::new();

    let (embeddings, emb_report) = user_embeddings(event, tweets.iter().copied(), embedded, config.min_tweets)?;
    let projection = project_2d(&embeddings, &config.umap())?;
    let clusters = label_clusters(cluster(&projection, config.min_cluster_size)?, users)?;
    let sides = clusters.partition();
    out.write(&format!("{dir}/clusters.csv"), |w| write_cluster_csv(w, &clusters, &projection))?;
    out.bytes(&format!("{dir}/clusters.svg"), scatter_svg(&projection, &clusters).as_bytes())?;

    progress(&format!("event {event}: retweet polarity"));
    let labeled: BTreeSet<&str> = sides.keys().map(String::as_str).collect();
    let keep = |u: &str| config.include_noise_vertices || labeled.contains(u);
    let pairs = retweet_pairs(
        tweets.iter().copied().filter(|t| {
            keep(&t.author_id) && t.retweeted_user_id.as_deref().is_some_and(&keep)
        }),
        users,
    );
    let vertices = embeddings.iter().map(|e| e.user_id.clone()).filter(|u| keep(u));
    let graph = build_graph(vertices, &pairs, config.edge_threshold).with_partition(&sides);
    let scores = score_graph(&graph, config.anchors_k, config.hitting_method, &config.walk())?;
    warnings.extend(scores.anchors.warnings.iter().cloned());
    // Users outside both stance clusters are not scored.
    let retweet_scores: BTreeMap<UserId, f64> = scores
        .by_user(&graph)
        .into_iter()
        .filter(|(u, _)| labeled.contains(u.as_str()))
        .collect();
    out.write(&format!("{dir}/scores.csv"), |w| {
        let mut filtered = scores.clone();
        for (v, r) in filtered.polarity.r.iter_mut().enumerate() {
            if !labeled.contains(graph.id(v)) {
                *r = None;
            }
        }
        write_scores_csv(w, event.as_str(), &graph, &filtered)
    })?;
    out.write(&format!("{dir}/graph.gexf"), |w| write_gexf(w, &graph, users, Some(&scores.polarity)))?;

    progress(&format!("event {event}: content polarity"));
    let axis = partisan_axis(&embeddings, &retweet_scores, users, config.axis_n)?;
    let labeled_embeddings: Vec<_> = embeddings
        .iter()
        .filter(|e| labeled.contains(e.user_id.as_str()))
        .cloned()
        .collect();
    let content = content_scores(&labeled_embeddings, &axis);
    out.write(&format!("{dir}/content_scores.csv"), |w| write_content_csv(w, event.as_str(), &content))?;

    let sides_ref = &sides;
    let side_texts = |side: Side| {
        tweets
            .iter()
            .filter(move |t| sides_ref.get(&t.author_id) == Some(&side))
            .map(|t| t.clean_text.as_str())
    };
    let table = prominence(
        side_texts(Side::X),
        side_texts(Side::Y),
        config.prominence_min_count,
        config.prominence_top,
    )?;
    out.write(&format!("{dir}/prominence.csv"), |w| write_prominence_csv(w, &table))?;
    out.bytes(&format!("{dir}/prominence.svg"), prominence_svg(&table).as_bytes())?;

    let mut per_user_counts: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for t in tweets.iter().filter(|t| !t.is_retweet()) {
        per_user_counts.entry(&t.author_id).or_default().push(t.retweet_count as f64);
    }
    let retweet_medians: BTreeMap<UserId, f64> = per_user_counts
        .into_iter()
        .filter_map(|(u, v)| median(&v).map(|m| (u.to_string(), m)))
        .collect();
    let categories = category_medians(&retweet_scores, &content.scores, &retweet_medians, users);
    out.write(&format!("{dir}/categories.csv"), |w| write_category_csv(w, &categories))?;
    out.bytes(&format!("{dir}/categories.svg"), stem_svg(&categories).as_bytes())?;

    let mut side_sizes = BTreeMap::new();
    for s in sides.values() {
        *side_sizes.entry(s.as_str().to_string()).or_insert(0) += 1;
    }
    let summary = EventSummary {
        users_embedded: emb_report.users,
        excluded_below_min_tweets: emb_report.excluded_below_min_tweets,
        clusters: clusters.cluster_ids().len(),
        noise_users: clusters.assignments.iter().filter(|&&c| c == crate::stance::NOISE).count(),
        side_sizes,
        graph_vertices: graph.len(),
        graph_edges: graph.edge_count(),
        hitting_method: scores.l_x.method.as_str().into(),
        truncated_walk_vertices: scores
            .l_x
            .truncated
            .iter()
            .zip(&scores.l_y.truncated)
            .filter(|(a, b)| **a || **b)
            .count(),
        retweet_scored: retweet_scores.len(),
        content_scored: content.scores.len(),
        content_unscored: content.unscored.len(),
        axis_x_users: axis.x_users.clone(),
        axis_y_users: axis.y_users.clone(),
        prominence_top_x: table.top_a.clone(),
        prominence_top_y: table.top_b.clone(),
        categories,
        warnings,
    };
    Ok((
        summary,
        EventOutcome {
            clusters,
            retweet_scores,
            content_scores: content.scores,
        },
    ))
}

fn follower_analysis(
    followers: &[(UserId, u64)],
    score: &BTreeMap<UserId, f64>,
    warnings: &mut Vec<String>,
) -> Result<Option<FollowerAnalysis>> {
    let present: Vec<(UserId, u64)> = followers.iter().filter(|(u, _)| score.contains_key(u)).cloned().collect();
    if present.len() < 4 {
        warnings.push("fewer than 4 scored influencers; follower analysis skipped".into());
        return Ok(None);
    }
    let q = follower_quartiles(&present)?;
    warnings.extend(q.warnings.iter().cloned());
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); 4];
    for (u, level) in &q.levels {
        groups[*level as usize].push(score[u]);
    }
    let usable: Vec<Vec<f64>> = groups.iter().filter(|g| g.len() >= 2).cloned().collect();
    let (anova, ci, pairwise) = if usable.len() == 4 {
        let a = one_way_anova(&usable)?;
        let ci = anova_confidence_intervals(&a, 0.95);
        (Some(a), ci, pairwise_welch(&usable)?)
    } else {
        warnings.push("a follower category has fewer than 2 influencers; ANOVA skipped".into());
        (None, Vec::new(), Vec::new())
    };
    Ok(Some(FollowerAnalysis {
        cuts: q.cuts,
        sizes: FollowerLevel::ALL
            .iter()
            .zip(q.sizes())
            .map(|(l, n)| (l.as_str().to_string(), n))
            .collect(),
        anova,
        confidence_intervals: ci,
        pairwise,
    }))
}

fn run_stats(
    corpus: &CorpusHandle,
    classified: &BTreeMap<String, BTreeSet<EventLabel>>,
    r_all: &PerEventScores,
    c_all: &PerEventScores,
) -> Result<StatsSummary> {
    let users = corpus.users();
    let influencer = |u: &str| users.get(u).is_some_and(|p| p.role.is_influencer());
    let only_influencers = |m: &PerEventScores| -> PerEventScores {
        m.iter()
            .map(|(e, s)| (e.clone(), s.iter().filter(|(u, _)| influencer(u)).map(|(u, v)| (u.clone(), *v)).collect()))
            .collect()
    };
    let aggregate = aggregate_polarity(&only_influencers(r_all), &only_influencers(c_all));
    let mut warnings = Vec::new();

    let r_agg: BTreeMap<UserId, f64> = aggregate
        .iter()
        .filter_map(|a| a.median_abs_retweet_polarity.map(|v| (a.user_id.clone(), v)))
        .collect();
    let c_agg: BTreeMap<UserId, f64> = aggregate
        .iter()
        .filter_map(|a| a.median_abs_content_polarity.map(|v| (a.user_id.clone(), v)))
        .collect();
    let followers: Vec<(UserId, u64)> = users
        .iter()
        .filter(|u| u.role.is_influencer())
        .map(|u| (u.id.clone(), u.followers_count))
        .collect();

    let mut follower_map = BTreeMap::new();
    for (name, scores) in [("retweet_polarity", &r_agg), ("content_polarity", &c_agg)] {
        if let Some(a) = follower_analysis(&followers, scores, &mut warnings)? {
            follower_map.insert(name.to_string(), a);
        }
    }

    // Original tweets only: retweets carry the count of someone else's post.
    let mut splits: BTreeMap<UserId, RateSplit> = BTreeMap::new();
    let mut all_counts: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for t in corpus.tweets().iter().filter(|t| !t.is_retweet() && influencer(&t.author_id)) {
        let s = splits.entry(t.author_id.clone()).or_default();
        if classified.contains_key(&t.id) {
            s.event.push(t.retweet_count);
        } else {
            s.other.push(t.retweet_count);
        }
        all_counts.entry(&t.author_id).or_default().push(t.retweet_count as f64);
    }
    let retweet_rate = retweet_rate_comparison(&splits, &r_agg);

    let mut regression = BTreeMap::new();
    for (name, scores) in [("retweet_polarity", &r_agg), ("content_polarity", &c_agg)] {
        let mut y = Vec::new();
        let mut pol = Vec::new();
        let mut fol = Vec::new();
        for (u, &s) in scores {
            let Some(m) = all_counts.get(u.as_str()).and_then(|v| median(v)) else {
                continue;
            };
            y.push(m.ln_1p());
            pol.push(s);
            fol.push((users.get(u).map_or(0, |p| p.followers_count) as f64).ln_1p());
        }
        if y.len() <= 3 {
            warnings.push(format!("too few influencers for the {name} regression"));
            continue;
        }
        let fit = ols_regression(&y, &[(name, &pol), ("log_followers", &fol)])?;
        regression.insert(name.to_string(), fit);
    }

    Ok(StatsSummary {
        influencers_scored: r_agg.len(),
        followers: follower_map,
        regression,
        retweet_rate,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> &'static str {
        "tweets = \"t.jsonl\"\nusers = \"u.csv\"\nevents = [\"FarmersProtest\", \"Custom\"]\n\
         [seeds]\nCustom = [\"#Custom\", \"word\"]\n"
    }

    #[test]
    fn parses_and_resolves_paths() {
        let c = PipelineConfig::from_toml(base(), &[], Path::new("/data")).unwrap();
        assert_eq!(c.tweets.as_deref(), Some(Path::new("/data/t.jsonl")));
        assert_eq!(c.output_dir, PathBuf::from("/data/out"));
        let seeds = c.event_seeds().unwrap();
        assert_eq!(seeds[0].1.len(), 4);
        assert!(seeds[1].1.contains("#custom"));
        assert_eq!(c.anchors_k, 100);
        assert_eq!(c.axis_n, 10);
        assert_eq!(c.edge_threshold, 2);
    }

    #[test]
    fn overrides_apply_before_parsing() {
        let c = PipelineConfig::from_toml(
            base(),
            &[
                "tau_add=0.55".into(),
                "hitting_method=monte-carlo".into(),
                "seeds.FarmersProtest=[\"#x\"]".into(),
                "weighted_walks=true".into(),
            ],
            Path::new("."),
        )
        .unwrap();
        assert_eq!(c.tau_add, 0.55);
        assert_eq!(c.hitting_method, HittingMethod::MonteCarlo);
        assert!(c.weighted_walks);
        assert_eq!(c.event_seeds().unwrap()[0].1.len(), 1);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = PipelineConfig::from_toml("bogus = 1", &[], Path::new(".")).unwrap_err();
        assert!(e.is_validation());
        assert!(PipelineConfig::from_toml(base(), &["novalue".into()], Path::new(".")).is_err());
    }

    #[test]
    fn validation_catches_missing_tweets_path() {
        let c = PipelineConfig::from_toml("users = \"u.csv\"\nevents = [\"CAA_NRC\"]", &[], Path::new(".")).unwrap();
        let e = c.validate().unwrap_err();
        assert!(e.is_validation());
        assert!(e.to_string().contains("tweets"));
    }

    #[test]
    fn event_without_seeds_is_invalid() {
        let c = PipelineConfig {
            events: vec![EventLabel::new("Unknown")],
            ..PipelineConfig::default()
        };
        assert!(c.event_seeds().is_err());
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = PipelineConfig::default();
        let b = PipelineConfig {
            output_dir: "/elsewhere".into(),
            ..PipelineConfig::default()
        };
        let c = PipelineConfig {
            tau_add: 0.6,
            ..PipelineConfig::default()
        };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
