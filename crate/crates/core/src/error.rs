use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the analysis modules. Messages are prefixed with the
/// module that produced them.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corpus: unknown input format `{0}` (expected jsonl or csv)")]
    UnknownFormat(String),
    #[error("corpus: {0}")]
    Corpus(String),
    #[error("corpus: {malformed} of {total} records are malformed")]
    MostlyMalformed { malformed: usize, total: usize },

    #[error("lexicon: {0}")]
    Lexicon(String),
    #[error("lexicon: none of the seeds are in the vocabulary: {}", .0.join(", "))]
    SeedsNotInVocabulary(Vec<String>),

    #[error("vectors: {0}")]
    VectorFile(String),

    #[error("embedding: {count} tweet ids missing from the embedding file (first: {})", .first.join(", "))]
    MissingEmbeddings { count: usize, first: Vec<String> },
    #[error("embedding: dimension mismatch (expected {expected}, found {found})")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("embedding: {0}")]
    Embedding(String),

    #[error("stance: {0}")]
    Stance(String),
    #[error("stance: unpolarized event, {0}")]
    Unpolarized(String),
    #[error("stance: no politicians among clustered users")]
    NoPoliticians,

    #[error("rtgraph: {0}")]
    Graph(String),

    #[error("content: need {needed} scored politicians per party, have INC={inc} BJP={bjp}")]
    TooFewPoliticians { needed: usize, inc: usize, bjp: usize },
    #[error("content: {0}")]
    Content(String),

    #[error("stats: {0}")]
    Stats(String),
    #[error("stats: singular design matrix, column `{column}` is collinear with [{}]", .with.join(", "))]
    SingularDesign { column: String, with: Vec<String> },

    #[error("datagen: {0}")]
    Datagen(String),

    #[error("config: {0}")]
    Config(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad configuration or input validation, as
    /// opposed to failures while the analysis was running.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Config(_) | Error::UnknownFormat(_))
    }
}
