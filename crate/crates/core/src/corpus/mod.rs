//! Tweet and user ingestion.
//!
//! Tweets arrive as JSONL, user tables as CSV. Retweet linkage is resolved
//! from the raw text before normalization, since normalization removes the
//! `RT @handle:` marker.

mod text;

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::LazyLock;

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Timelike, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use text::{is_emoji, preprocess, tokens};

pub type UserId = String;

/// Label of one political event. The four built-in events have constants;
/// any other label is accepted.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventLabel(String);

impl EventLabel {
    pub const ARTICLE_370: &'static str = "Article370";
    pub const CAA_NRC: &'static str = "CAA_NRC";
    pub const COVID19: &'static str = "COVID19";
    pub const FARMERS_PROTEST: &'static str = "FarmersProtest";

    pub fn new(label: impl Into<String>) -> Self {
        EventLabel(label.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EventLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EventLabel {
    fn from(s: &str) -> Self {
        EventLabel::new(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Party {
    #[serde(rename = "INC")]
    Inc,
    #[serde(rename = "BJP")]
    Bjp,
    #[serde(rename = "other")]
    Other,
}

impl Party {
    pub fn as_str(self) -> &'static str {
        match self {
            Party::Inc => "INC",
            Party::Bjp => "BJP",
            Party::Other => "other",
        }
    }
}

impl FromStr for Party {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_uppercase().as_str() {
            "INC" => Party::Inc,
            "BJP" => Party::Bjp,
            _ => Party::Other,
        })
    }
}

/// The closed influencer category vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Academia,
    Activist,
    Business,
    Entertainment,
    FanAccount,
    Journalist,
    LawAndPolicy,
    MediaHouse,
    PlatformCelebrity,
    SocialWork,
    Sports,
    Writer,
}

impl Category {
    pub const ALL: [Category; 12] = [
        Category::Academia,
        Category::Activist,
        Category::Business,
        Category::Entertainment,
        Category::FanAccount,
        Category::Journalist,
        Category::LawAndPolicy,
        Category::MediaHouse,
        Category::PlatformCelebrity,
        Category::SocialWork,
        Category::Sports,
        Category::Writer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Academia => "Academia",
            Category::Activist => "Activist",
            Category::Business => "Business",
            Category::Entertainment => "Entertainment",
            Category::FanAccount => "Fan Account",
            Category::Journalist => "Journalist",
            Category::LawAndPolicy => "Law & Policy",
            Category::MediaHouse => "Media House",
            Category::PlatformCelebrity => "Platform Celebrity",
            Category::SocialWork => "Social Work",
            Category::Sports => "Sports",
            Category::Writer => "Writer",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim();
        Category::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(wanted))
            .ok_or_else(|| Error::Corpus(format!("unknown influencer category `{wanted}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Politician(Party),
    Influencer(Category),
}

impl Role {
    pub fn party(self) -> Option<Party> {
        match self {
            Role::Politician(p) => Some(p),
            Role::Influencer(_) => None,
        }
    }

    pub fn category(self) -> Option<Category> {
        match self {
            Role::Influencer(c) => Some(c),
            Role::Politician(_) => None,
        }
    }

    pub fn is_influencer(self) -> bool {
        matches!(self, Role::Influencer(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserProfile {
    pub id: UserId,
    pub handle: String,
    pub role: Role,
    pub followers_count: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct UserRow {
    id: String,
    handle: String,
    role: String,
    party_or_category: String,
    followers_count: u64,
}

/// Users indexed by id, with a case-insensitive handle lookup.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UserTable {
    users: BTreeMap<UserId, UserProfile>,
    by_handle: BTreeMap<String, UserId>,
}

impl UserTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, user: UserProfile) -> Result<()> {
        if self.users.contains_key(&user.id) {
            return Err(Error::Corpus(format!("duplicate user id `{}`", user.id)));
        }
        self.by_handle
            .insert(user.handle.to_ascii_lowercase(), user.id.clone());
        self.users.insert(user.id.clone(), user);
        Ok(())
    }

    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file)
    }

    /// Reads `id,handle,role,party_or_category,followers_count` rows.
    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let mut table = UserTable::new();
        let mut rdr = csv::Reader::from_reader(reader);
        for (line, row) in rdr.deserialize::<UserRow>().enumerate() {
            let row = row?;
            let role = match row.role.trim().to_ascii_lowercase().as_str() {
                "politician" => Role::Politician(row.party_or_category.parse()?),
                "influencer" => Role::Influencer(row.party_or_category.parse()?),
                other => {
                    return Err(Error::Corpus(format!(
                        "user row {}: unknown role `{other}`",
                        line + 1
                    )))
                }
            };
            table.insert(UserProfile {
                id: row.id,
                handle: row.handle,
                role,
                followers_count: row.followers_count,
            })?;
        }
        Ok(table)
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for user in self.users.values() {
            let (role, detail) = match user.role {
                Role::Politician(p) => ("politician", p.as_str()),
                Role::Influencer(c) => ("influencer", c.as_str()),
            };
            w.serialize(UserRow {
                id: user.id.clone(),
                handle: user.handle.clone(),
                role: role.to_string(),
                party_or_category: detail.to_string(),
                followers_count: user.followers_count,
            })?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&UserProfile> {
        self.users.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.users.contains_key(id)
    }

    pub fn resolve_handle(&self, handle: &str) -> Option<&UserId> {
        self.by_handle.get(&handle.to_ascii_lowercase())
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    /// Users in id order.
    pub fn iter(&self) -> impl Iterator<Item = &UserProfile> {
        self.users.values()
    }

    pub fn party_of(&self, id: &str) -> Option<Party> {
        self.get(id).and_then(|u| u.role.party())
    }

    pub fn category_of(&self, id: &str) -> Option<Category> {
        self.get(id).and_then(|u| u.role.category())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tweet {
    pub id: String,
    pub author_id: UserId,
    pub created_at: DateTime<Utc>,
    pub raw_text: String,
    /// Present iff the tweet is a retweet of another user.
    pub retweeted_user_id: Option<UserId>,
    pub retweet_count: u64,
    pub clean_text: String,
}

impl Tweet {
    pub fn is_retweet(&self) -> bool {
        self.retweeted_user_id.is_some()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TweetRecord {
    id: String,
    author_id: String,
    created_at: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    retweeted_user_id: Option<String>,
    #[serde(default)]
    retweet_count: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputFormat {
    Jsonl,
    Csv,
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "jsonl" => Ok(InputFormat::Jsonl),
            "csv" => Ok(InputFormat::Csv),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub records: usize,
    pub loaded: usize,
    pub skipped: usize,
    pub self_retweets_dropped: usize,
    pub warnings: Vec<String>,
}

/// An immutable, deterministically ordered corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusHandle {
    tweets: Vec<Tweet>,
    users: UserTable,
    time_span: Option<(DateTime<Utc>, DateTime<Utc>)>,
    report: IngestReport,
}

impl CorpusHandle {
    /// Builds a corpus from already-parsed tweets. Tweets are sorted by
    /// timestamp, then id.
    pub fn from_tweets(mut tweets: Vec<Tweet>, users: UserTable) -> Self {
        tweets.sort_by(|a, b| (a.created_at, &a.id).cmp(&(b.created_at, &b.id)));
        let time_span = match (tweets.first(), tweets.last()) {
            (Some(a), Some(b)) => Some((a.created_at, b.created_at)),
            _ => None,
        };
        let report = IngestReport {
            records: tweets.len(),
            loaded: tweets.len(),
            ..IngestReport::default()
        };
        CorpusHandle {
            tweets,
            users,
            time_span,
            report,
        }
    }

    pub fn tweets(&self) -> &[Tweet] {
        &self.tweets
    }

    pub fn users(&self) -> &UserTable {
        &self.users
    }

    /// `None` for an empty corpus.
    pub fn time_span(&self) -> Option<(DateTime<Utc>, DateTime<Utc>)> {
        self.time_span
    }

    pub fn report(&self) -> &IngestReport {
        &self.report
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    /// Writes the tweets back out as JSONL with explicit retweet linkage.
    pub fn write_jsonl(&self, mut writer: impl Write) -> Result<()> {
        for t in &self.tweets {
            write_tweet_jsonl(&mut writer, t)?;
        }
        Ok(())
    }
}

pub(crate) fn write_tweet_jsonl(mut writer: impl Write, t: &Tweet) -> Result<()> {
    let record = TweetRecord {
        id: t.id.clone(),
        author_id: t.author_id.clone(),
        created_at: format_timestamp(t.created_at),
        text: t.raw_text.clone(),
        retweeted_user_id: t.retweeted_user_id.clone(),
        retweet_count: t.retweet_count,
    };
    serde_json::to_writer(&mut writer, &record)?;
    writer
        .write_all(b"\n")
        .map_err(|e| Error::io("<jsonl>", e))?;
    Ok(())
}

pub fn format_timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Parses an ISO-8601 timestamp, truncated to whole seconds. A missing
/// offset is read as UTC.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    let parsed = DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .ok()
        .or_else(|| {
            ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"]
                .iter()
                .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
                .map(|n| n.and_utc())
        })?;
    parsed.with_nanosecond(0)
}

static RETWEET_PREFIX: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*RT @(\w+):?").unwrap());

/// Loads tweets from `path`. Records missing a required field, with an
/// unparseable timestamp, or by an author absent from `users` are skipped
/// and counted.
pub fn ingest_tweets(
    path: impl AsRef<Path>,
    format: InputFormat,
    users: UserTable,
) -> Result<CorpusHandle> {
    if format == InputFormat::Csv {
        return Err(Error::Corpus(
            "CSV is accepted for user tables only; tweets must be JSONL".into(),
        ));
    }
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_jsonl(BufReader::new(file), users)
}

pub fn ingest_jsonl(reader: impl BufRead, users: UserTable) -> Result<CorpusHandle> {
    let mut tweets = Vec::new();
    let mut report = IngestReport::default();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io("<jsonl>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        report.records += 1;
        match parse_record(&line, &users) {
            Some((tweet, self_retweet)) => {
                report.self_retweets_dropped += usize::from(self_retweet);
                tweets.push(tweet);
            }
            None => report.skipped += 1,
        }
    }
    if report.skipped * 2 > report.records {
        return Err(Error::MostlyMalformed {
            malformed: report.skipped,
            total: report.records,
        });
    }
    report.loaded = tweets.len();
    if tweets.is_empty() {
        report.warnings.push("empty corpus: time span undefined".into());
    }
    if report.skipped > 0 {
        report
            .warnings
            .push(format!("skipped {} malformed records", report.skipped));
    }
    let mut corpus = CorpusHandle::from_tweets(tweets, users);
    corpus.report = report;
    Ok(corpus)
}

fn json_string(value: &serde_json::Value, key: &str) -> Option<String> {
    match value.get(key)? {
        serde_json::Value::String(s) if !s.is_empty() => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn parse_record(line: &str, users: &UserTable) -> Option<(Tweet, bool)> {
    let value: serde_json::Value = serde_json::from_str(line).ok()?;
    let id = json_string(&value, "id")?;
    let author_id = json_string(&value, "author_id")?;
    if !users.contains(&author_id) {
        return None;
    }
    let created_at = parse_timestamp(value.get("created_at")?.as_str()?)?;
    let raw_text = value.get("text")?.as_str()?.to_string();
    let retweet_count = match value.get("retweet_count") {
        None | Some(serde_json::Value::Null) => 0,
        Some(v) => v.as_u64()?,
    };

    let mut retweeted = json_string(&value, "retweeted_user_id").or_else(|| {
        RETWEET_PREFIX.captures(&raw_text).map(|caps| {
            let handle = &caps[1];
            users
                .resolve_handle(handle)
                .cloned()
                .unwrap_or_else(|| format!("@{handle}"))
        })
    });
    let self_retweet = retweeted.as_deref() == Some(author_id.as_str());
    if self_retweet {
        retweeted = None;
    }

    let clean_text = preprocess(&raw_text);
    Some((
        Tweet {
            id,
            author_id,
            created_at,
            raw_text,
            retweeted_user_id: retweeted,
            retweet_count,
            clean_text,
        },
        self_retweet,
    ))
}

/// Multiset of directed `(retweeter, retweeted)` pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RetweetPairs {
    counts: BTreeMap<(UserId, UserId), usize>,
}

impl RetweetPairs {
    pub fn add(&mut self, retweeter: &str, retweeted: &str, times: usize) {
        if times == 0 || retweeter == retweeted {
            return;
        }
        *self
            .counts
            .entry((retweeter.to_string(), retweeted.to_string()))
            .or_default() += times;
    }

    pub fn multiplicity(&self, retweeter: &str, retweeted: &str) -> usize {
        self.counts
            .get(&(retweeter.to_string(), retweeted.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, usize)> {
        self.counts
            .iter()
            .map(|((a, b), &n)| (a.as_str(), b.as_str(), n))
    }
}

/// One pair per retweet in the corpus, restricted to known users.
pub fn retweet_edge_list(corpus: &CorpusHandle) -> RetweetPairs {
    retweet_pairs(corpus.tweets(), corpus.users())
}

pub fn retweet_pairs<'a>(
    tweets: impl IntoIterator<Item = &'a Tweet>,
    users: &UserTable,
) -> RetweetPairs {
    let mut pairs = RetweetPairs::default();
    for t in tweets {
        if let Some(target) = &t.retweeted_user_id {
            if users.contains(&t.author_id) && users.contains(target) {
                pairs.add(&t.author_id, target, 1);
            }
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn users() -> UserTable {
        let csv = "id,handle,role,party_or_category,followers_count\n\
                   1,alice,politician,INC,100\n\
                   2,bob,politician,BJP,50\n\
                   3,carol,influencer,Journalist,900\n";
        UserTable::from_csv_reader(csv.as_bytes()).unwrap()
    }

    fn ingest(lines: &str) -> Result<CorpusHandle> {
        ingest_jsonl(lines.as_bytes(), users())
    }

    #[test]
    fn user_csv_parses_roles() {
        let t = users();
        assert_eq!(t.len(), 3);
        assert_eq!(t.get("1").unwrap().role, Role::Politician(Party::Inc));
        assert_eq!(
            t.get("3").unwrap().role,
            Role::Influencer(Category::Journalist)
        );
        assert_eq!(t.resolve_handle("ALICE").map(String::as_str), Some("1"));
    }

    #[test]
    fn unknown_category_is_rejected() {
        let csv = "id,handle,role,party_or_category,followers_count\n9,x,influencer,Astrologer,1\n";
        assert!(UserTable::from_csv_reader(csv.as_bytes()).is_err());
    }

    #[test]
    fn retweet_prefix_resolves_before_normalization() {
        let c = ingest(
            r#"{"id":"t1","author_id":"3","created_at":"2020-01-01T00:00:00Z","text":"RT @alice: hello","retweet_count":0}"#,
        )
        .unwrap();
        let t = &c.tweets()[0];
        assert_eq!(t.retweeted_user_id.as_deref(), Some("1"));
        assert_eq!(t.clean_text, "hello");
    }

    #[test]
    fn empty_file_gives_empty_corpus_with_warning() {
        let c = ingest("").unwrap();
        assert!(c.is_empty());
        assert!(c.time_span().is_none());
        assert!(!c.report().warnings.is_empty());
    }

    #[test]
    fn record_missing_author_is_skipped() {
        let c = ingest(concat!(
            r#"{"id":"a","author_id":"1","created_at":"2020-01-01T00:00:00Z","text":"x"}"#,
            "\n",
            r#"{"id":"b","created_at":"2020-01-01T00:00:00Z","text":"y"}"#,
            "\n",
            r#"{"id":"c","author_id":"2","created_at":"2020-01-02T00:00:00Z","text":"z"}"#,
            "\n",
        ))
        .unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.report().skipped, 1);
    }

    #[test]
    fn mostly_malformed_is_fatal() {
        let err = ingest("{}\n{}\n{\"id\":\"a\",\"author_id\":\"1\",\"created_at\":\"2020-01-01T00:00:00Z\",\"text\":\"x\"}\n")
            .unwrap_err();
        assert!(matches!(err, Error::MostlyMalformed { malformed: 2, total: 3 }));
    }

    #[test]
    fn format_tags() {
        assert_eq!("JSONL".parse::<InputFormat>().unwrap(), InputFormat::Jsonl);
        assert!(matches!(
            "xml".parse::<InputFormat>(),
            Err(Error::UnknownFormat(_))
        ));
        let err = ingest_tweets("/nonexistent", InputFormat::Csv, users()).unwrap_err();
        assert!(matches!(err, Error::Corpus(_)));
        let err = ingest_tweets("/nonexistent", InputFormat::Jsonl, users()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn ordering_is_by_timestamp_then_id() {
        let c = ingest(concat!(
            r#"{"id":"b","author_id":"1","created_at":"2020-01-02T00:00:00Z","text":"x"}"#,
            "\n",
            r#"{"id":"c","author_id":"1","created_at":"2020-01-01T00:00:00Z","text":"x"}"#,
            "\n",
            r#"{"id":"a","author_id":"1","created_at":"2020-01-02T00:00:00Z","text":"x"}"#,
            "\n",
        ))
        .unwrap();
        let ids: Vec<_> = c.tweets().iter().map(|t| t.id.as_str()).collect();
        assert_eq!(ids, ["c", "a", "b"]);
        let (lo, hi) = c.time_span().unwrap();
        assert!(lo < hi);
    }

    #[test]
    fn edge_list_counts_multiplicity() {
        let line = |id: &str| {
            format!(
                r#"{{"id":"{id}","author_id":"1","created_at":"2020-01-01T00:00:00Z","text":"RT @bob: hi"}}"#
            )
        };
        let c = ingest(&[line("a"), line("b"), line("c")].join("\n")).unwrap();
        let pairs = retweet_edge_list(&c);
        assert_eq!(pairs.multiplicity("1", "2"), 3);
        assert_eq!(pairs.total(), 3);
    }

    #[test]
    fn edge_list_drops_self_and_unknown_targets() {
        // 5 retweets: 3 valid, one self-retweet, one of an unknown handle.
        let rows = [
            ("a", "1", "RT @bob: one"),
            ("b", "1", "RT @carol: two"),
            ("c", "2", "RT @alice: three"),
            ("d", "1", "RT @alice: mine"),
            ("e", "3", "RT @zed: who"),
        ];
        let text: Vec<String> = rows
            .iter()
            .map(|(id, author, text)| {
                format!(
                    r#"{{"id":"{id}","author_id":"{author}","created_at":"2020-01-01T00:00:00Z","text":"{text}"}}"#
                )
            })
            .collect();
        let c = ingest(&text.join("\n")).unwrap();
        assert_eq!(c.report().self_retweets_dropped, 1);
        assert_eq!(retweet_edge_list(&c).total(), 3);
    }

    #[test]
    fn no_retweets_no_pairs() {
        let c = ingest(
            r#"{"id":"a","author_id":"1","created_at":"2020-01-01T00:00:00Z","text":"plain"}"#,
        )
        .unwrap();
        assert!(retweet_edge_list(&c).is_empty());
    }
}
