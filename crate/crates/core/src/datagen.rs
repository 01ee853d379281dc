//! Synthetic worlds with planted ground truth.
//!
//! A world has INC and BJP politicians, influencers in the twelve
//! categories, and a set of events. Every participant holds a stance per
//! event. Stance drives three things: the words of event tweets, the
//! direction of their embeddings, and which users retweet each other
//! (a two-block stochastic block model). Retweet counts follow a planted
//! log-linear model in polarization strength and followers.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use chrono::{DateTime, Datelike, Duration, NaiveDate, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    preprocess, write_tweet_jsonl, Category, CorpusHandle, EventLabel, Party, RetweetPairs, Role,
    Tweet, UserId, UserProfile, UserTable,
};
use crate::error::{Error, Result};
use crate::lexicon::default_seeds;
use crate::report::{write_atomic, write_bytes_atomic};
use crate::stance::Side;
use crate::stats::RateSplit;
use crate::vectors::VectorTable;

/// Relative influencer category sizes used to allocate influencers.
pub const CATEGORY_WEIGHTS: [(Category, u32); 12] = [
    (Category::Academia, 172),
    (Category::Activist, 81),
    (Category::Business, 208),
    (Category::Entertainment, 1251),
    (Category::FanAccount, 36),
    (Category::Journalist, 3551),
    (Category::LawAndPolicy, 141),
    (Category::MediaHouse, 550),
    (Category::PlatformCelebrity, 126),
    (Category::SocialWork, 63),
    (Category::Sports, 348),
    (Category::Writer, 99),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub label: EventLabel,
    pub seeds: Vec<String>,
    /// First and last day (inclusive) of event activity, `YYYY-MM-DD`.
    pub start: String,
    pub end: String,
    /// Any day of the burst week.
    pub burst: String,
}

impl EventSpec {
    pub fn builtin(label: &str, start: &str, end: &str, burst: &str) -> Self {
        EventSpec {
            label: EventLabel::new(label),
            seeds: default_seeds(label)
                .unwrap_or_default()
                .iter()
                .map(|s| s.to_string())
                .collect(),
            start: start.into(),
            end: end.into(),
            burst: burst.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetweetModel {
    pub intercept: f64,
    pub polarity: f64,
    pub log_followers: f64,
    pub noise_sd: f64,
}

impl Default for RetweetModel {
    fn default() -> Self {
        RetweetModel {
            intercept: -6.0,
            polarity: 1.9,
            log_followers: 0.8,
            noise_sd: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldSpec {
    pub seed: u64,
    pub politicians_per_party: usize,
    pub influencers: usize,
    pub events: Vec<EventSpec>,
    pub span_start: String,
    pub span_end: String,
    /// Probability an influencer takes part in a given event.
    pub participation: f64,
    /// Probability an influencer's stance on an event matches its overall lean.
    pub lean_consistency: f64,
    pub event_tweets: [usize; 2],
    pub off_topic_tweets: [usize; 2],
    pub adversarial_rate: f64,
    pub topical_words: usize,
    pub stance_words: usize,
    pub background_words: usize,
    pub embedding_dim: usize,
    pub event_signal: f64,
    pub stance_signal: f64,
    pub noise_sd: f64,
    pub p_in: f64,
    pub p_out: f64,
    /// Retweet propensity multiplier for politicians.
    pub politician_activity: f64,
    /// Extra cross-side retweeting by weakly polarized influencers.
    pub mixing_boost: f64,
    pub burst_share: f64,
    pub retweets: RetweetModel,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            seed: 7,
            politicians_per_party: 100,
            influencers: 300,
            events: vec![
                EventSpec::builtin(EventLabel::FARMERS_PROTEST, "2020-11-23", "2021-02-28", "2020-12-08"),
                EventSpec::builtin(EventLabel::CAA_NRC, "2019-12-09", "2020-03-01", "2019-12-18"),
            ],
            span_start: "2019-11-04".into(),
            span_end: "2021-03-28".into(),
            participation: 0.9,
            lean_consistency: 0.8,
            event_tweets: [4, 8],
            off_topic_tweets: [6, 12],
            adversarial_rate: 0.05,
            topical_words: 16,
            stance_words: 20,
            background_words: 400,
            embedding_dim: 64,
            event_signal: 1.0,
            stance_signal: 1.0,
            noise_sd: 0.2,
            p_in: 0.05,
            p_out: 0.003,
            politician_activity: 1.5,
            mixing_boost: 3.0,
            burst_share: 0.5,
            retweets: RetweetModel::default(),
        }
    }
}

fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|e| Error::Datagen(format!("bad date `{s}`: {e}")))
}

fn iso_week(d: NaiveDate) -> String {
    d.format("%G-W%V").to_string()
}

impl WorldSpec {
    /// Parses a TOML world spec; missing keys take their defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("world spec: {}", e.message())))
    }

    /// A pipeline config that analyses the files `World::write` produces.
    pub fn pipeline_toml(&self) -> String {
        let events: Vec<String> = self.events.iter().map(|e| format!("{:?}", e.label.as_str())).collect();
        let mut out = format!(
            "tweets = \"tweets.jsonl\"\nusers = \"users.csv\"\nembeddings = \"embeddings.bin\"\n\
             output_dir = \"out\"\nevents = [{}]\n\n[seeds]\n",
            events.join(", ")
        );
        for e in &self.events {
            let seeds: Vec<String> = e.seeds.iter().map(|s| format!("{s:?}")).collect();
            out.push_str(&format!("{:?} = [{}]\n", e.label.as_str(), seeds.join(", ")));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Datagen(m));
        for (name, p) in [
            ("participation", self.participation),
            ("lean_consistency", self.lean_consistency),
            ("adversarial_rate", self.adversarial_rate),
            ("p_in", self.p_in),
            ("p_out", self.p_out),
            ("burst_share", self.burst_share),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if self.politicians_per_party == 0 {
            return bad("need at least one politician per party".into());
        }
        if self.events.is_empty() {
            return bad("no events".into());
        }
        if self.topical_words == 0 || self.stance_words == 0 || self.background_words == 0 {
            return bad("vocabulary blocks must be non-empty".into());
        }
        if self.embedding_dim < 2 {
            return bad("embedding_dim must be at least 2".into());
        }
        if self.event_tweets[0] == 0 || self.event_tweets[0] > self.event_tweets[1] {
            return bad("event_tweets must be a non-empty range starting at 1 or more".into());
        }
        if self.off_topic_tweets[0] > self.off_topic_tweets[1] {
            return bad("off_topic_tweets range is reversed".into());
        }
        let (s, e) = (parse_date(&self.span_start)?, parse_date(&self.span_end)?);
        if e < s {
            return bad("span ends before it starts".into());
        }
        let mut labels = BTreeSet::new();
        for ev in &self.events {
            if !labels.insert(&ev.label) {
                return bad(format!("duplicate event {}", ev.label));
            }
            if ev.seeds.is_empty() {
                return bad(format!("event {} has no seeds", ev.label));
            }
            let (a, b, burst) = (parse_date(&ev.start)?, parse_date(&ev.end)?, parse_date(&ev.burst)?);
            if b < a || a < s || b > e || burst < a || burst > b {
                return bad(format!("event {} window does not fit the span", ev.label));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventVocabulary {
    pub seeds: Vec<String>,
    pub topical: Vec<String>,
    pub stance_x: Vec<String>,
    pub stance_y: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserTruth {
    /// Planted stance per event the user takes part in.
    pub stance: BTreeMap<EventLabel, Side>,
    /// Polarization strength in `[0, 1]`; 1 for politicians.
    pub strength: f64,
    pub lean: Side,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: WorldSpec,
    pub users: BTreeMap<UserId, UserTruth>,
    /// Events of every event-related tweet; absent ids are off-topic.
    pub tweet_events: BTreeMap<String, Vec<EventLabel>>,
    /// Off-topic tweets that reuse an event keyword.
    pub adversarial: Vec<String>,
    pub burst_weeks: BTreeMap<EventLabel, String>,
    pub vocabularies: BTreeMap<EventLabel, EventVocabulary>,
    pub background: Vec<String>,
    pub stance_directions: BTreeMap<EventLabel, Vec<f64>>,
}

impl GroundTruth {
    pub fn stance(&self, user: &str, event: &EventLabel) -> Option<Side> {
        self.users.get(user)?.stance.get(event).copied()
    }

    pub fn is_event_tweet(&self, tweet: &str, event: &EventLabel) -> bool {
        self.tweet_events
            .get(tweet)
            .is_some_and(|evs| evs.contains(event))
    }
}

#[derive(Clone, Debug)]
pub struct World {
    pub corpus: CorpusHandle,
    pub embeddings: VectorTable,
    pub truth: GroundTruth,
}

impl World {
    pub fn users(&self) -> &UserTable {
        self.corpus.users()
    }

    /// Writes `tweets.jsonl`, `users.csv`, `embeddings.bin` and
    /// `ground_truth.json`. Retweets are written in `RT @handle:` form
    /// without an explicit target field.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_atomic(&dir.join("tweets.jsonl"), |w| {
            for t in self.corpus.tweets() {
                let plain = Tweet {
                    retweeted_user_id: None,
                    ..t.clone()
                };
                write_tweet_jsonl(&mut *w, &plain)?;
            }
            Ok(())
        })?;
        write_atomic(&dir.join("users.csv"), |w| self.users().write_csv(w))?;
        self.embeddings.save(dir.join("embeddings.bin"))?;
        let mut json = serde_json::to_vec_pretty(&self.truth)?;
        json.push(b'\n');
        write_bytes_atomic(&dir.join("ground_truth.json"), &json)
    }
}

const ONSETS: [&str; 16] = [
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "ch",
];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];

/// Unique pronounceable pseudo-words.
struct WordMint {
    used: BTreeSet<String>,
}

impl WordMint {
    fn mint(&mut self, rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let syllables = rng.random_range(2..=3);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(ONSETS.choose(rng).unwrap());
                w.push_str(VOWELS.choose(rng).unwrap());
            }
            if self.used.insert(w.clone()) {
                out.push(w);
            }
        }
        out
    }
}

fn allocate_categories(n: usize) -> Vec<Category> {
    let total: u32 = CATEGORY_WEIGHTS.iter().map(|c| c.1).sum();
    let mut counts: Vec<(Category, usize, f64)> = CATEGORY_WEIGHTS
        .iter()
        .map(|&(c, w)| {
            let exact = n as f64 * w as f64 / total as f64;
            (c, exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let mut left = n - counts.iter().map(|c| c.1).sum::<usize>();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| counts[b].2.total_cmp(&counts[a].2).then(a.cmp(&b)));
    for i in order {
        if left == 0 {
            break;
        }
        counts[i].1 += 1;
        left -= 1;
    }
    counts
        .into_iter()
        .flat_map(|(c, k, _)| std::iter::repeat_n(c, k))
        .collect()
}

fn unit_gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let v: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn orthogonalize(v: &mut [f64], against: &[&[f64]]) {
    for a in against {
        let d: f64 = v.iter().zip(a.iter()).map(|(x, y)| x * y).sum();
        for (x, y) in v.iter_mut().zip(a.iter()) {
            *x -= d * y;
        }
    }
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= n;
    }
}

fn random_time(rng: &mut ChaCha8Rng, first: NaiveDate, last: NaiveDate) -> DateTime<Utc> {
    let start = first.and_hms_opt(0, 0, 0).unwrap().and_utc();
    let secs = (last - first).num_seconds() + 86_400;
    start + Duration::seconds(rng.random_range(0..secs))
}

struct Participant {
    user: usize,
    side: Side,
}

struct Original {
    tweet: usize,
}

/// Generates a world. Identical specs give identical worlds.
pub fn generate(spec: &WorldSpec) -> Result<World> {
    spec.validate()?;
    let mut rng = crate::rng::seeded(spec.seed);
    let span = (parse_date(&spec.span_start)?, parse_date(&spec.span_end)?);

    let mut mint = WordMint {
        used: spec.events.iter().flat_map(|e| e.seeds.iter().cloned()).collect(),
    };
    let background = mint.mint(&mut rng, spec.background_words);
    let mut vocab = BTreeMap::new();
    for ev in &spec.events {
        vocab.insert(
            ev.label.clone(),
            EventVocabulary {
                seeds: ev.seeds.clone(),
                topical: mint.mint(&mut rng, spec.topical_words),
                stance_x: mint.mint(&mut rng, spec.stance_words),
                stance_y: mint.mint(&mut rng, spec.stance_words),
            },
        );
    }

    // Users.
    let mut profiles = Vec::new();
    let mut truths = Vec::new();
    let pol_followers = LogNormal::<f64>::new(10.0, 1.2).unwrap();
    let inf_followers = LogNormal::<f64>::new(11.0, 1.5).unwrap();
    for (party, prefix) in [(Party::Inc, "inc"), (Party::Bjp, "bjp")] {
        for i in 0..spec.politicians_per_party {
            profiles.push(UserProfile {
                id: format!("p{}{:04}", prefix, i + 1),
                handle: format!("{prefix}_leader{:03}", i + 1),
                role: Role::Politician(party),
                followers_count: pol_followers.sample(&mut rng).round() as u64,
            });
            truths.push(UserTruth {
                stance: BTreeMap::new(),
                strength: 1.0,
                lean: Side::of_party(party).unwrap(),
            });
        }
    }
    for (i, category) in allocate_categories(spec.influencers).into_iter().enumerate() {
        profiles.push(UserProfile {
            id: format!("u{:05}", i + 1),
            handle: format!("voice{:04}", i + 1),
            role: Role::Influencer(category),
            followers_count: inf_followers.sample(&mut rng).round() as u64,
        });
        truths.push(UserTruth {
            stance: BTreeMap::new(),
            strength: rng.random_range(0.1..1.0),
            lean: if rng.random_bool(0.5) { Side::X } else { Side::Y },
        });
    }

    let dim = spec.embedding_dim;
    let background_dir = unit_gaussian(&mut rng, dim);
    let noise = Normal::new(0.0, spec.noise_sd.max(0.0)).unwrap();
    let rc_noise = Normal::new(0.0, spec.retweets.noise_sd.max(0.0)).unwrap();

    let mut tweets: Vec<Tweet> = Vec::new();
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    let mut tweet_events: BTreeMap<String, Vec<EventLabel>> = BTreeMap::new();
    let mut adversarial = Vec::new();
    let mut next_id = 0usize;
    let mut new_id = || {
        next_id += 1;
        format!("t{next_id:07}")
    };
    let retweet_count = |rng: &mut ChaCha8Rng, user: &UserProfile, strength: f64, event: bool| {
        let m = &spec.retweets;
        let mut z = m.intercept + m.log_followers * (user.followers_count as f64).ln_1p() + rc_noise.sample(rng);
        if event {
            z += m.polarity * strength;
        }
        z.exp_m1().max(0.0).round() as u64
    };

    // Off-topic originals.
    let all_keywords: Vec<&String> = vocab
        .values()
        .flat_map(|v| v.seeds.iter().chain(&v.topical))
        .collect();
    for (u, user) in profiles.iter().enumerate() {
        let n = rng.random_range(spec.off_topic_tweets[0]..=spec.off_topic_tweets[1]);
        for _ in 0..n {
            let len = rng.random_range(8..=14);
            let mut words: Vec<&str> = (0..len)
                .map(|_| background.choose(&mut rng).unwrap().as_str())
                .collect();
            let id = new_id();
            if rng.random_bool(spec.adversarial_rate) {
                let slot = rng.random_range(0..words.len());
                words[slot] = all_keywords.choose(&mut rng).unwrap().as_str();
                adversarial.push(id.clone());
            }
            let text = words.join(" ");
            let v: Vec<f64> = background_dir.iter().map(|b| b + noise.sample(&mut rng)).collect();
            tweets.push(Tweet {
                id,
                author_id: user.id.clone(),
                created_at: random_time(&mut rng, span.0, span.1),
                clean_text: preprocess(&text),
                raw_text: text,
                retweeted_user_id: None,
                retweet_count: retweet_count(&mut rng, user, truths[u].strength, false),
            });
            vectors.push(v);
        }
    }

    let mut burst_weeks = BTreeMap::new();
    let mut stance_directions = BTreeMap::new();
    for ev in &spec.events {
        let words = &vocab[&ev.label];
        let (first, last) = (parse_date(&ev.start)?, parse_date(&ev.end)?);
        let burst = parse_date(&ev.burst)?;
        let burst_monday = burst - Duration::days(burst.weekday().num_days_from_monday() as i64);
        burst_weeks.insert(ev.label.clone(), iso_week(burst));
        let event_dir = unit_gaussian(&mut rng, dim);
        let mut stance_dir = unit_gaussian(&mut rng, dim);
        orthogonalize(&mut stance_dir, &[&event_dir, &background_dir]);
        stance_directions.insert(ev.label.clone(), stance_dir.clone());

        let mut participants = Vec::new();
        for (u, user) in profiles.iter().enumerate() {
            let side = match user.role {
                Role::Politician(p) => Side::of_party(p).unwrap(),
                Role::Influencer(_) => {
                    if !rng.random_bool(spec.participation) {
                        continue;
                    }
                    let lean = truths[u].lean;
                    if rng.random_bool(spec.lean_consistency) {
                        lean
                    } else {
                        lean.flip()
                    }
                }
            };
            truths[u].stance.insert(ev.label.clone(), side);
            participants.push(Participant { user: u, side });
        }

        // Event originals.
        let mut originals: Vec<Vec<Original>> = Vec::with_capacity(participants.len());
        for p in &participants {
            let user = &profiles[p.user];
            let sign = if p.side == Side::X { 1.0 } else { -1.0 };
            let own = if p.side == Side::X { &words.stance_x } else { &words.stance_y };
            let n = rng.random_range(spec.event_tweets[0]..=spec.event_tweets[1]);
            let mut mine = Vec::with_capacity(n);
            for _ in 0..n {
                let mut toks: Vec<&str> = Vec::new();
                toks.push(if rng.random_bool(0.5) {
                    words.seeds.choose(&mut rng).unwrap()
                } else {
                    words.topical.choose(&mut rng).unwrap()
                });
                for _ in 0..rng.random_range(3..=5) {
                    toks.push(words.topical.choose(&mut rng).unwrap());
                }
                for _ in 0..rng.random_range(2..=4) {
                    toks.push(own.choose(&mut rng).unwrap());
                }
                for _ in 0..rng.random_range(2..=3) {
                    toks.push(background.choose(&mut rng).unwrap());
                }
                toks.shuffle(&mut rng);
                let text = toks.join(" ");
                let v: Vec<f64> = (0..dim)
                    .map(|d| {
                        spec.event_signal * event_dir[d]
                            + sign * spec.stance_signal * stance_dir[d]
                            + noise.sample(&mut rng)
                    })
                    .collect();
                let id = new_id();
                tweet_events.entry(id.clone()).or_default().push(ev.label.clone());
                mine.push(Original { tweet: tweets.len() });
                tweets.push(Tweet {
                    id,
                    author_id: user.id.clone(),
                    created_at: random_time(&mut rng, first, last),
                    clean_text: preprocess(&text),
                    raw_text: text,
                    retweeted_user_id: None,
                    retweet_count: retweet_count(&mut rng, user, truths[p.user].strength, true),
                });
                vectors.push(v);
            }
            originals.push(mine);
        }

        // Retweet edges: block model plus a random spanning tree per side.
        let weight = |p: &Participant| {
            if profiles[p.user].role.is_influencer() {
                1.0
            } else {
                spec.politician_activity
            }
        };
        let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
        for a in 0..participants.len() {
            for b in a + 1..participants.len() {
                let (pa, pb) = (&participants[a], &participants[b]);
                let prob = if pa.side == pb.side {
                    spec.p_in * weight(pa) * weight(pb)
                } else {
                    let (sa, sb) = (truths[pa.user].strength, truths[pb.user].strength);
                    spec.p_out * (1.0 + spec.mixing_boost * (1.0 - sa) * (1.0 - sb))
                };
                if rng.random_bool(prob.clamp(0.0, 1.0)) {
                    edges.insert((a, b));
                }
            }
        }
        for side in [Side::X, Side::Y] {
            let mut members: Vec<usize> = (0..participants.len())
                .filter(|&i| participants[i].side == side)
                .collect();
            members.shuffle(&mut rng);
            for i in 1..members.len() {
                let j = members[rng.random_range(0..i)];
                let (a, b) = (members[i].min(j), members[i].max(j));
                edges.insert((a, b));
            }
        }
        let burst_last = burst_monday + Duration::days(6);
        for (a, b) in edges {
            for _ in 0..rng.random_range(2..=3) {
                let (from, to) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
                let source = originals[to].choose(&mut rng).unwrap().tweet;
                let target = &profiles[participants[to].user];
                let text = format!("RT @{}: {}", target.handle, tweets[source].raw_text);
                let created_at = if rng.random_bool(spec.burst_share) {
                    random_time(&mut rng, burst_monday.max(first), burst_last.min(last))
                } else {
                    random_time(&mut rng, first, last)
                };
                let id = new_id();
                tweet_events.entry(id.clone()).or_default().push(ev.label.clone());
                let v = vectors[source].clone();
                tweets.push(Tweet {
                    id,
                    author_id: profiles[participants[from].user].id.clone(),
                    created_at,
                    clean_text: preprocess(&text),
                    raw_text: text,
                    retweeted_user_id: Some(target.id.clone()),
                    retweet_count: 0,
                });
                vectors.push(v);
            }
        }
    }

    let mut embeddings = VectorTable::new(dim);
    for (t, v) in tweets.iter().zip(&vectors) {
        let row: Vec<f32> = v.iter().map(|&x| x as f32).collect();
        embeddings.push(t.id.clone(), &row)?;
    }
    let mut users = UserTable::new();
    let mut user_truth = BTreeMap::new();
    for (p, t) in profiles.into_iter().zip(truths) {
        user_truth.insert(p.id.clone(), t);
        users.insert(p)?;
    }
    Ok(World {
        corpus: CorpusHandle::from_tweets(tweets, users),
        embeddings,
        truth: GroundTruth {
            spec: spec.clone(),
            users: user_truth,
            tweet_events,
            adversarial,
            burst_weeks,
            vocabularies: vocab,
            background,
            stance_directions,
        },
    })
}

/// A two-community retweet multiset for graph experiments.
#[derive(Clone, Debug)]
pub struct PlantedGraph {
    pub vertices: Vec<UserId>,
    pub pairs: RetweetPairs,
    pub sides: HashMap<UserId, Side>,
}

/// Block model over `sizes[0]` X and `sizes[1]` Y vertices. Each edge is a
/// single retweet pair with multiplicity 2, so it survives a threshold of 2.
pub fn planted_sbm(sizes: [usize; 2], p_in: f64, p_out: f64, seed: u64) -> PlantedGraph {
    let mut rng = crate::rng::seeded(seed);
    let n = sizes[0] + sizes[1];
    let vertices: Vec<UserId> = (0..n).map(|i| format!("v{i:05}")).collect();
    let side = |i: usize| if i < sizes[0] { Side::X } else { Side::Y };
    let mut pairs = RetweetPairs::default();
    for a in 0..n {
        for b in a + 1..n {
            let p = if side(a) == side(b) { p_in } else { p_out };
            if rng.random_bool(p.clamp(0.0, 1.0)) {
                pairs.add(&vertices[a], &vertices[b], 2);
            }
        }
    }
    let sides = vertices.iter().enumerate().map(|(i, v)| (v.clone(), side(i))).collect();
    PlantedGraph {
        vertices,
        pairs,
        sides,
    }
}

/// Planted retweet-rate cohort.
#[derive(Clone, Debug)]
pub struct RateCohort {
    pub splits: BTreeMap<UserId, RateSplit>,
    pub polarity: BTreeMap<UserId, f64>,
    /// Users in the top polarity quartile.
    pub cohort: Vec<UserId>,
    /// Cohort members planted with a higher event median.
    pub event_higher: Vec<UserId>,
}

/// `4 * cohort` influencers with distinct polarities; exactly `higher` of
/// the `cohort` most polarized ones get a strictly higher event median.
pub fn rate_cohort(cohort: usize, higher: usize, seed: u64) -> RateCohort {
    assert!(higher <= cohort);
    let mut rng = crate::rng::seeded(seed);
    let n = 4 * cohort;
    let mut polarity: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    polarity.shuffle(&mut rng);
    let ids: Vec<UserId> = (0..n).map(|i| format!("r{i:05}")).collect();
    let mut ranked: Vec<usize> = (0..n).collect();
    ranked.sort_by(|&a, &b| polarity[b].total_cmp(&polarity[a]));
    let top: Vec<usize> = ranked[..cohort].to_vec();
    let mut order = top.clone();
    order.shuffle(&mut rng);
    let winners: BTreeSet<usize> = order[..higher].iter().copied().collect();
    let mut splits = BTreeMap::new();
    for i in 0..n {
        let base = rng.random_range(5..50u64);
        let other: Vec<u64> = (0..rng.random_range(3..8))
            .map(|_| base + rng.random_range(0..3))
            .collect();
        let mut sorted = other.clone();
        sorted.sort();
        let hi = *sorted.last().unwrap();
        let lo = sorted[0];
        let event: Vec<u64> = if winners.contains(&i) || (!top.contains(&i) && rng.random_bool(0.5)) {
            (0..rng.random_range(3..8)).map(|_| hi + 1 + rng.random_range(0..20)).collect()
        } else {
            (0..rng.random_range(3..8)).map(|_| lo.saturating_sub(rng.random_range(0..3))).collect()
        };
        splits.insert(ids[i].clone(), RateSplit { event, other });
    }
    RateCohort {
        polarity: ids.iter().cloned().zip(polarity).collect(),
        cohort: top.iter().map(|&i| ids[i].clone()).collect(),
        event_higher: winners.iter().map(|&i| ids[i].clone()).collect(),
        splits,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::retweet_pairs;
    use crate::rtgraph::build_graph;

    fn small() -> WorldSpec {
        WorldSpec {
            politicians_per_party: 50,
            influencers: 100,
            ..WorldSpec::default()
        }
    }

    #[test]
    fn categories_follow_weights() {
        let c = allocate_categories(300);
        assert_eq!(c.len(), 300);
        let journalists = c.iter().filter(|&&x| x == Category::Journalist).count();
        assert_eq!(journalists, 161);
        assert!(c.contains(&Category::FanAccount));
    }

    #[test]
    fn identical_bytes_across_runs() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        generate(&small()).unwrap().write(&a).unwrap();
        generate(&small()).unwrap().write(&b).unwrap();
        for f in ["tweets.jsonl", "users.csv", "embeddings.bin", "ground_truth.json"] {
            assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
        }
    }

    #[test]
    fn authors_exist_and_truth_covers_users() {
        let w = generate(&small()).unwrap();
        for t in w.corpus.tweets() {
            assert!(w.users().contains(&t.author_id));
            assert!(w.embeddings.get(&t.id).is_some());
        }
        assert_eq!(w.truth.users.len(), w.users().len());
        assert!(!w.truth.adversarial.is_empty());
    }

    #[test]
    fn retweets_survive_ingest() {
        let w = generate(&small()).unwrap();
        let mut buf = Vec::new();
        for t in w.corpus.tweets() {
            write_tweet_jsonl(&mut buf, &Tweet { retweeted_user_id: None, ..t.clone() }).unwrap();
        }
        let back = crate::corpus::ingest_jsonl(&buf[..], w.users().clone()).unwrap();
        assert_eq!(back.tweets(), w.corpus.tweets());
    }

    #[test]
    fn zero_p_out_gives_two_components() {
        let spec = WorldSpec {
            p_out: 0.0,
            ..small()
        };
        let w = generate(&spec).unwrap();
        let event = &spec.events[0].label;
        let event_tweets = w
            .corpus
            .tweets()
            .iter()
            .filter(|t| w.truth.is_event_tweet(&t.id, event));
        let pairs = retweet_pairs(event_tweets, w.users());
        let g = build_graph(Vec::<String>::new(), &pairs, 2);
        assert_eq!(g.component_count(), 2);
    }

    #[test]
    fn invalid_specs() {
        for spec in [
            WorldSpec { background_words: 0, ..small() },
            WorldSpec { p_in: 1.5, ..small() },
            WorldSpec { events: vec![], ..small() },
        ] {
            assert!(matches!(generate(&spec), Err(Error::Datagen(_))));
        }
    }

    #[test]
    fn planted_cohort_counts() {
        let c = rate_cohort(100, 84, 1);
        assert_eq!(c.cohort.len(), 100);
        assert_eq!(c.event_higher.len(), 84);
        let r = crate::stats::retweet_rate_comparison(&c.splits, &c.polarity);
        assert_eq!(r.cohort_size, 100);
        assert_eq!(r.cohort_event_higher, 84);
    }

    #[test]
    fn sbm_sizes() {
        let g = planted_sbm([20, 30], 0.5, 0.0, 3);
        let graph = build_graph(g.vertices.clone(), &g.pairs, 2);
        assert_eq!(graph.len(), 50);
        assert!(graph.component_count() >= 2);
        assert_eq!(g.sides.values().filter(|&&s| s == Side::X).count(), 20);
    }
}
