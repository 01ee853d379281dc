//! Event lexicons: seed keywords expanded through word-vector similarity,
//! and keyword-match classification of tweets into events.

mod sgns;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::EventLabel;
use crate::error::{Error, Result};

pub use sgns::{train_word_vectors, SgnsConfig, WordVectors};

/// How a candidate token's similarity to the current keyword set is scored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimilarityRule {
    /// Mean cosine similarity to every keyword in the set.
    #[default]
    MeanToSet,
    /// Highest cosine similarity to any keyword in the set.
    MaxToAny,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionConfig {
    pub tau_add: f64,
    pub max_rounds: usize,
    pub rule: SimilarityRule,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        ExpansionConfig {
            tau_add: 0.7,
            max_rounds: 5,
            rule: SimilarityRule::MeanToSet,
        }
    }
}

/// Seed and expanded keywords of one event. `expanded` maps each admitted
/// token to the similarity that admitted it; seeds are not repeated there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventLexicon {
    pub event: EventLabel,
    pub seeds: BTreeSet<String>,
    pub expanded: BTreeMap<String, f64>,
    pub tau_add: f64,
    pub rounds_run: usize,
}

impl EventLexicon {
    pub fn seeds_only(event: EventLabel, seeds: impl IntoIterator<Item = String>) -> Self {
        EventLexicon {
            event,
            seeds: seeds.into_iter().collect(),
            expanded: BTreeMap::new(),
            tau_add: 1.0,
            rounds_run: 0,
        }
    }

    /// Seeds followed by expanded tokens.
    pub fn keywords(&self) -> impl Iterator<Item = &str> {
        self.seeds
            .iter()
            .chain(self.expanded.keys())
            .map(String::as_str)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.seeds.contains(token) || self.expanded.contains_key(token)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_vec_pretty(self)?;
        crate::report::write_bytes_atomic(path.as_ref(), &json)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

/// Grows `seeds` round by round. Each round scores every vocabulary token
/// outside the current set and outside `exclusion` against the set as it
/// stood at the start of the round, and admits every token scoring at least
/// `tau_add`. Stops after `max_rounds` or the first round admitting nothing.
pub fn expand_keywords(
    event: EventLabel,
    seeds: &BTreeSet<String>,
    vectors: &WordVectors,
    config: &ExpansionConfig,
    exclusion: &BTreeSet<String>,
) -> Result<EventLexicon> {
    if !(config.tau_add > 0.0 && config.tau_add <= 1.0) {
        return Err(Error::Lexicon(format!(
            "tau_add must lie in (0, 1], got {}",
            config.tau_add
        )));
    }
    let present: Vec<usize> = seeds.iter().filter_map(|s| vectors.index_of(s)).collect();
    if present.is_empty() {
        return Err(Error::SeedsNotInVocabulary(seeds.iter().cloned().collect()));
    }

    let v = vectors.len();
    let dim = vectors.dimension();
    let normalized: Vec<f32> = (0..v)
        .flat_map(|i| {
            let row = vectors.row(i);
            let norm = row.iter().map(|x| x * x).sum::<f32>().sqrt();
            row.iter()
                .map(move |x| if norm > 0.0 { x / norm } else { 0.0 })
        })
        .collect();
    let cos = |a: usize, b: usize| -> f64 {
        let (ra, rb) = (&normalized[a * dim..][..dim], &normalized[b * dim..][..dim]);
        (ra.iter().zip(rb).map(|(x, y)| (x * y) as f64).sum::<f64>()).clamp(-1.0, 1.0)
    };

    let mut in_set = vec![false; v];
    let mut blocked = vec![false; v];
    for (i, token) in vectors.vocab().iter().enumerate() {
        blocked[i] = exclusion.contains(token) || seeds.contains(token);
    }
    // Running sum (mean rule) or max (max rule) of similarity to the set.
    let mut score = vec![
        match config.rule {
            SimilarityRule::MeanToSet => 0.0,
            SimilarityRule::MaxToAny => f64::NEG_INFINITY,
        };
        v
    ];
    let mut set_size = 0usize;
    let absorb = |members: &[usize], in_set: &mut [bool], score: &mut [f64]| {
        for &m in members {
            in_set[m] = true;
        }
        for c in 0..v {
            if in_set[c] || blocked[c] {
                continue;
            }
            for &m in members {
                let s = cos(c, m);
                match config.rule {
                    SimilarityRule::MeanToSet => score[c] += s,
                    SimilarityRule::MaxToAny => score[c] = score[c].max(s),
                }
            }
        }
    };
    absorb(&present, &mut in_set, &mut score);
    set_size += present.len();

    let mut expanded = BTreeMap::new();
    let mut rounds_run = 0;
    while rounds_run < config.max_rounds {
        rounds_run += 1;
        let admitted: Vec<(usize, f64)> = (0..v)
            .filter(|&c| !in_set[c] && !blocked[c])
            .filter_map(|c| {
                let s = match config.rule {
                    SimilarityRule::MeanToSet => score[c] / set_size as f64,
                    SimilarityRule::MaxToAny => score[c],
                };
                (s >= config.tau_add).then_some((c, s))
            })
            .collect();
        if admitted.is_empty() {
            break;
        }
        let members: Vec<usize> = admitted.iter().map(|&(c, _)| c).collect();
        for &(c, s) in &admitted {
            expanded.insert(vectors.vocab()[c].clone(), s);
        }
        absorb(&members, &mut in_set, &mut score);
        set_size += members.len();
    }

    Ok(EventLexicon {
        event,
        seeds: seeds.clone(),
        expanded,
        tau_add: config.tau_add,
        rounds_run,
    })
}

/// Whole-token keyword matcher over several event lexicons.
#[derive(Clone, Debug)]
pub struct Classifier {
    events: Vec<EventLabel>,
    keywords: HashMap<String, Vec<usize>>,
}

impl Classifier {
    pub fn new(lexicons: &[EventLexicon]) -> Self {
        let mut keywords: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, lex) in lexicons.iter().enumerate() {
            for k in lex.keywords() {
                let slot = keywords.entry(k.to_string()).or_default();
                if !slot.contains(&i) {
                    slot.push(i);
                }
            }
        }
        Classifier {
            events: lexicons.iter().map(|l| l.event.clone()).collect(),
            keywords,
        }
    }

    pub fn events(&self) -> &[EventLabel] {
        &self.events
    }

    /// Every event with at least one keyword among the tweet's tokens.
    pub fn classify(&self, clean_text: &str) -> BTreeSet<EventLabel> {
        let mut hit = vec![false; self.events.len()];
        for token in clean_text.split_whitespace() {
            if let Some(events) = self.keywords.get(token) {
                for &e in events {
                    hit[e] = true;
                }
            }
        }
        hit.iter()
            .zip(&self.events)
            .filter(|(h, _)| **h)
            .map(|(_, e)| e.clone())
            .collect()
    }
}

pub fn classify_tweet(clean_text: &str, lexicons: &[EventLexicon]) -> BTreeSet<EventLabel> {
    Classifier::new(lexicons).classify(clean_text)
}

/// One annotated classifier decision.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledDecision {
    pub event: EventLabel,
    /// The classifier assigned the tweet to `event`.
    pub predicted: bool,
    /// A human judged the tweet to be about `event`.
    pub relevant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrecisionReport {
    /// `None` when the classifier made no positive decision for the event.
    pub per_event: BTreeMap<EventLabel, Option<f64>>,
    /// Mean of the defined per-event precisions.
    pub macro_precision: Option<f64>,
    /// Pooled true positives over pooled positives.
    pub combined_precision: Option<f64>,
}

pub fn evaluate_precision(sample: &[LabeledDecision]) -> PrecisionReport {
    let mut tally: BTreeMap<EventLabel, (usize, usize)> = BTreeMap::new();
    for row in sample {
        let entry = tally.entry(row.event.clone()).or_default();
        if row.predicted {
            entry.1 += 1;
            if row.relevant {
                entry.0 += 1;
            }
        }
    }
    let per_event: BTreeMap<_, _> = tally
        .iter()
        .map(|(e, &(tp, pos))| (e.clone(), (pos > 0).then(|| tp as f64 / pos as f64)))
        .collect();
    let defined: Vec<f64> = per_event.values().flatten().copied().collect();
    let macro_precision =
        (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    let (tp, pos) = tally
        .values()
        .fold((0, 0), |(a, b), &(tp, pos)| (a + tp, b + pos));
    PrecisionReport {
        per_event,
        macro_precision,
        combined_precision: (pos > 0).then(|| tp as f64 / pos as f64),
    }
}

/// High-precision seed keywords for the four built-in events.
pub fn default_seeds(event: &str) -> Option<&'static [&'static str]> {
    match event {
        EventLabel::ARTICLE_370 => Some(&["#jammuandkashmir", "#article370", "35a", "abrogation", "kashmiri"]),
        EventLabel::CAA_NRC => Some(&[
            "#caanrc",
            "#caanrcnpr",
            "#anticaa",
            "#caanrcprotest",
            "#citizenshipamendmentact",
        ]),
        EventLabel::COVID19 => Some(&[
            "covid2019",
            "coronavirus",
            "#covidpandemic",
            "#coronapandemic",
            "#coronacrisis",
        ]),
        EventLabel::FARMERS_PROTEST => Some(&[
            "#farmersprotests",
            "#farmersagitation",
            "#delhichalo",
            "#farmersdelhiprotest",
        ]),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vectors::VectorTable;
    use proptest::prelude::*;

    fn table3() -> Vec<EventLexicon> {
        let lex = |e: &str, seeds: &[&str]| {
            EventLexicon::seeds_only(EventLabel::new(e), seeds.iter().map(|s| s.to_string()))
        };
        vec![
            lex("Article370", &["#jammuandkashmir", "#article370", "35a", "abrogation", "kashmiri"]),
            lex("CAA_NRC", &["#caanrc", "#caanrcnpr", "#anticaa", "#caanrcprotest", "#citizenshipamendmentact"]),
            lex("COVID19", &["covid2019", "coronavirus", "#covidpandemic", "#coronapandemic", "#coronacrisis"]),
            lex("FarmersProtest", &["#farmersprotests", "#farmersagitation", "#delhichalo", "#farmersdelhiprotest"]),
        ]
    }

    fn labels(xs: &[&str]) -> BTreeSet<EventLabel> {
        xs.iter().map(|&x| EventLabel::new(x)).collect()
    }

    #[test]
    fn classifies_by_whole_token_match() {
        let l = table3();
        assert_eq!(classify_tweet("the #caanrc protest continues", &l), labels(&["CAA_NRC"]));
        assert!(classify_tweet("good morning everyone", &l).is_empty());
        assert_eq!(
            classify_tweet("covid2019 lockdown and #farmersprotests", &l),
            labels(&["COVID19", "FarmersProtest"])
        );
        // substring of a keyword is not a match
        assert!(classify_tweet("#caanrcx covid", &l).is_empty());
    }

    fn decision(event: &str, predicted: bool, relevant: bool) -> LabeledDecision {
        LabeledDecision {
            event: EventLabel::new(event),
            predicted,
            relevant,
        }
    }

    #[test]
    fn precision_is_confirmed_over_positives() {
        let mut rows: Vec<_> = (0..9).map(|_| decision("A", true, true)).collect();
        rows.push(decision("A", true, false));
        let r = evaluate_precision(&rows);
        assert_eq!(r.per_event[&EventLabel::new("A")], Some(0.9));

        let all: Vec<_> = (0..5).map(|_| decision("A", true, true)).collect();
        assert_eq!(evaluate_precision(&all).macro_precision, Some(1.0));
    }

    #[test]
    fn precision_on_hand_labeled_fixture() {
        // 20 rows: A has 8 positives with 2 false, B has 9 positives with 1
        // false, plus 3 negatives that must not count.
        let mut rows = Vec::new();
        rows.extend((0..6).map(|_| decision("A", true, true)));
        rows.extend((0..2).map(|_| decision("A", true, false)));
        rows.extend((0..8).map(|_| decision("B", true, true)));
        rows.push(decision("B", true, false));
        rows.extend((0..3).map(|_| decision("B", false, true)));
        assert_eq!(rows.len(), 20);
        let r = evaluate_precision(&rows);
        assert_eq!(r.per_event[&EventLabel::new("A")], Some(6.0 / 8.0));
        assert_eq!(r.per_event[&EventLabel::new("B")], Some(8.0 / 9.0));
        let m = r.macro_precision.unwrap();
        assert!((m - (0.75 + 8.0 / 9.0) / 2.0).abs() < 1e-15);
        assert_eq!(r.combined_precision, Some(14.0 / 17.0));
    }

    #[test]
    fn zero_positives_is_undefined() {
        let r = evaluate_precision(&[decision("A", false, true)]);
        assert_eq!(r.per_event[&EventLabel::new("A")], None);
        assert_eq!(r.macro_precision, None);
    }

    fn toy_vectors() -> WordVectors {
        let mut t = VectorTable::new(2);
        let rows: [(&str, [f32; 2]); 5] = [
            ("seed", [1.0, 0.0]),
            ("near", [0.95, 0.3]),
            ("mid", [0.6, 0.8]),
            ("far", [0.0, 1.0]),
            ("other", [0.99, -0.1]),
        ];
        for (k, v) in rows {
            t.push(k, &v).unwrap();
        }
        WordVectors::from_table(&t)
    }

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn expansion_respects_thresholds_and_exclusion() {
        let wv = toy_vectors();
        let cfg = ExpansionConfig { tau_add: 0.9, max_rounds: 5, rule: SimilarityRule::MeanToSet };
        let lex = expand_keywords("E".into(), &set(&["seed"]), &wv, &cfg, &set(&["other"])).unwrap();
        assert!(lex.expanded.contains_key("near"));
        assert!(!lex.expanded.contains_key("other"));
        assert!(!lex.expanded.contains_key("far"));
        assert!(lex.expanded.values().all(|&s| s >= 0.9));

        let one = ExpansionConfig { tau_add: 1.0, ..cfg.clone() };
        let lex = expand_keywords("E".into(), &set(&["seed"]), &wv, &one, &BTreeSet::new()).unwrap();
        assert!(lex.expanded.is_empty());

        let zero = ExpansionConfig { max_rounds: 0, ..cfg };
        let lex = expand_keywords("E".into(), &set(&["seed"]), &wv, &zero, &BTreeSet::new()).unwrap();
        assert!(lex.expanded.is_empty());
        assert_eq!(lex.rounds_run, 0);
    }

    #[test]
    fn missing_seeds_are_listed() {
        let err = expand_keywords(
            "E".into(),
            &set(&["nope", "nada"]),
            &toy_vectors(),
            &ExpansionConfig::default(),
            &BTreeSet::new(),
        )
        .unwrap_err();
        match err {
            Error::SeedsNotInVocabulary(missing) => assert_eq!(missing, ["nada", "nope"]),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn lexicon_json_has_documented_keys() {
        let lex = table3().remove(1);
        let v: serde_json::Value = serde_json::to_value(&lex).unwrap();
        for k in ["event", "seeds", "expanded", "tau_add", "rounds_run"] {
            assert!(v.get(k).is_some(), "missing {k}");
        }
    }

    fn arb_vectors() -> impl Strategy<Value = WordVectors> {
        proptest::collection::vec(proptest::collection::vec(-1.0f32..1.0, 4), 6..30).prop_map(
            |rows| {
                let mut t = VectorTable::new(4);
                for (i, r) in rows.iter().enumerate() {
                    t.push(format!("w{i}"), r).unwrap();
                }
                WordVectors::from_table(&t)
            },
        )
    }

    proptest! {
        #[test]
        fn rounds_only_add(wv in arb_vectors(), tau in 0.2f64..0.95, rounds in 0usize..4,
                           rule in prop_oneof![Just(SimilarityRule::MeanToSet), Just(SimilarityRule::MaxToAny)]) {
            let seeds = set(&["w0"]);
            let run = |r| expand_keywords("E".into(), &seeds, &wv,
                &ExpansionConfig { tau_add: tau, max_rounds: r, rule }, &BTreeSet::new()).unwrap();
            let (a, b) = (run(rounds), run(rounds + 1));
            prop_assert!(a.expanded.iter().all(|(k, s)| b.expanded.get(k) == Some(s)));
            prop_assert!(b.expanded.values().all(|&s| s >= tau));
        }

        #[test]
        fn max_rule_is_monotone_in_threshold(wv in arb_vectors(), hi in 0.3f64..0.95, gap in 0.0f64..0.3) {
            let seeds = set(&["w0", "w1"]);
            let run = |tau| expand_keywords("E".into(), &seeds, &wv,
                &ExpansionConfig { tau_add: tau, max_rounds: 6, rule: SimilarityRule::MaxToAny }, &BTreeSet::new()).unwrap();
            let (strict, loose) = (run(hi), run(hi - gap));
            prop_assert!(strict.expanded.keys().all(|k| loose.expanded.contains_key(k)));
        }

        #[test]
        fn classification_ignores_token_order(mut tokens in proptest::collection::vec(
            prop_oneof![Just("#caanrc"), Just("covid2019"), Just("hello"), Just("kashmiri"), Just("x")], 0..8)) {
            let l = table3();
            let a = classify_tweet(&tokens.join(" "), &l);
            tokens.reverse();
            prop_assert_eq!(a, classify_tweet(&tokens.join(" "), &l));
        }
    }
}
