use std::path::Path;

use chrono::NaiveDate;
use infpolar_core::datagen::{generate, WorldSpec};
use infpolar_core::pipeline::{run, PipelineConfig, EVENT_ARTIFACTS};
use infpolar_core::report::{iso_week_label, timeline};
use infpolar_core::Party;

fn small_world(dir: &Path) -> WorldSpec {
    let spec = WorldSpec {
        seed: 3,
        politicians_per_party: 40,
        influencers: 120,
        ..WorldSpec::default()
    };
    generate(&spec).unwrap().write(dir).unwrap();
    std::fs::write(dir.join("pipeline.toml"), spec.pipeline_toml()).unwrap();
    spec
}

fn config(dir: &Path, overrides: &[&str]) -> PipelineConfig {
    let text = std::fs::read_to_string(dir.join("pipeline.toml")).unwrap();
    let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    PipelineConfig::from_toml(&text, &overrides, dir).unwrap()
}

#[test]
fn bundle_holds_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = small_world(tmp.path());
    let out = run(&config(tmp.path(), &["min_cluster_size=10"])).unwrap();
    let root = tmp.path().join("out");
    for event in &spec.events {
        for file in EVENT_ARTIFACTS {
            let p = root.join("events").join(event.label.as_str()).join(file);
            assert!(p.metadata().map(|m| m.len() > 0).unwrap_or(false), "{} missing", p.display());
        }
        assert!(root.join("lexicons").join(format!("{}.json", event.label)).is_file());
    }
    for file in ["summary.json", "table1.csv", "timeline_BJP.csv", "timeline_INC.csv", "word_vectors.bin"] {
        assert!(root.join(file).is_file(), "{file} missing");
    }
    for f in &out.summary.files {
        assert!(root.join(f).is_file(), "{f} listed but absent");
    }
    assert_eq!(out.summary.files.len(), 2 * (EVENT_ARTIFACTS.len() + 1) + 5);

    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(root.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(summary["events"].as_object().unwrap().len(), 2);
}

#[test]
fn scores_csv_covers_scored_users() {
    let tmp = tempfile::tempdir().unwrap();
    small_world(tmp.path());
    let out = run(&config(tmp.path(), &["min_cluster_size=10", "hitting_method=\"monte-carlo\"", "walks_per_vertex=200"])).unwrap();
    for (event, res) in &out.events {
        let path = tmp.path().join("out/events").join(event.as_str()).join("scores.csv");
        let mut rdr = csv::Reader::from_path(path).unwrap();
        let mut scored = 0;
        for row in rdr.records() {
            let row = row.unwrap();
            assert_eq!(&row[1], event.as_str());
            assert_eq!(&row[5], "monte-carlo");
            if !row[2].is_empty() {
                scored += 1;
                let r: f64 = row[2].parse().unwrap();
                assert!((-1.0..=1.0).contains(&r));
            }
        }
        assert_eq!(scored, res.retweet_scores.len());
    }
}

#[test]
fn timeline_peaks_in_planted_burst_week() {
    let spec = WorldSpec::default();
    let world = generate(&spec).unwrap();
    for party in [Party::Bjp, Party::Inc] {
        let t = timeline(&world.corpus, party);
        for event in &spec.events {
            let week = |d: &str| iso_week_label(NaiveDate::parse_from_str(d, "%Y-%m-%d").unwrap());
            let (lo, hi) = (week(&event.start), week(&event.end));
            let in_window: Vec<(usize, &String)> =
                t.weeks.iter().enumerate().filter(|(_, w)| **w >= lo && **w <= hi).collect();
            let &(peak, _) = in_window.iter().max_by_key(|(i, _)| (t.all()[*i], std::cmp::Reverse(*i))).unwrap();
            assert_eq!(t.weeks[peak], world.truth.burst_weeks[&event.label], "{party:?} {}", event.label);
        }
    }
}

#[test]
fn missing_tweet_path_fails_before_any_work() {
    let tmp = tempfile::tempdir().unwrap();
    small_world(tmp.path());
    let mut c = config(tmp.path(), &[]);
    c.tweets = None;
    c.output_dir = tmp.path().join("never");
    let err = run(&c).unwrap_err();
    assert!(err.is_validation());
    assert!(!c.output_dir.exists());
}

#[test]
fn nonexistent_input_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    small_world(tmp.path());
    let c = config(tmp.path(), &["users=\"nope.csv\""]);
    assert!(c.validate().unwrap_err().is_validation());
}
