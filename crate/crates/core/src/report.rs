//! Output files: atomic writes, timelines, retweet histograms and minimal
//! SVG figures.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use serde::Serialize;

use crate::content::ProminenceTable;
use crate::corpus::{CorpusHandle, Party, UserId};
use crate::error::{Error, Result};
use crate::stance::{Projection2D, Side, StanceClusters, NOISE};
use crate::stats::CategoryMedians;

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed write leaves no partial file behind.
pub fn write_atomic(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        f(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_bytes_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, |w| w.write_all(bytes).map_err(|e| Error::io(path, e)))
}

pub fn iso_week_label(d: NaiveDate) -> String {
    d.format("%G-W%V").to_string()
}

fn monday_of(d: NaiveDate) -> NaiveDate {
    d - Duration::days(d.weekday().num_days_from_monday() as i64)
}

/// Weekly counts of influencer retweets of one party's politicians, for
/// all influencers and per category.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Timeline {
    pub party: Party,
    pub weeks: Vec<String>,
    /// Cohort name to counts aligned with `weeks`. `all` covers every
    /// influencer; other keys are category names.
    pub series: BTreeMap<String, Vec<u64>>,
}

impl Timeline {
    pub fn all(&self) -> &[u64] {
        self.series.get("all").map_or(&[], Vec::as_slice)
    }

    /// Week with the largest `all` count; the earliest on ties.
    pub fn peak_week(&self) -> Option<&str> {
        let all = self.all();
        let max = *all.iter().max()?;
        let i = all.iter().position(|&c| c == max)?;
        Some(&self.weeks[i])
    }
}

pub fn timeline(corpus: &CorpusHandle, party: Party) -> Timeline {
    let mut out = Timeline {
        party,
        weeks: Vec::new(),
        series: BTreeMap::new(),
    };
    let Some((lo, hi)) = corpus.time_span() else {
        return out;
    };
    let first = monday_of(lo.date_naive());
    let last = monday_of(hi.date_naive());
    let n = ((last - first).num_days() / 7 + 1) as usize;
    out.weeks = (0..n)
        .map(|i| iso_week_label(first + Duration::days(7 * i as i64)))
        .collect();
    out.series.insert("all".into(), vec![0; n]);
    let users = corpus.users();
    for t in corpus.tweets() {
        let Some(target) = &t.retweeted_user_id else {
            continue;
        };
        if users.party_of(target) != Some(party) {
            continue;
        }
        let Some(category) = users.category_of(&t.author_id) else {
            continue;
        };
        let week = ((monday_of(t.created_at.date_naive()) - first).num_days() / 7) as usize;
        out.series.get_mut("all").unwrap()[week] += 1;
        out.series
            .entry(category.as_str().to_string())
            .or_insert_with(|| vec![0; n])[week] += 1;
    }
    out
}

/// `week,all,<category>...`.
pub fn write_timeline_csv(writer: impl Write, t: &Timeline) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let cohorts: Vec<&String> = std::iter::once(&"all".to_string())
        .filter_map(|a| t.series.get_key_value(a).map(|(k, _)| k))
        .chain(t.series.keys().filter(|k| k.as_str() != "all"))
        .collect();
    let mut header = vec!["week"];
    header.extend(cohorts.iter().map(|c| c.as_str()));
    w.write_record(&header)?;
    for (i, week) in t.weeks.iter().enumerate() {
        let mut row = vec![week.clone()];
        row.extend(cohorts.iter().map(|c| t.series[*c][i].to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("timeline.csv", e))?;
    Ok(())
}

/// Retweets of `party` politicians made by each influencer.
pub fn retweet_totals(corpus: &CorpusHandle, party: Party) -> BTreeMap<UserId, u64> {
    let users = corpus.users();
    let mut totals = BTreeMap::new();
    for t in corpus.tweets() {
        if let Some(target) = &t.retweeted_user_id {
            if users.party_of(target) == Some(party)
                && users.get(&t.author_id).is_some_and(|u| u.role.is_influencer())
            {
                *totals.entry(t.author_id.clone()).or_insert(0) += 1;
            }
        }
    }
    totals
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RetweetHistogram {
    /// `[1,50]`, `(50,100]`, `(100,150]`, `(150,max]`.
    pub buckets: [usize; 4],
    pub max: u64,
}

pub fn histogram_buckets(totals: impl IntoIterator<Item = u64>) -> RetweetHistogram {
    let mut h = RetweetHistogram::default();
    for t in totals {
        if t == 0 {
            continue;
        }
        let b = match t {
            1..=50 => 0,
            51..=100 => 1,
            101..=150 => 2,
            _ => 3,
        };
        h.buckets[b] += 1;
        h.max = h.max.max(t);
    }
    h
}

/// `party,[1-50],(50-100],(100-150],(150-max],max`.
pub fn write_histogram_csv(writer: impl Write, rows: &[(Party, RetweetHistogram)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["party", "1-50", "51-100", "101-150", "151-max", "max"])?;
    for (p, h) in rows {
        w.write_record([
            p.as_str().to_string(),
            h.buckets[0].to_string(),
            h.buckets[1].to_string(),
            h.buckets[2].to_string(),
            h.buckets[3].to_string(),
            h.max.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("table1.csv", e))?;
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn side_color(side: Option<Side>) -> &'static str {
    match side {
        Some(Side::X) => "#1f77b4",
        Some(Side::Y) => "#ff7f0e",
        None => "#999999",
    }
}

/// Scatter of the 2D projection colored by cluster side.
pub fn scatter_svg(projection: &Projection2D, clusters: &StanceClusters) -> String {
    let (w, h, pad) = (600.0, 600.0, 20.0);
    let xs = projection.coords.iter().map(|c| c[0]);
    let ys = projection.coords.iter().map(|c| c[1]);
    let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (y0, y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    let sx = (w - 2.0 * pad) / (x1 - x0).max(1e-9);
    let sy = (h - 2.0 * pad) / (y1 - y0).max(1e-9);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    );
    for (i, c) in projection.coords.iter().enumerate() {
        let noise = clusters.assignments[i] == NOISE;
        let _ = writeln!(
            s,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{}\" fill=\"{}\"><title>{}</title></circle>",
            pad + (c[0] - x0) * sx,
            h - pad - (c[1] - y0) * sy,
            if noise { 1.5 } else { 3.0 },
            side_color(clusters.side_at(i)),
            escape(&projection.user_ids[i])
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Two ranked term lists, bar length proportional to |score|.
pub fn prominence_svg(table: &ProminenceTable) -> String {
    let row_h = 18.0;
    let rows = table.top_a.len().max(table.top_b.len());
    let height = 30.0 + row_h * rows as f64;
    let max = table
        .rows
        .iter()
        .map(|r| r.score.abs())
        .fold(0.0, f64::max)
        .max(1e-9);
    let score = |t: &str| table.rows.iter().find(|r| r.term == t).map_or(0.0, |r| r.score);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"{height}\">\n\
         <text x=\"10\" y=\"18\">X</text><text x=\"410\" y=\"18\">Y</text>\n"
    );
    for (col, terms, sign) in [(0.0, &table.top_a, 1.0), (400.0, &table.top_b, -1.0)] {
        for (i, t) in terms.iter().enumerate() {
            let y = 30.0 + row_h * i as f64;
            let len = 200.0 * sign * score(t) / max;
            let _ = writeln!(
                s,
                "<rect x=\"{}\" y=\"{y}\" width=\"{len:.2}\" height=\"{}\" fill=\"{}\"/>\
                 <text x=\"{}\" y=\"{}\" font-size=\"12\">{}</text>",
                col + 10.0,
                row_h - 4.0,
                if sign > 0.0 { side_color(Some(Side::X)) } else { side_color(Some(Side::Y)) },
                col + 220.0,
                y + 11.0,
                escape(t)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Stem per category: stem length is the median retweet polarity, bubble
/// area the median retweet count.
pub fn stem_svg(medians: &CategoryMedians) -> String {
    let n = medians.rows.len().max(1);
    let (w, h) = (60.0 * n as f64 + 40.0, 400.0);
    let mid = h / 2.0;
    let max_rt = medians
        .rows
        .iter()
        .filter_map(|r| r.median_retweets)
        .fold(0.0, f64::max)
        .max(1.0);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n\
         <line x1=\"0\" y1=\"{mid}\" x2=\"{w}\" y2=\"{mid}\" stroke=\"#000\"/>\n"
    );
    for (i, r) in medians.rows.iter().enumerate() {
        let x = 40.0 + 60.0 * i as f64;
        let y = mid - r.median_r * (mid - 30.0);
        let radius = 3.0 + 12.0 * (r.median_retweets.unwrap_or(0.0) / max_rt).sqrt();
        let _ = writeln!(
            s,
            "<line x1=\"{x}\" y1=\"{mid}\" x2=\"{x}\" y2=\"{y:.2}\" stroke=\"#555\"/>\
             <circle cx=\"{x}\" cy=\"{y:.2}\" r=\"{radius:.2}\" fill=\"#6a3d9a\"/>\
             <text x=\"{x}\" y=\"{}\" font-size=\"9\" text-anchor=\"middle\">{}</text>",
            h - 5.0,
            escape(r.category.as_str())
        );
    }
    s.push_str("</svg>\n");
    s
}

/// `category,median_r,median_abs_c,median_retweets,n`.
pub fn write_category_csv(writer: impl Write, medians: &CategoryMedians) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["category", "median_r", "median_abs_c", "median_retweets", "n"])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.10}"));
    for r in &medians.rows {
        w.write_record([
            r.category.as_str().to_string(),
            format!("{:.10}", r.median_r),
            opt(r.median_abs_c),
            opt(r.median_retweets),
            r.n.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("categories.csv", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_timestamp, Category, Role, Tweet, UserProfile, UserTable};

    fn users() -> UserTable {
        let mut t = UserTable::new();
        for (id, role) in [
            ("b1", Role::Politician(Party::Bjp)),
            ("i1", Role::Politician(Party::Inc)),
            ("j", Role::Influencer(Category::Journalist)),
            ("s", Role::Influencer(Category::Sports)),
        ] {
            t.insert(UserProfile {
                id: id.into(),
                handle: id.into(),
                role,
                followers_count: 1,
            })
            .unwrap();
        }
        t
    }

    fn rt(id: &str, author: &str, target: &str, when: &str) -> Tweet {
        Tweet {
            id: id.into(),
            author_id: author.into(),
            created_at: parse_timestamp(when).unwrap(),
            raw_text: String::new(),
            retweeted_user_id: Some(target.into()),
            retweet_count: 0,
            clean_text: String::new(),
        }
    }

    #[test]
    fn weekly_counts() {
        let c = CorpusHandle::from_tweets(
            vec![
                rt("1", "j", "b1", "2020-12-07T10:00:00Z"),
                rt("2", "s", "b1", "2020-12-09T10:00:00Z"),
                rt("3", "j", "b1", "2020-12-13T23:59:59Z"),
                rt("4", "j", "i1", "2020-12-20T10:00:00Z"),
                rt("5", "b1", "i1", "2020-12-21T10:00:00Z"),
            ],
            users(),
        );
        let t = timeline(&c, Party::Bjp);
        assert_eq!(t.weeks, vec!["2020-W50", "2020-W51", "2020-W52"]);
        assert_eq!(t.all(), &[3, 0, 0]);
        assert_eq!(t.series["Journalist"], vec![2, 0, 0]);
        assert_eq!(t.peak_week(), Some("2020-W50"));
        let inc = timeline(&c, Party::Inc);
        assert_eq!(inc.all(), &[0, 1, 0]);
        let mut buf = Vec::new();
        write_timeline_csv(&mut buf, &t).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("week,all,Journalist,Sports\n2020-W50,3,2,1\n"));
    }

    #[test]
    fn empty_corpus_has_empty_timeline() {
        let t = timeline(&CorpusHandle::from_tweets(vec![], users()), Party::Bjp);
        assert!(t.weeks.is_empty() && t.peak_week().is_none());
    }

    #[test]
    fn buckets_are_right_closed() {
        let h = histogram_buckets([50, 51]);
        assert_eq!(h.buckets, [1, 1, 0, 0]);
        assert_eq!(histogram_buckets([]), RetweetHistogram::default());
        let h = histogram_buckets([1, 7, 100, 101, 150, 151, 999, 0]);
        assert_eq!(h.buckets, [2, 1, 2, 2]);
        assert_eq!(h.max, 999);
    }

    #[test]
    fn totals_count_influencers_only() {
        let c = CorpusHandle::from_tweets(
            vec![
                rt("1", "j", "b1", "2020-12-07T10:00:00Z"),
                rt("2", "j", "b1", "2020-12-08T10:00:00Z"),
                rt("3", "i1", "b1", "2020-12-08T10:00:00Z"),
            ],
            users(),
        );
        let t = retweet_totals(&c, Party::Bjp);
        assert_eq!(t.len(), 1);
        assert_eq!(t["j"], 2);
    }

    #[test]
    fn atomic_write_replaces_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.txt");
        write_bytes_atomic(&p, b"first").unwrap();
        let failed = write_atomic(&p, |w| {
            w.write_all(b"partial").unwrap();
            Err(Error::Config("boom".into()))
        });
        assert!(failed.is_err());
        assert_eq!(std::fs::read(&p).unwrap(), b"first");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
