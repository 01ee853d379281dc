//! Stance detection: users' event embeddings are projected to 2D, clustered
//! by density, and the clusters are named after the party whose politicians
//! they hold.

mod hdbscan;
mod umap;

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{Party, UserId, UserTable};
use crate::embedding::UserEmbedding;
use crate::error::{Error, Result};

pub use hdbscan::{hdbscan, NOISE};
pub use umap::{find_ab_params, umap_layout, UmapConfig};

/// Stance side: `X` is pro-INC, `Y` is pro-BJP.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    X,
    Y,
}

impl Side {
    pub fn flip(self) -> Side {
        match self {
            Side::X => Side::Y,
            Side::Y => Side::X,
        }
    }

    pub fn party(self) -> Party {
        match self {
            Side::X => Party::Inc,
            Side::Y => Party::Bjp,
        }
    }

    pub fn of_party(party: Party) -> Option<Side> {
        match party {
            Party::Inc => Some(Side::X),
            Party::Bjp => Some(Side::Y),
            Party::Other => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::X => "X",
            Side::Y => "Y",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projection2D {
    pub user_ids: Vec<UserId>,
    pub coords: Vec<[f64; 2]>,
    pub method: &'static str,
    pub n_neighbors: usize,
}

pub fn project_2d(embeddings: &[UserEmbedding], config: &UmapConfig) -> Result<Projection2D> {
    let data: Vec<Vec<f64>> = embeddings.iter().map(|e| e.vector.values().to_vec()).collect();
    let coords = umap_layout(&data, config)?;
    Ok(Projection2D {
        user_ids: embeddings.iter().map(|e| e.user_id.clone()).collect(),
        coords,
        method: "umap",
        n_neighbors: config.n_neighbors,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StanceClusters {
    pub user_ids: Vec<UserId>,
    /// Cluster id per user, `-1` for noise.
    pub assignments: Vec<i32>,
    /// Party side of each labeled cluster; unlabeled clusters are absent.
    pub labels: BTreeMap<i32, Side>,
    pub min_cluster_size: usize,
}

impl StanceClusters {
    pub fn cluster_ids(&self) -> Vec<i32> {
        let mut ids: Vec<i32> = self.assignments.iter().copied().filter(|&c| c != NOISE).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn side_at(&self, index: usize) -> Option<Side> {
        self.labels.get(&self.assignments[index]).copied()
    }

    /// User → side for every user in a labeled cluster.
    pub fn partition(&self) -> HashMap<UserId, Side> {
        self.user_ids
            .iter()
            .enumerate()
            .filter_map(|(i, u)| self.side_at(i).map(|s| (u.clone(), s)))
            .collect()
    }

    pub fn cluster_of(&self, user: &str) -> Option<i32> {
        self.user_ids
            .iter()
            .position(|u| u == user)
            .map(|i| self.assignments[i])
    }
}

pub fn cluster(points: &Projection2D, min_cluster_size: usize) -> Result<StanceClusters> {
    Ok(StanceClusters {
        user_ids: points.user_ids.clone(),
        assignments: hdbscan(&points.coords, min_cluster_size)?,
        labels: BTreeMap::new(),
        min_cluster_size,
    })
}

/// Names the cluster holding the most INC politicians `X` and the one
/// holding the most BJP politicians `Y`.
pub fn label_clusters(mut clusters: StanceClusters, users: &UserTable) -> Result<StanceClusters> {
    let mut counts: BTreeMap<i32, [usize; 2]> = BTreeMap::new();
    for (user, &c) in clusters.user_ids.iter().zip(&clusters.assignments) {
        if c == NOISE {
            continue;
        }
        match users.party_of(user) {
            Some(Party::Inc) => counts.entry(c).or_default()[0] += 1,
            Some(Party::Bjp) => counts.entry(c).or_default()[1] += 1,
            _ => {}
        }
    }
    if counts.is_empty() {
        return Err(Error::NoPoliticians);
    }
    let leader = |party: usize, name: &str| -> Result<i32> {
        let best = counts.values().map(|c| c[party]).max().unwrap_or(0);
        if best == 0 {
            return Err(Error::Unpolarized(format!("no {name} politician in any cluster")));
        }
        let top: Vec<i32> = counts
            .iter()
            .filter(|(_, c)| c[party] == best)
            .map(|(&id, _)| id)
            .collect();
        if top.len() > 1 {
            return Err(Error::Unpolarized(format!(
                "clusters {top:?} tie for the most {name} politicians"
            )));
        }
        Ok(top[0])
    };
    let x = leader(0, "INC")?;
    let y = leader(1, "BJP")?;
    if x == y {
        return Err(Error::Unpolarized(format!(
            "cluster {x} holds the most politicians of both parties"
        )));
    }
    clusters.labels = BTreeMap::from([(x, Side::X), (y, Side::Y)]);
    Ok(clusters)
}

/// Adjusted Rand index between two labelings of the same points.
pub fn adjusted_rand_index(a: &[i64], b: &[i64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let mut table: HashMap<(i64, i64), u64> = HashMap::new();
    let mut rows: HashMap<i64, u64> = HashMap::new();
    let mut cols: HashMap<i64, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let pairs = |k: u64| (k * k.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.values().map(|&k| pairs(k)).sum();
    let sum_rows: f64 = rows.values().map(|&k| pairs(k)).sum();
    let sum_cols: f64 = cols.values().map(|&k| pairs(k)).sum();
    let expected = sum_rows * sum_cols / pairs(n as u64);
    let max = (sum_rows + sum_cols) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Writes `user_id,cluster_id,party_label,x,y`.
pub fn write_cluster_csv(
    writer: impl Write,
    clusters: &StanceClusters,
    projection: &Projection2D,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["user_id", "cluster_id", "party_label", "x", "y"])?;
    for (i, user) in clusters.user_ids.iter().enumerate() {
        let label = clusters.side_at(i).map_or("", Side::as_str);
        let [x, y] = projection.coords[i];
        w.write_record([
            user.as_str(),
            &clusters.assignments[i].to_string(),
            label,
            &format!("{x:.6}"),
            &format!("{y:.6}"),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<clusters.csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Category, Role, UserProfile};

    fn users(inc: usize, bjp: usize, influencers: usize) -> UserTable {
        let mut t = UserTable::new();
        let mut add = |id: String, role| {
            t.insert(UserProfile {
                handle: id.clone(),
                id,
                role,
                followers_count: 10,
            })
            .unwrap()
        };
        for i in 0..inc {
            add(format!("inc{i}"), Role::Politician(Party::Inc));
        }
        for i in 0..bjp {
            add(format!("bjp{i}"), Role::Politician(Party::Bjp));
        }
        for i in 0..influencers {
            add(format!("inf{i}"), Role::Influencer(Category::Journalist));
        }
        t
    }

    fn clusters_of(members: &[(&str, usize, i32)]) -> StanceClusters {
        let mut ids = Vec::new();
        let mut asg = Vec::new();
        for &(prefix, count, c) in members {
            for i in 0..count {
                ids.push(format!("{prefix}{i}"));
                asg.push(c);
            }
        }
        StanceClusters {
            user_ids: ids,
            assignments: asg,
            labels: BTreeMap::new(),
            min_cluster_size: 5,
        }
    }

    #[test]
    fn majority_labels() {
        // A: 30 INC + 2 BJP, B: 1 INC + 40 BJP. Ids are offset per cluster.
        let mut c = clusters_of(&[("inc", 31, 0), ("bjp", 42, 1)]);
        c.assignments[30] = 1; // inc30 sits in B
        c.assignments[31] = 0; // bjp0, bjp1 sit in A
        c.assignments[32] = 0;
        let labeled = label_clusters(c, &users(31, 42, 0)).unwrap();
        assert_eq!(labeled.labels[&0], Side::X);
        assert_eq!(labeled.labels[&1], Side::Y);
    }

    #[test]
    fn one_mixed_cluster_is_unpolarized() {
        let c = clusters_of(&[("inc", 5, 0), ("bjp", 5, 0)]);
        assert!(matches!(label_clusters(c, &users(5, 5, 0)), Err(Error::Unpolarized(_))));
    }

    #[test]
    fn no_politicians_is_fatal() {
        let c = clusters_of(&[("inf", 8, 0)]);
        assert!(matches!(label_clusters(c, &users(0, 0, 8)), Err(Error::NoPoliticians)));
        let noise_only = clusters_of(&[("inc", 3, NOISE), ("inf", 8, 0)]);
        assert!(matches!(label_clusters(noise_only, &users(3, 0, 8)), Err(Error::NoPoliticians)));
    }

    #[test]
    fn influencers_inherit_and_noise_gets_nothing() {
        let c = clusters_of(&[("inc", 4, 0), ("bjp", 4, 1), ("inf", 3, 1)]);
        let mut c = label_clusters(c, &users(4, 4, 4)).unwrap();
        c.user_ids.push("inf3".into());
        c.assignments.push(NOISE);
        let p = c.partition();
        assert_eq!(p["inf0"], Side::Y);
        assert!(!p.contains_key("inf3"));
    }

    /// Pair-counting ARI written out directly.
    fn ari_by_pairs(a: &[i64], b: &[i64]) -> f64 {
        let n = a.len();
        let (mut both, mut only_a, mut only_b, mut total) = (0f64, 0f64, 0f64, 0f64);
        for i in 0..n {
            for j in i + 1..n {
                let sa = a[i] == a[j];
                let sb = b[i] == b[j];
                total += 1.0;
                if sa && sb {
                    both += 1.0;
                }
                if sa {
                    only_a += 1.0;
                }
                if sb {
                    only_b += 1.0;
                }
            }
        }
        let expected = only_a * only_b / total;
        (both - expected) / ((only_a + only_b) / 2.0 - expected)
    }

    #[test]
    fn ari_matches_pair_count_oracle() {
        let a = [0, 0, 0, 1, 1, 1, 2, 2, 2, 2];
        let b = [0, 0, 1, 1, 1, 2, 2, 2, 0, 2];
        assert!((adjusted_rand_index(&a, &b) - ari_by_pairs(&a, &b)).abs() < 1e-12);
        assert_eq!(adjusted_rand_index(&a, &a), 1.0);
        let relabeled: Vec<i64> = a.iter().map(|x| 10 - x).collect();
        assert!((adjusted_rand_index(&a, &relabeled) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cluster_csv_columns() {
        let c = clusters_of(&[("inc", 1, 0), ("bjp", 1, NOISE)]);
        let c = StanceClusters {
            labels: BTreeMap::from([(0, Side::X)]),
            ..c
        };
        let p = Projection2D {
            user_ids: c.user_ids.clone(),
            coords: vec![[1.0, 2.0], [3.0, 4.0]],
            method: "umap",
            n_neighbors: 15,
        };
        let mut out = Vec::new();
        write_cluster_csv(&mut out, &c, &p).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "user_id,cluster_id,party_label,x,y\ninc0,0,X,1.000000,2.000000\nbjp0,-1,,3.000000,4.000000\n"
        );
    }
}
