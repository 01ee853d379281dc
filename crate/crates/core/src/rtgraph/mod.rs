//! Thresholded retweet graph and the hitting-time retweet polarity score.

mod hitting;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use crate::corpus::{RetweetPairs, UserId, UserTable};
use crate::error::{Error, Result};
use crate::stance::Side;

pub use hitting::{hitting_times, HittingMethod, HittingProfile, MethodUsed, WalkParams};

/// Undirected graph over users. An edge joins two users whose retweets of
/// each other, counted in both directions, reach the threshold; its weight
/// is that count.
#[derive(Clone, Debug, PartialEq)]
pub struct RetweetGraph {
    vertices: Vec<UserId>,
    index: HashMap<UserId, usize>,
    adjacency: Vec<Vec<(usize, u32)>>,
    partition: Vec<Option<Side>>,
    threshold: usize,
}

pub fn build_graph<I, S>(vertices: I, pairs: &RetweetPairs, threshold: usize) -> RetweetGraph
where
    I: IntoIterator<Item = S>,
    S: Into<UserId>,
{
    let threshold = threshold.max(1);
    let mut ids: BTreeSet<UserId> = vertices.into_iter().map(Into::into).collect();
    let mut combined: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for (a, b, n) in pairs.iter() {
        let key = if a < b { (a, b) } else { (b, a) };
        *combined.entry(key).or_default() += n;
    }
    for (a, b, _) in pairs.iter() {
        ids.insert(a.to_string());
        ids.insert(b.to_string());
    }
    let vertices: Vec<UserId> = ids.into_iter().collect();
    let index: HashMap<UserId, usize> = vertices
        .iter()
        .enumerate()
        .map(|(i, v)| (v.clone(), i))
        .collect();
    let mut adjacency = vec![Vec::new(); vertices.len()];
    for ((a, b), n) in combined {
        if n >= threshold {
            let (i, j) = (index[a], index[b]);
            let w = u32::try_from(n).unwrap_or(u32::MAX);
            adjacency[i].push((j, w));
            adjacency[j].push((i, w));
        }
    }
    for nbrs in &mut adjacency {
        nbrs.sort_unstable();
    }
    let partition = vec![None; vertices.len()];
    RetweetGraph {
        vertices,
        index,
        adjacency,
        partition,
        threshold,
    }
}

impl RetweetGraph {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn vertices(&self) -> &[UserId] {
        &self.vertices
    }

    pub fn id(&self, v: usize) -> &str {
        &self.vertices[v]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Neighbors of `v` with edge weights, sorted by neighbor index.
    pub fn neighbors(&self, v: usize) -> &[(usize, u32)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn weight(&self, a: usize, b: usize) -> Option<u32> {
        let nbrs = &self.adjacency[a];
        nbrs.binary_search_by_key(&b, |&(v, _)| v).ok().map(|i| nbrs[i].1)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(a, nbrs)| {
            nbrs.iter()
                .filter(move |&&(b, _)| a < b)
                .map(move |&(b, w)| (a, b, w))
        })
    }

    pub fn side(&self, v: usize) -> Option<Side> {
        self.partition[v]
    }

    /// Replaces the partition. Users absent from the map, or not in the
    /// graph, are left unassigned.
    pub fn set_partition(&mut self, sides: &HashMap<UserId, Side>) {
        for (v, id) in self.vertices.iter().enumerate() {
            self.partition[v] = sides.get(id).copied();
        }
    }

    pub fn with_partition(mut self, sides: &HashMap<UserId, Side>) -> Self {
        self.set_partition(sides);
        self
    }

    /// Connected component label per vertex, numbered from 0 in order of
    /// the smallest member.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.len()];
        let mut next = 0;
        for start in 0..self.len() {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adjacency[u] {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn component_count(&self) -> usize {
        self.components().into_iter().max().map_or(0, |m| m + 1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnchorSets {
    /// Vertex indices ordered by degree descending, then id.
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    pub k: usize,
    pub warnings: Vec<String>,
}

impl AnchorSets {
    pub fn get(&self, side: Side) -> &[usize] {
        match side {
            Side::X => &self.x,
            Side::Y => &self.y,
        }
    }
}

/// The `k` highest-degree vertices of each side.
pub fn select_anchors(graph: &RetweetGraph, k: usize) -> Result<AnchorSets> {
    if k == 0 {
        return Err(Error::Graph("anchor count k must be positive".into()));
    }
    let mut warnings = Vec::new();
    let mut pick = |side: Side| -> Result<Vec<usize>> {
        let mut members: Vec<usize> = (0..graph.len())
            .filter(|&v| graph.side(v) == Some(side))
            .collect();
        if members.is_empty() {
            return Err(Error::Graph(format!(
                "partition {} has no vertices",
                side.as_str()
            )));
        }
        members.sort_by(|&a, &b| {
            graph
                .degree(b)
                .cmp(&graph.degree(a))
                .then_with(|| graph.id(a).cmp(graph.id(b)))
        });
        if members.len() < k {
            warnings.push(format!(
                "partition {} has {} vertices, fewer than k={k}; all are anchors",
                side.as_str(),
                members.len()
            ));
        }
        members.truncate(k);
        Ok(members)
    };
    let x = pick(Side::X)?;
    let y = pick(Side::Y)?;
    Ok(AnchorSets { x, y, k, warnings })
}

/// Per-vertex rank fractions and their difference. `None` marks vertices
/// unreachable from either anchor set.
#[derive(Clone, Debug, PartialEq)]
pub struct RetweetPolarity {
    pub r: Vec<Option<f64>>,
    pub r_x: Vec<Option<f64>>,
    pub r_y: Vec<Option<f64>>,
}

impl RetweetPolarity {
    pub fn scored(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.r.iter().enumerate().filter_map(|(v, r)| r.map(|r| (v, r)))
    }

    pub fn scored_count(&self) -> usize {
        self.r.iter().flatten().count()
    }
}

/// Hitting times are compared after rounding to ten significant digits so
/// values equal up to solver noise tie.
fn tie_key(h: f64) -> f64 {
    if h == 0.0 {
        return 0.0;
    }
    let scale = 10f64.powi(9 - h.abs().log10().floor() as i32);
    (h * scale).round() / scale
}

/// Fraction of the population farther from the anchors than each member,
/// ties counting one half. The member itself is part of the population.
fn rank_fractions(times: &[f64], population: &[usize]) -> Vec<f64> {
    let mut keys: Vec<f64> = population.iter().map(|&v| tie_key(times[v])).collect();
    keys.sort_by(f64::total_cmp);
    let n = keys.len() as f64;
    population
        .iter()
        .map(|&v| {
            let k = tie_key(times[v]);
            let lo = keys.partition_point(|&x| x < k);
            let hi = keys.partition_point(|&x| x <= k);
            let greater = keys.len() - hi;
            (greater as f64 + 0.5 * (hi - lo) as f64) / n
        })
        .collect()
}

pub fn retweet_polarity(
    graph: &RetweetGraph,
    l_x: &HittingProfile,
    l_y: &HittingProfile,
) -> Result<RetweetPolarity> {
    if l_x.times.len() != graph.len() || l_y.times.len() != graph.len() {
        return Err(Error::Graph("hitting profile does not match the graph".into()));
    }
    let population: Vec<usize> = (0..graph.len())
        .filter(|&v| l_x.is_reachable(v) && l_y.is_reachable(v))
        .collect();
    if population.len() < 2 {
        return Err(Error::Graph(format!(
            "{} scoreable vertices, need at least 2",
            population.len()
        )));
    }
    let fx = rank_fractions(&l_x.times, &population);
    let fy = rank_fractions(&l_y.times, &population);
    let mut out = RetweetPolarity {
        r: vec![None; graph.len()],
        r_x: vec![None; graph.len()],
        r_y: vec![None; graph.len()],
    };
    for (i, &v) in population.iter().enumerate() {
        out.r_x[v] = Some(fx[i]);
        out.r_y[v] = Some(fy[i]);
        out.r[v] = Some(fx[i] - fy[i]);
    }
    Ok(out)
}

/// Everything computed for one event's graph.
#[derive(Clone, Debug)]
pub struct GraphScores {
    pub anchors: AnchorSets,
    pub l_x: HittingProfile,
    pub l_y: HittingProfile,
    pub polarity: RetweetPolarity,
}

impl GraphScores {
    pub fn by_user(&self, graph: &RetweetGraph) -> BTreeMap<UserId, f64> {
        self.polarity
            .scored()
            .map(|(v, r)| (graph.id(v).to_string(), r))
            .collect()
    }
}

pub fn score_graph(
    graph: &RetweetGraph,
    k: usize,
    method: HittingMethod,
    params: &WalkParams,
) -> Result<GraphScores> {
    let anchors = select_anchors(graph, k)?;
    let l_x = hitting_times(graph, &anchors.x, method, params)?;
    let l_y = hitting_times(graph, &anchors.y, method, params)?;
    let polarity = retweet_polarity(graph, &l_x, &l_y)?;
    Ok(GraphScores {
        anchors,
        l_x,
        l_y,
        polarity,
    })
}

/// `user_id,event,r_score,l_x,l_y,method`, one row per scored vertex.
pub fn write_scores_csv(
    writer: impl Write,
    event: &str,
    graph: &RetweetGraph,
    scores: &GraphScores,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["user_id", "event", "r_score", "l_x", "l_y", "method"])?;
    for (v, r) in scores.polarity.scored() {
        w.write_record([
            graph.id(v),
            event,
            &format!("{r:.10}"),
            &format!("{:.6}", scores.l_x.times[v]),
            &format!("{:.6}", scores.l_y.times[v]),
            scores.l_x.method.as_str(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("scores.csv", e))?;
    Ok(())
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// GEXF 1.3 export with party, category, side and r(u) node attributes and
/// edge weights.
pub fn write_gexf(
    mut w: impl Write,
    graph: &RetweetGraph,
    users: &UserTable,
    scores: Option<&RetweetPolarity>,
) -> Result<()> {
    let io = |e| Error::io("graph.gexf", e);
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<gexf xmlns=\"http://gexf.net/1.3\" version=\"1.3\">\n");
    s.push_str("  <graph mode=\"static\" defaultedgetype=\"undirected\">\n");
    s.push_str("    <attributes class=\"node\">\n");
    s.push_str("      <attribute id=\"0\" title=\"party\" type=\"string\"/>\n");
    s.push_str("      <attribute id=\"1\" title=\"category\" type=\"string\"/>\n");
    s.push_str("      <attribute id=\"2\" title=\"side\" type=\"string\"/>\n");
    s.push_str("      <attribute id=\"3\" title=\"r\" type=\"double\"/>\n");
    s.push_str("    </attributes>\n    <nodes>\n");
    for (v, id) in graph.vertices().iter().enumerate() {
        let user = users.get(id);
        let party = user.and_then(|u| u.role.party()).map_or("", |p| p.as_str());
        let category = user.and_then(|u| u.role.category()).map_or("", |c| c.as_str());
        let label = user.map_or(id.as_str(), |u| u.handle.as_str());
        let side = graph.side(v).map_or("", Side::as_str);
        s.push_str(&format!(
            "      <node id=\"{}\" label=\"{}\">\n        <attvalues>\n",
            xml_escape(id),
            xml_escape(label)
        ));
        s.push_str(&format!(
            "          <attvalue for=\"0\" value=\"{party}\"/>\n          <attvalue for=\"1\" value=\"{}\"/>\n          <attvalue for=\"2\" value=\"{side}\"/>\n",
            xml_escape(category)
        ));
        if let Some(r) = scores.and_then(|p| p.r[v]) {
            s.push_str(&format!("          <attvalue for=\"3\" value=\"{r:.10}\"/>\n"));
        }
        s.push_str("        </attvalues>\n      </node>\n");
    }
    s.push_str("    </nodes>\n    <edges>\n");
    for (i, (a, b, weight)) in graph.edges().enumerate() {
        s.push_str(&format!(
            "      <edge id=\"{i}\" source=\"{}\" target=\"{}\" weight=\"{weight}\"/>\n",
            xml_escape(graph.id(a)),
            xml_escape(graph.id(b))
        ));
    }
    s.push_str("    </edges>\n  </graph>\n</gexf>\n");
    w.write_all(s.as_bytes()).map_err(io)
}
