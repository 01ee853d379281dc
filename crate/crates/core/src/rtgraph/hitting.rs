//! Expected hitting times of a random walk to an absorbing vertex set.

use std::collections::VecDeque;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RetweetGraph;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HittingMethod {
    /// Exact up to `exact_max_vertices`, Monte-Carlo beyond.
    #[default]
    Auto,
    Exact,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodUsed {
    Exact,
    MonteCarlo,
}

impl MethodUsed {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodUsed::Exact => "exact",
            MethodUsed::MonteCarlo => "monte-carlo",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkParams {
    pub max_steps: u64,
    pub walks_per_vertex: u32,
    pub seed: u64,
    /// Step to a neighbor with probability proportional to the retweet
    /// count on the edge instead of uniformly.
    pub weighted: bool,
    pub exact_max_vertices: usize,
}

impl Default for WalkParams {
    fn default() -> Self {
        WalkParams {
            max_steps: 100_000,
            walks_per_vertex: 10_000,
            seed: 17,
            weighted: false,
            exact_max_vertices: 5_000,
        }
    }
}

/// Expected steps from each vertex to the anchor set. Vertices with no path
/// to an anchor hold `f64::INFINITY`.
#[derive(Clone, Debug, PartialEq)]
pub struct HittingProfile {
    pub times: Vec<f64>,
    /// Monte-Carlo only: vertices with at least one walk cut at `max_steps`.
    pub truncated: Vec<bool>,
    pub method: MethodUsed,
    pub params: WalkParams,
}

impl HittingProfile {
    pub fn is_reachable(&self, v: usize) -> bool {
        self.times[v].is_finite()
    }
}

pub fn hitting_times(
    graph: &RetweetGraph,
    anchors: &[usize],
    method: HittingMethod,
    params: &WalkParams,
) -> Result<HittingProfile> {
    if anchors.is_empty() {
        return Err(Error::Graph("anchor set is empty".into()));
    }
    if let Some(&bad) = anchors.iter().find(|&&a| a >= graph.len()) {
        return Err(Error::Graph(format!("anchor index {bad} out of range")));
    }
    let used = match method {
        HittingMethod::Exact => MethodUsed::Exact,
        HittingMethod::MonteCarlo => MethodUsed::MonteCarlo,
        HittingMethod::Auto if graph.len() <= params.exact_max_vertices => MethodUsed::Exact,
        HittingMethod::Auto => MethodUsed::MonteCarlo,
    };
    let reachable = reachable_from(graph, anchors);
    let mut is_anchor = vec![false; graph.len()];
    for &a in anchors {
        is_anchor[a] = true;
    }
    let (times, truncated) = match used {
        MethodUsed::Exact => (
            exact(graph, &is_anchor, &reachable, params.weighted)?,
            vec![false; graph.len()],
        ),
        MethodUsed::MonteCarlo => monte_carlo(graph, &is_anchor, &reachable, params),
    };
    Ok(HittingProfile {
        times,
        truncated,
        method: used,
        params: params.clone(),
    })
}

fn reachable_from(graph: &RetweetGraph, anchors: &[usize]) -> Vec<bool> {
    let mut seen = vec![false; graph.len()];
    let mut queue: VecDeque<usize> = anchors.iter().copied().collect();
    for &a in anchors {
        seen[a] = true;
    }
    while let Some(u) = queue.pop_front() {
        for &(v, _) in graph.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

/// Solves `h(a) = 0` on anchors and `h(u) = 1 + Σ P(u,v) h(v)` elsewhere.
/// Multiplying row `u` by its degree gives a symmetric positive definite
/// system on the transient vertices, solved by preconditioned conjugate
/// gradients.
fn exact(
    graph: &RetweetGraph,
    is_anchor: &[bool],
    reachable: &[bool],
    weighted: bool,
) -> Result<Vec<f64>> {
    let n = graph.len();
    let mut times = vec![f64::INFINITY; n];
    let mut slot = vec![usize::MAX; n];
    let mut transient = Vec::new();
    for v in 0..n {
        if is_anchor[v] {
            times[v] = 0.0;
        } else if reachable[v] {
            slot[v] = transient.len();
            transient.push(v);
        }
    }
    let m = transient.len();
    if m == 0 {
        return Ok(times);
    }
    let w = |weight: u32| if weighted { weight as f64 } else { 1.0 };
    let diag: Vec<f64> = transient
        .iter()
        .map(|&u| graph.neighbors(u).iter().map(|&(_, c)| w(c)).sum())
        .collect();
    // A x = D x - W_TT x
    let apply = |x: &[f64], out: &mut [f64]| {
        for (i, &u) in transient.iter().enumerate() {
            let mut acc = diag[i] * x[i];
            for &(v, c) in graph.neighbors(u) {
                let j = slot[v];
                if j != usize::MAX {
                    acc -= w(c) * x[j];
                }
            }
            out[i] = acc;
        }
    };

    let b = diag.clone();
    let b_norm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut x = vec![0.0; m];
    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; m];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let max_iter = 50 * m + 1000;
    let mut converged = false;
    for _ in 0..max_iter {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..m {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let r_norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r_norm <= 1e-13 * b_norm {
            converged = true;
            break;
        }
        for i in 0..m {
            z[i] = r[i] / diag[i];
        }
        let rz_next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..m {
            p[i] = z[i] + beta * p[i];
        }
    }
    if !converged {
        return Err(Error::Graph("hitting-time solve did not converge".into()));
    }
    for (i, &u) in transient.iter().enumerate() {
        times[u] = x[i];
    }
    Ok(times)
}

fn monte_carlo(
    graph: &RetweetGraph,
    is_anchor: &[bool],
    reachable: &[bool],
    params: &WalkParams,
) -> (Vec<f64>, Vec<bool>) {
    let cumulative: Vec<Vec<u64>> = (0..graph.len())
        .map(|u| {
            graph
                .neighbors(u)
                .iter()
                .scan(0u64, |acc, &(_, c)| {
                    *acc += c as u64;
                    Some(*acc)
                })
                .collect()
        })
        .collect();
    let walks = params.walks_per_vertex.max(1);
    let results: Vec<(f64, bool)> = (0..graph.len())
        .into_par_iter()
        .map(|start| {
            if is_anchor[start] {
                return (0.0, false);
            }
            if !reachable[start] {
                return (f64::INFINITY, false);
            }
            let mut rng = crate::rng::stream(params.seed, start as u64);
            let mut total = 0u64;
            let mut cut = false;
            for _ in 0..walks {
                let mut at = start;
                let mut steps = 0u64;
                while !is_anchor[at] && steps < params.max_steps {
                    let nbrs = graph.neighbors(at);
                    let pick = if params.weighted {
                        let cum = &cumulative[at];
                        let ticket = rng.random_range(0..*cum.last().unwrap());
                        cum.partition_point(|&c| c <= ticket)
                    } else {
                        rng.random_range(0..nbrs.len())
                    };
                    at = nbrs[pick].0;
                    steps += 1;
                }
                cut |= !is_anchor[at];
                total += steps;
            }
            (total as f64 / walks as f64, cut)
        })
        .collect();
    results.into_iter().unzip()
}
