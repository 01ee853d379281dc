//! UMAP: fuzzy simplicial k-nearest-neighbor graph, optimized into a 2D
//! layout by stochastic gradient descent with negative sampling.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UmapConfig {
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub spread: f64,
    /// Defaults to 500 for up to 10,000 points and 200 beyond.
    pub n_epochs: Option<usize>,
    pub negative_sample_rate: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for UmapConfig {
    fn default() -> Self {
        UmapConfig {
            n_neighbors: 15,
            min_dist: 0.1,
            spread: 1.0,
            n_epochs: None,
            negative_sample_rate: 5,
            learning_rate: 1.0,
            seed: 42,
        }
    }
}

const SMOOTH_K_TOLERANCE: f64 = 1e-5;
const MIN_K_DIST_SCALE: f64 = 1e-3;
const GRADIENT_CLIP: f64 = 4.0;

pub fn umap_layout(data: &[Vec<f64>], config: &UmapConfig) -> Result<Vec<[f64; 2]>> {
    let n = data.len();
    if n < 3 {
        return Err(Error::Stance(format!("projection needs at least 3 points, got {n}")));
    }
    let dim = data[0].len();
    if dim < 2 || data.iter().any(|r| r.len() != dim) {
        return Err(Error::Stance("projection input must share a dimension of at least 2".into()));
    }
    if data.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Stance("projection input has non-finite values".into()));
    }

    let k = config.n_neighbors.clamp(2, n - 1);
    let knn = nearest_neighbors(data, k);
    let graph = fuzzy_simplicial_set(&knn, k);
    let (a, b) = find_ab_params(config.spread, config.min_dist);
    let n_epochs = config
        .n_epochs
        .unwrap_or(if n <= 10_000 { 500 } else { 200 });

    let mut rng = crate::rng::seeded(config.seed);
    let mut embedding = pca_init(data, &mut rng);
    optimize_layout(&mut embedding, &graph, a, b, n_epochs, config, &mut rng);
    Ok(embedding)
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Exact k nearest neighbors of every point, excluding itself, ordered by
/// distance then index.
fn nearest_neighbors(data: &[Vec<f64>], k: usize) -> Vec<Vec<(usize, f64)>> {
    (0..data.len())
        .into_par_iter()
        .map(|i| {
            let mut row: Vec<(usize, f64)> = (0..data.len())
                .filter(|&j| j != i)
                .map(|j| (j, euclidean(&data[i], &data[j])))
                .collect();
            row.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
            row.truncate(k);
            row
        })
        .collect()
}

/// Symmetrized membership strengths `w_ij + w_ji - w_ij * w_ji`, as a
/// sorted list of directed entries.
fn fuzzy_simplicial_set(knn: &[Vec<(usize, f64)>], k: usize) -> Vec<(usize, usize, f64)> {
    let target = (k as f64).log2();
    let mean_all = {
        let all: Vec<f64> = knn.iter().flatten().map(|&(_, d)| d).collect();
        all.iter().sum::<f64>() / all.len().max(1) as f64
    };
    let mut directed: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (i, row) in knn.iter().enumerate() {
        let rho = row.iter().map(|&(_, d)| d).find(|&d| d > 0.0).unwrap_or(0.0);
        let (mut lo, mut hi, mut mid) = (0.0f64, f64::INFINITY, 1.0f64);
        for _ in 0..64 {
            let psum: f64 = row
                .iter()
                .map(|&(_, d)| {
                    let gap = d - rho;
                    if gap > 0.0 { (-gap / mid).exp() } else { 1.0 }
                })
                .sum();
            if (psum - target).abs() < SMOOTH_K_TOLERANCE {
                break;
            }
            if psum > target {
                hi = mid;
                mid = (lo + hi) / 2.0;
            } else {
                lo = mid;
                mid = if hi.is_infinite() { mid * 2.0 } else { (lo + hi) / 2.0 };
            }
        }
        let mean_row = row.iter().map(|&(_, d)| d).sum::<f64>() / row.len() as f64;
        let floor = MIN_K_DIST_SCALE * if rho > 0.0 { mean_row } else { mean_all };
        let sigma = mid.max(floor).max(f64::MIN_POSITIVE);
        for &(j, d) in row {
            let gap = d - rho;
            let w = if gap <= 0.0 { 1.0 } else { (-gap / sigma).exp() };
            directed.insert((i, j), w);
        }
    }
    let mut sym: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (&(i, j), &w) in &directed {
        let back = directed.get(&(j, i)).copied().unwrap_or(0.0);
        let s = w + back - w * back;
        sym.insert((i, j), s);
        sym.insert((j, i), s);
    }
    sym.into_iter()
        .filter(|&(_, w)| w > 0.0)
        .map(|((i, j), w)| (i, j, w))
        .collect()
}

/// Fits `1 / (1 + a d^(2b))` to the offset-exponential target curve by
/// Gauss-Newton on 300 sample points.
pub fn find_ab_params(spread: f64, min_dist: f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..300).map(|i| i as f64 * 3.0 * spread / 299.0).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| if x < min_dist { 1.0 } else { (-(x - min_dist) / spread).exp() })
        .collect();
    let (mut a, mut b) = (1.5f64, 0.9f64);
    let sse = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| {
                let f = 1.0 / (1.0 + a * x.powf(2.0 * b));
                (f - y) * (f - y)
            })
            .sum()
    };
    let mut damping = 1e-3;
    for _ in 0..200 {
        let (mut jtj, mut jtr) = ([[0.0f64; 2]; 2], [0.0f64; 2]);
        for (&x, &y) in xs.iter().zip(&ys) {
            if x == 0.0 {
                continue;
            }
            let p = x.powf(2.0 * b);
            let denom = 1.0 + a * p;
            let f = 1.0 / denom;
            let da = -p / (denom * denom);
            let db = -a * p * 2.0 * x.ln() / (denom * denom);
            let r = f - y;
            jtj[0][0] += da * da;
            jtj[0][1] += da * db;
            jtj[1][1] += db * db;
            jtr[0] += da * r;
            jtr[1] += db * r;
        }
        let current = sse(a, b);
        let mut improved = false;
        for _ in 0..20 {
            let m00 = jtj[0][0] * (1.0 + damping);
            let m11 = jtj[1][1] * (1.0 + damping);
            let det = m00 * m11 - jtj[0][1] * jtj[0][1];
            if det.abs() < 1e-300 {
                break;
            }
            let step_a = (m11 * jtr[0] - jtj[0][1] * jtr[1]) / det;
            let step_b = (m00 * jtr[1] - jtj[0][1] * jtr[0]) / det;
            let (na, nb) = (a - step_a, b - step_b);
            if na > 0.0 && nb > 0.0 && sse(na, nb) < current {
                a = na;
                b = nb;
                damping = (damping / 3.0).max(1e-9);
                improved = true;
                break;
            }
            damping *= 4.0;
        }
        if !improved {
            break;
        }
    }
    (a, b)
}

/// Initial layout from the top two principal components, rescaled to
/// `[0, 10]` per axis with a little jitter so coincident points separate.
fn pca_init(data: &[Vec<f64>], rng: &mut impl Rng) -> Vec<[f64; 2]> {
    let n = data.len();
    let dim = data[0].len();
    let mut mean = vec![0.0; dim];
    for row in data {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x / n as f64;
        }
    }
    let centered: Vec<Vec<f64>> = data
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();

    let mut components: Vec<Vec<f64>> = Vec::new();
    for c in 0..2 {
        // deterministic, non-degenerate start
        let mut v: Vec<f64> = (0..dim).map(|i| 1.0 + ((i * 7 + c * 3) % 11) as f64 / 11.0).collect();
        for _ in 0..200 {
            let scores: Vec<f64> = centered
                .iter()
                .map(|r| r.iter().zip(&v).map(|(a, b)| a * b).sum())
                .collect();
            let mut next = vec![0.0; dim];
            for (r, s) in centered.iter().zip(&scores) {
                for (nx, x) in next.iter_mut().zip(r) {
                    *nx += s * x;
                }
            }
            for prev in &components {
                let proj: f64 = next.iter().zip(prev).map(|(a, b)| a * b).sum();
                for (nx, p) in next.iter_mut().zip(prev) {
                    *nx -= proj * p;
                }
            }
            let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-300 {
                break;
            }
            next.iter_mut().for_each(|x| *x /= norm);
            v = next;
        }
        components.push(v);
    }

    let jitter = Normal::new(0.0, 1e-4).unwrap();
    let mut coords: Vec<[f64; 2]> = centered
        .iter()
        .map(|r| {
            let mut p = [0.0; 2];
            for (c, comp) in components.iter().enumerate() {
                p[c] = r.iter().zip(comp).map(|(a, b)| a * b).sum();
            }
            p
        })
        .collect();
    for axis in 0..2 {
        let lo = coords.iter().map(|p| p[axis]).fold(f64::INFINITY, f64::min);
        let hi = coords.iter().map(|p| p[axis]).fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        for p in coords.iter_mut() {
            p[axis] = if span > 1e-12 { 10.0 * (p[axis] - lo) / span } else { 5.0 };
            p[axis] += jitter.sample(rng);
        }
    }
    coords
}

fn clip(x: f64) -> f64 {
    x.clamp(-GRADIENT_CLIP, GRADIENT_CLIP)
}

fn optimize_layout(
    embedding: &mut [[f64; 2]],
    graph: &[(usize, usize, f64)],
    a: f64,
    b: f64,
    n_epochs: usize,
    config: &UmapConfig,
    rng: &mut impl Rng,
) {
    let n = embedding.len();
    let max_w = graph.iter().map(|e| e.2).fold(0.0, f64::max);
    let edges: Vec<&(usize, usize, f64)> = graph
        .iter()
        .filter(|e| e.2 >= max_w / n_epochs as f64)
        .collect();
    let per_sample: Vec<f64> = edges.iter().map(|e| max_w / e.2).collect();
    let neg_rate = config.negative_sample_rate.max(1) as f64;
    let per_negative: Vec<f64> = per_sample.iter().map(|s| s / neg_rate).collect();
    let mut next_sample = per_sample.clone();
    let mut next_negative = per_negative.clone();

    for epoch in 0..n_epochs {
        let alpha = config.learning_rate * (1.0 - epoch as f64 / n_epochs as f64);
        let now = epoch as f64;
        for (e, &&(head, tail, _)) in edges.iter().enumerate() {
            if next_sample[e] > now {
                continue;
            }
            let d2 = dist_sq(&embedding[head], &embedding[tail]);
            let coeff = if d2 > 0.0 {
                -2.0 * a * b * d2.powf(b - 1.0) / (a * d2.powf(b) + 1.0)
            } else {
                0.0
            };
            for d in 0..2 {
                let g = clip(coeff * (embedding[head][d] - embedding[tail][d]));
                embedding[head][d] += g * alpha;
                embedding[tail][d] -= g * alpha;
            }
            next_sample[e] += per_sample[e];

            let n_neg = ((now - next_negative[e]) / per_negative[e]).floor().max(0.0) as usize;
            for _ in 0..n_neg {
                let other = rng.random_range(0..n);
                if other == head {
                    continue;
                }
                let d2 = dist_sq(&embedding[head], &embedding[other]);
                let coeff = if d2 > 0.0 {
                    2.0 * b / ((0.001 + d2) * (a * d2.powf(b) + 1.0))
                } else {
                    0.0
                };
                for d in 0..2 {
                    let g = if coeff > 0.0 {
                        clip(coeff * (embedding[head][d] - embedding[other][d]))
                    } else {
                        GRADIENT_CLIP
                    };
                    embedding[head][d] += g * alpha;
                }
            }
            next_negative[e] += n_neg as f64 * per_negative[e];
        }
    }
}

fn dist_sq(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ab_fit_matches_reference_curve_constants() {
        // umap-learn's fitted values for spread=1, min_dist=0.1
        let (a, b) = find_ab_params(1.0, 0.1);
        assert!((a - 1.577).abs() < 0.02, "a = {a}");
        assert!((b - 0.895).abs() < 0.01, "b = {b}");
    }

    #[test]
    fn membership_strengths_are_symmetric_probabilities() {
        let data: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i as f64).sin() * 3.0, (i as f64 * 0.7).cos(), i as f64 * 0.1])
            .collect();
        let knn = nearest_neighbors(&data, 5);
        let g = fuzzy_simplicial_set(&knn, 5);
        let map: BTreeMap<(usize, usize), f64> = g.iter().map(|&(i, j, w)| ((i, j), w)).collect();
        for (&(i, j), &w) in &map {
            assert!(w > 0.0 && w <= 1.0);
            assert_eq!(map.get(&(j, i)), Some(&w));
        }
        // nearest neighbor always has full membership
        for (i, row) in knn.iter().enumerate() {
            assert!((map[&(i, row[0].0)] - 1.0).abs() < 1e-12);
        }
    }
}
