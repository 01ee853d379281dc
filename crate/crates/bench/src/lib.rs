//! Fixtures shared by the benchmarks in `benches/`.

use infpolar_core::corpus::tokens;
use infpolar_core::datagen::{generate, planted_sbm, World, WorldSpec};
use infpolar_core::rtgraph::{build_graph, RetweetGraph};

/// Planted two-sided retweet graph with `per_side` vertices per side.
pub fn sbm_graph(per_side: usize, seed: u64) -> RetweetGraph {
    let p = planted_sbm([per_side, per_side], 0.05, 0.002, seed);
    build_graph(p.vertices, &p.pairs, 2).with_partition(&p.sides)
}

/// `k` Gaussian-like blobs laid out on golden-angle spirals, `per_blob`
/// points each.
pub fn blobs(k: usize, per_blob: usize) -> Vec<[f64; 2]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..k)
        .flat_map(|b| {
            let (cx, cy) = (20.0 * b as f64, 7.0 * (b % 2) as f64);
            (0..per_blob).map(move |i| {
                let r = (i as f64 / per_blob as f64).sqrt() * 2.0;
                let a = i as f64 * golden;
                [cx + r * a.cos(), cy + r * a.sin()]
            })
        })
        .collect()
}

/// A synthetic world scaled down by `influencers`.
pub fn world(influencers: usize) -> World {
    generate(&WorldSpec {
        influencers,
        politicians_per_party: influencers / 3,
        ..WorldSpec::default()
    })
    .expect("valid spec")
}

/// Token lists of every tweet, for word-vector training.
pub fn sentences(world: &World) -> Vec<Vec<String>> {
    world
        .corpus
        .tweets()
        .iter()
        .map(|t| tokens(&t.clean_text).map(str::to_string).collect())
        .collect()
}
