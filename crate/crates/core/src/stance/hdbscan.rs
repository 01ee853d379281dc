//! HDBSCAN over 2D points: mutual-reachability minimum spanning tree,
//! single-linkage hierarchy, condensed tree and excess-of-mass selection.

use crate::error::{Error, Result};

pub const NOISE: i32 = -1;

fn distance(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Distance to the `k`-th nearest point, counting the point itself.
fn core_distances(points: &[[f64; 2]], k: usize) -> Vec<f64> {
    points
        .iter()
        .map(|p| {
            let mut d: Vec<f64> = points.iter().map(|q| distance(p, q)).collect();
            let (_, kth, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
            *kth
        })
        .collect()
}

/// Prim's algorithm on the dense mutual-reachability graph.
fn mutual_reachability_mst(points: &[[f64; 2]], core: &[f64]) -> Vec<(usize, usize, f64)> {
    let n = points.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut current = 0usize;
    in_tree[0] = true;
    for _ in 1..n {
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let mrd = distance(&points[current], &points[j])
                .max(core[current])
                .max(core[j]);
            if mrd < best[j] {
                best[j] = mrd;
                from[j] = current;
            }
        }
        let next = (0..n)
            .filter(|&j| !in_tree[j])
            .min_by(|&a, &b| best[a].total_cmp(&best[b]).then(a.cmp(&b)))
            .expect("a vertex remains");
        in_tree[next] = true;
        edges.push((from[next], next, best[next]));
        current = next;
    }
    edges.sort_by(|x, y| {
        x.2.total_cmp(&y.2)
            .then(x.0.min(x.1).cmp(&y.0.min(y.1)))
            .then(x.0.max(x.1).cmp(&y.0.max(y.1)))
    });
    edges
}

struct Dendrogram {
    n_points: usize,
    /// Internal node `n_points + i` merges `children[i]` at `weights[i]`.
    children: Vec<(usize, usize)>,
    weights: Vec<f64>,
    sizes: Vec<usize>,
}

impl Dendrogram {
    fn from_mst(n: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut parent: Vec<usize> = (0..2 * n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut d = Dendrogram {
            n_points: n,
            children: Vec::with_capacity(n),
            weights: Vec::with_capacity(n),
            sizes: Vec::with_capacity(n),
        };
        for &(a, b, w) in edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            let node = n + d.children.len();
            parent[ra] = node;
            parent[rb] = node;
            d.sizes.push(d.size(ra) + d.size(rb));
            d.children.push((ra, rb));
            d.weights.push(w);
        }
        d
    }

    fn size(&self, node: usize) -> usize {
        if node < self.n_points {
            1
        } else {
            self.sizes[node - self.n_points]
        }
    }

    fn root(&self) -> usize {
        self.n_points + self.children.len() - 1
    }

    fn leaves(&self, node: usize, out: &mut Vec<usize>) {
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if x < self.n_points {
                out.push(x);
            } else {
                let (l, r) = self.children[x - self.n_points];
                stack.push(l);
                stack.push(r);
            }
        }
    }
}

struct CondensedCluster {
    parent: Option<usize>,
    birth: f64,
    stability: f64,
    children: Vec<usize>,
}

struct CondensedTree {
    clusters: Vec<CondensedCluster>,
    /// Cluster each point last belonged to before falling out.
    point_cluster: Vec<usize>,
}

fn condense(dendro: &Dendrogram, min_cluster_size: usize) -> CondensedTree {
    let n = dendro.n_points;
    let lambda_cap = 1e300 / n as f64;
    let to_lambda = |w: f64| if w > 0.0 { (1.0 / w).min(lambda_cap) } else { lambda_cap };

    let mut tree = CondensedTree {
        clusters: vec![CondensedCluster {
            parent: None,
            birth: 0.0,
            stability: 0.0,
            children: Vec::new(),
        }],
        point_cluster: vec![0; n],
    };
    let mut scratch = Vec::new();
    let mut stack = vec![(dendro.root(), 0usize)];
    while let Some((node, cluster)) = stack.pop() {
        if node < n {
            tree.point_cluster[node] = cluster;
            continue;
        }
        let (left, right) = dendro.children[node - n];
        let lambda = to_lambda(dendro.weights[node - n]);
        let birth = tree.clusters[cluster].birth;
        let big = |x: usize| dendro.size(x) >= min_cluster_size;
        match (big(left), big(right)) {
            (true, true) => {
                for child in [left, right] {
                    let id = tree.clusters.len();
                    tree.clusters.push(CondensedCluster {
                        parent: Some(cluster),
                        birth: lambda,
                        stability: 0.0,
                        children: Vec::new(),
                    });
                    tree.clusters[cluster].children.push(id);
                    tree.clusters[cluster].stability +=
                        (lambda - birth) * dendro.size(child) as f64;
                    stack.push((child, id));
                }
            }
            (l_big, r_big) => {
                for (child, keep) in [(left, l_big), (right, r_big)] {
                    if keep {
                        stack.push((child, cluster));
                    } else {
                        scratch.clear();
                        dendro.leaves(child, &mut scratch);
                        for &p in &scratch {
                            tree.point_cluster[p] = cluster;
                        }
                        tree.clusters[cluster].stability += (lambda - birth) * scratch.len() as f64;
                    }
                }
            }
        }
    }
    tree
}

/// Excess-of-mass selection. The root is only chosen when it never splits.
fn select_clusters(tree: &CondensedTree) -> Vec<bool> {
    let m = tree.clusters.len();
    let mut selected = vec![false; m];
    if tree.clusters[0].children.is_empty() {
        selected[0] = true;
        return selected;
    }
    let mut subtree = vec![0.0; m];
    for id in (1..m).rev() {
        let c = &tree.clusters[id];
        let child_sum: f64 = c.children.iter().map(|&ch| subtree[ch]).sum();
        if c.children.is_empty() || c.stability >= child_sum {
            selected[id] = true;
            subtree[id] = c.stability;
            let mut stack = c.children.clone();
            while let Some(x) = stack.pop() {
                selected[x] = false;
                stack.extend(tree.clusters[x].children.iter().copied());
            }
        } else {
            subtree[id] = child_sum;
        }
    }
    selected
}

/// Cluster labels per point, `-1` for noise. Cluster ids are numbered by the
/// smallest point index they contain.
pub fn hdbscan(points: &[[f64; 2]], min_cluster_size: usize) -> Result<Vec<i32>> {
    if min_cluster_size < 2 {
        return Err(Error::Stance(format!(
            "min_cluster_size must be at least 2, got {min_cluster_size}"
        )));
    }
    if points.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Stance("non-finite coordinates".into()));
    }
    let n = points.len();
    if n < min_cluster_size {
        return Ok(vec![NOISE; n]);
    }
    let core = core_distances(points, min_cluster_size);
    let mst = mutual_reachability_mst(points, &core);
    if mst.iter().all(|e| e.2 == 0.0) {
        return Ok(vec![0; n]);
    }
    let dendro = Dendrogram::from_mst(n, &mst);
    let tree = condense(&dendro, min_cluster_size);
    let selected = select_clusters(&tree);

    let mut raw = vec![None; n];
    for (p, slot) in raw.iter_mut().enumerate() {
        let mut c = Some(tree.point_cluster[p]);
        while let Some(id) = c {
            if selected[id] {
                *slot = Some(id);
                break;
            }
            c = tree.clusters[id].parent;
        }
    }
    let mut renumber: Vec<Option<i32>> = vec![None; tree.clusters.len()];
    let mut next = 0;
    Ok(raw
        .into_iter()
        .map(|c| match c {
            None => NOISE,
            Some(id) => *renumber[id].get_or_insert_with(|| {
                next += 1;
                next - 1
            }),
        })
        .collect())
}
