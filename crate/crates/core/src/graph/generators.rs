//! Small deterministic and random graph families, mostly for tests and demos.

use ndarray::Array2;
use rand::Rng;

use super::{Graph, GraphDataset};

pub fn complete(n: usize) -> Graph {
    let edges: Vec<_> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    Graph::unlabeled(n, &edges).expect("valid complete graph")
}

pub fn path(n: usize) -> Graph {
    let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
    Graph::unlabeled(n, &edges).expect("valid path")
}

pub fn cycle(n: usize) -> Graph {
    let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
    if n > 2 {
        edges.push((n - 1, 0));
    }
    Graph::unlabeled(n, &edges).expect("valid cycle")
}

/// Star with node 0 as the hub.
pub fn star(n: usize) -> Graph {
    let edges: Vec<_> = (1..n).map(|i| (0, i)).collect();
    Graph::unlabeled(n, &edges).expect("valid star")
}

pub fn erdos_renyi<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::unlabeled(n, &edges).expect("valid G(n, p)")
}

/// Random tree on `n` nodes plus `extra` ring-closing edges, the rough shape
/// of a small molecule.
pub fn molecule_like<R: Rng + ?Sized>(n: usize, extra: usize, rng: &mut R) -> Graph {
    let mut edges = Vec::with_capacity(n + extra);
    let mut degree = vec![0usize; n];
    for v in 1..n {
        // prefer attaching to low-degree atoms
        let mut u = rng.random_range(0..v);
        for _ in 0..4 {
            if degree[u] < 3 {
                break;
            }
            u = rng.random_range(0..v);
        }
        edges.push((u, v));
        degree[u] += 1;
        degree[v] += 1;
    }
    let mut added = 0;
    let mut attempts = 0;
    while added < extra && attempts < 50 * (extra + 1) && n > 3 {
        attempts += 1;
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u == v || edges.contains(&(u.min(v), u.max(v))) || edges.contains(&(u.max(v), u.min(v))) {
            continue;
        }
        edges.push((u.min(v), u.max(v)));
        added += 1;
    }
    Graph::unlabeled(n, &edges).expect("valid molecule-like graph")
}

/// Two-class dataset of molecule-like graphs with `node_types`-dim one-hot
/// node features. Class 1 graphs carry more rings and a skewed type mix.
pub fn synthetic_dataset<R: Rng + ?Sized>(
    name: &str,
    count: usize,
    nodes: std::ops::RangeInclusive<usize>,
    node_types: usize,
    rng: &mut R,
) -> GraphDataset {
    let graphs = (0..count)
        .map(|i| {
            let label = rng.random_range(0..2usize);
            let n = rng.random_range(nodes.clone());
            let rings = if label == 1 { 1 + n / 6 } else { n / 15 };
            let g = molecule_like(n, rings, rng);
            let mut feats = Array2::zeros((n, node_types));
            for u in 0..n {
                let t = if label == 1 && rng.random::<f64>() < 0.5 {
                    node_types - 1
                } else {
                    rng.random_range(0..node_types)
                };
                feats[[u, t]] = 1.0;
            }
            g.with_features(feats)
                .expect("feature rows match")
                .with_label(label)
                .with_source(i)
        })
        .collect();
    GraphDataset::new(name, graphs, 2).expect("consistent synthetic dataset")
}
