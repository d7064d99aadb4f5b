use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{connected_components, Graph};

/// Bins per statistic histogram.
pub const STAT_BINS: usize = 10;

/// Macro-level structural statistic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Degree,
    Lcc,
    Bc,
    Cc,
}

impl Statistic {
    pub const ALL: [Statistic; 4] = [Statistic::Degree, Statistic::Lcc, Statistic::Bc, Statistic::Cc];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::Degree => "degree",
            Statistic::Lcc => "lcc",
            Statistic::Bc => "bc",
            Statistic::Cc => "cc",
        }
    }
}

/// Normalised histograms of the four statistics of one graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatProfile {
    pub degree: Vec<f64>,
    pub lcc: Vec<f64>,
    pub bc: Vec<f64>,
    pub cc: Vec<f64>,
}

impl StatProfile {
    pub fn get(&self, s: Statistic) -> &[f64] {
        match s {
            Statistic::Degree => &self.degree,
            Statistic::Lcc => &self.lcc,
            Statistic::Bc => &self.bc,
            Statistic::Cc => &self.cc,
        }
    }
}

fn bin(v: f64, hi: f64) -> usize {
    if hi <= 0.0 {
        return 0;
    }
    // The tolerance keeps values sitting on an edge in the upper bin despite rounding.
    ((v / hi * STAT_BINS as f64 + 1e-9).floor().max(0.0) as usize).min(STAT_BINS - 1)
}

fn histogram(values: impl IntoIterator<Item = f64>, hi: f64) -> Vec<f64> {
    let mut h = vec![0.0; STAT_BINS];
    let mut n = 0usize;
    for v in values {
        h[bin(v, hi)] += 1.0;
        n += 1;
    }
    h.iter_mut().for_each(|x| *x /= n as f64);
    h
}

/// Local clustering coefficient per node; nodes of degree < 2 get 0.
pub fn local_clustering(g: &Graph) -> Vec<f64> {
    (0..g.node_count())
        .map(|u| {
            let nb = g.neighbors(u);
            let d = nb.len();
            if d < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for (i, &a) in nb.iter().enumerate() {
                for &b in &nb[i + 1..] {
                    if g.has_edge(a, b) {
                        links += 1;
                    }
                }
            }
            2.0 * links as f64 / (d * (d - 1)) as f64
        })
        .collect()
}

/// Betweenness centrality, normalised within each component by `(c−1)(c−2)/2`.
pub fn betweenness(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    let mut bc = vec![0.0; n];
    let mut comp_size = vec![0usize; n];
    for comp in connected_components(g) {
        for &u in &comp {
            comp_size[u] = comp.len();
        }
    }
    // Brandes accumulation from every source.
    for s in 0..n {
        let mut stack = Vec::new();
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut sigma = vec![0.0f64; n];
        let mut dist = vec![usize::MAX; n];
        sigma[s] = 1.0;
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in g.neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        let mut delta = vec![0.0; n];
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                bc[w] += delta[w];
            }
        }
    }
    for u in 0..n {
        let c = comp_size[u];
        bc[u] = if c > 2 {
            // each unordered pair was counted from both ends
            bc[u] / 2.0 / ((c - 1) * (c - 2) / 2) as f64
        } else {
            0.0
        };
    }
    bc
}

/// Closeness centrality `(c−1) / Σ d(u,v)` within the node's component; isolated nodes get 0.
pub fn closeness(g: &Graph) -> Vec<f64> {
    (0..g.node_count())
        .map(|u| {
            let dist = crate::graph::bfs_distances(g, u);
            let (mut reach, mut total) = (0usize, 0usize);
            for d in dist.into_iter().flatten() {
                if d > 0 {
                    reach += 1;
                    total += d;
                }
            }
            if total == 0 {
                0.0
            } else {
                reach as f64 / total as f64
            }
        })
        .collect()
}

/// Profile of `g` with the degree histogram spanning `[0, max_degree]`.
pub fn stat_profile(g: &Graph, max_degree: usize) -> Result<StatProfile> {
    if g.node_count() == 0 {
        return Err(Error::Empty("statistics of a graph with no nodes"));
    }
    Ok(StatProfile {
        degree: histogram(g.degrees().into_iter().map(|d| d as f64), max_degree as f64),
        lcc: histogram(local_clustering(g), 1.0),
        bc: histogram(betweenness(g), 1.0),
        cc: histogram(closeness(g), 1.0),
    })
}

/// Profiles of two graphs with a shared degree range.
pub fn stat_profile_pair(a: &Graph, b: &Graph) -> Result<(StatProfile, StatProfile)> {
    let max_deg = a.degrees().into_iter().chain(b.degrees()).max().unwrap_or(0);
    Ok((stat_profile(a, max_deg)?, stat_profile(b, max_deg)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generators;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Betweenness by enumerating all shortest paths between every pair.
    fn brute_betweenness(g: &Graph) -> Vec<f64> {
        let n = g.node_count();
        let mut bc = vec![0.0; n];
        let mut comp = vec![0; n];
        let comps = connected_components(g);
        for (i, c) in comps.iter().enumerate() {
            for &u in c {
                comp[u] = i;
            }
        }
        fn paths(g: &Graph, s: usize, t: usize) -> Vec<Vec<usize>> {
            let d = crate::graph::bfs_distances(g, s);
            let mut out = Vec::new();
            let mut stack = vec![vec![s]];
            while let Some(p) = stack.pop() {
                let last = *p.last().unwrap();
                if last == t {
                    out.push(p);
                    continue;
                }
                for &w in g.neighbors(last) {
                    if d[w] == Some(d[last].unwrap() + 1) {
                        let mut q = p.clone();
                        q.push(w);
                        stack.push(q);
                    }
                }
            }
            out
        }
        for s in 0..n {
            for t in s + 1..n {
                if comp[s] != comp[t] {
                    continue;
                }
                let all = paths(g, s, t);
                for p in &all {
                    for &v in &p[1..p.len() - 1] {
                        bc[v] += 1.0 / all.len() as f64;
                    }
                }
            }
        }
        for u in 0..n {
            let c = comps[comp[u]].len();
            bc[u] = if c > 2 { bc[u] / ((c - 1) * (c - 2) / 2) as f64 } else { 0.0 };
        }
        bc
    }

    #[test]
    fn path_betweenness() {
        let bc = betweenness(&generators::path(4));
        let want = [0.0, 2.0 / 3.0, 2.0 / 3.0, 0.0];
        for (a, b) in bc.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn complete_graph_lcc_in_top_bin() {
        let p = stat_profile(&generators::complete(4), 3).unwrap();
        assert_eq!(p.lcc[9], 1.0);
        assert_eq!(p.cc[9], 1.0);
        assert_eq!(p.bc[0], 1.0);
    }

    #[test]
    fn star_degree_histogram() {
        let (p, _) = stat_profile_pair(&generators::star(5), &generators::star(5)).unwrap();
        let mut want = vec![0.0; 10];
        want[2] = 0.8;
        want[9] = 0.2;
        assert_eq!(p.degree, want);
    }

    #[test]
    fn single_node_mass_at_zero_and_empty_errors() {
        let p = stat_profile(&Graph::unlabeled(1, &[]).unwrap(), 0).unwrap();
        for s in Statistic::ALL {
            assert_eq!(p.get(s)[0], 1.0);
        }
        assert!(stat_profile(&Graph::unlabeled(0, &[]).unwrap(), 0).is_err());
    }

    #[test]
    fn closeness_is_per_component() {
        let g = Graph::unlabeled(5, &[(0, 1), (1, 2)]).unwrap();
        let cc = closeness(&g);
        assert_eq!(cc, vec![2.0 / 3.0, 1.0, 2.0 / 3.0, 0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn betweenness_matches_enumeration(n in 1usize..10, seed in any::<u64>()) {
            let g = generators::erdos_renyi(n, 0.4, &mut ChaCha8Rng::seed_from_u64(seed));
            for (a, b) in betweenness(&g).iter().zip(brute_betweenness(&g)) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn profiles_are_distributions_and_permutation_invariant(n in 1usize..15, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = generators::erdos_renyi(n, 0.3, &mut rng);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let (p, q) = stat_profile_pair(&g, &g.permuted(&perm).unwrap()).unwrap();
            for s in Statistic::ALL {
                prop_assert!((p.get(s).iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(p.get(s).iter().all(|&x| x >= 0.0));
            }
            prop_assert_eq!(p, q);
        }
    }
}
