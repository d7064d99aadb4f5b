//! Node-induced subgraph samplers.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, IteratorRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{connected_components, Graph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMethod {
    RandomWalk,
    Snowball,
    ForestFire,
}

impl SamplerMethod {
    pub const ALL: [SamplerMethod; 3] = [SamplerMethod::RandomWalk, SamplerMethod::Snowball, SamplerMethod::ForestFire];

    pub fn name(self) -> &'static str {
        match self {
            SamplerMethod::RandomWalk => "random_walk",
            SamplerMethod::Snowball => "snowball",
            SamplerMethod::ForestFire => "forest_fire",
        }
    }
}

impl fmt::Display for SamplerMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match key.as_str() {
            "randomwalk" | "rw" => Ok(SamplerMethod::RandomWalk),
            "snowball" | "sb" => Ok(SamplerMethod::Snowball),
            "forestfire" | "ff" => Ok(SamplerMethod::ForestFire),
            _ => Err(Error::InvalidArgument(format!("unknown sampler `{s}`"))),
        }
    }
}

/// Sampler configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerSpec {
    pub method: SamplerMethod,
    pub ratio: f64,
    pub seed: u64,
    /// Neighbours taken per selected node per snowball round.
    pub snowball_k: usize,
    /// Forest-fire forward burning probability.
    pub burn_probability: f64,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        SamplerSpec {
            method: SamplerMethod::RandomWalk,
            ratio: 0.8,
            seed: 0,
            snowball_k: 5,
            burn_probability: 0.4,
        }
    }
}

impl SamplerSpec {
    pub fn new(method: SamplerMethod, ratio: f64, seed: u64) -> Self {
        SamplerSpec {
            method,
            ratio,
            seed,
            ..Self::default()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SamplerSpec { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::InvalidArgument(format!("sampling ratio {} not in (0, 1)", self.ratio)));
        }
        if self.snowball_k == 0 {
            return Err(Error::InvalidArgument("snowball k must be positive".into()));
        }
        if !(self.burn_probability >= 0.0 && self.burn_probability < 1.0) {
            return Err(Error::InvalidArgument("burn probability must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// `⌈ratio·n⌉`, robust to representation error in `ratio`.
pub fn target_size(ratio: f64, n: usize) -> usize {
    ((ratio * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Node-induced subgraph on `⌈ratio·n⌉` sampled nodes, listed in ascending id order.
pub fn sample(g: &Graph, spec: &SamplerSpec) -> Result<Graph> {
    let nodes = sample_nodes(g, spec)?;
    Ok(g.induced_subgraph(&nodes))
}

/// The sorted node set chosen by [`sample`].
pub fn sample_nodes(g: &Graph, spec: &SamplerSpec) -> Result<Vec<usize>> {
    spec.validate()?;
    let n = g.node_count();
    if n == 0 {
        return Err(Error::Empty("cannot sample from a graph with no nodes"));
    }
    let t = target_size(spec.ratio, n).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut picked = Picked::new(n);
    match spec.method {
        SamplerMethod::RandomWalk => random_walk(g, t, &mut picked, &mut rng),
        SamplerMethod::Snowball => snowball(g, t, spec.snowball_k, &mut picked, &mut rng),
        SamplerMethod::ForestFire => forest_fire(g, t, spec.burn_probability, &mut picked, &mut rng),
    }
    let mut nodes = picked.order;
    debug_assert_eq!(nodes.len(), t);
    nodes.sort_unstable();
    Ok(nodes)
}

struct Picked {
    flag: Vec<bool>,
    order: Vec<usize>,
}

impl Picked {
    fn new(n: usize) -> Self {
        Picked {
            flag: vec![false; n],
            order: Vec::new(),
        }
    }

    fn insert(&mut self, u: usize) -> bool {
        if self.flag[u] {
            return false;
        }
        self.flag[u] = true;
        self.order.push(u);
        true
    }

    fn len(&self) -> usize {
        self.order.len()
    }

    fn fresh(&self, rng: &mut impl Rng) -> usize {
        (0..self.flag.len())
            .filter(|&u| !self.flag[u])
            .choose(rng)
            .expect("target size never exceeds node count")
    }
}

fn random_walk(g: &Graph, t: usize, picked: &mut Picked, rng: &mut impl Rng) {
    let comps = connected_components(g);
    let mut comp_of = vec![0; g.node_count()];
    for (c, nodes) in comps.iter().enumerate() {
        for &u in nodes {
            comp_of[u] = c;
        }
    }
    let mut left: Vec<usize> = comps.iter().map(Vec::len).collect();
    let mut current = picked.fresh(rng);
    picked.insert(current);
    left[comp_of[current]] -= 1;
    while picked.len() < t {
        if left[comp_of[current]] == 0 {
            current = picked.fresh(rng);
            picked.insert(current);
            left[comp_of[current]] -= 1;
            continue;
        }
        current = *g.neighbors(current).choose(rng).expect("non-exhausted component has edges");
        if picked.insert(current) {
            left[comp_of[current]] -= 1;
        }
    }
}

fn snowball(g: &Graph, t: usize, k: usize, picked: &mut Picked, rng: &mut impl Rng) {
    let mut frontier = Vec::new();
    while picked.len() < t {
        if frontier.is_empty() {
            let seed = picked.fresh(rng);
            picked.insert(seed);
            frontier.push(seed);
            continue;
        }
        let mut next = Vec::new();
        'round: for &u in &frontier {
            let open: Vec<usize> = g.neighbors(u).iter().copied().filter(|&v| !picked.flag[v]).collect();
            for &v in open.choose_multiple(rng, k) {
                if picked.len() == t {
                    break 'round;
                }
                picked.insert(v);
                next.push(v);
            }
        }
        frontier = next;
    }
}

fn forest_fire(g: &Graph, t: usize, p: f64, picked: &mut Picked, rng: &mut impl Rng) {
    let burns = Geometric::new(1.0 - p).expect("burn probability checked by validate");
    let mut queue = VecDeque::new();
    while picked.len() < t {
        let Some(u) = queue.pop_front() else {
            let seed = picked.fresh(rng);
            picked.insert(seed);
            queue.push_back(seed);
            continue;
        };
        let open: Vec<usize> = g.neighbors(u).iter().copied().filter(|&v| !picked.flag[v]).collect();
        let x = burns.sample(rng) as usize;
        for &v in open.choose_multiple(rng, x) {
            if picked.len() == t {
                break;
            }
            picked.insert(v);
            queue.push_back(v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generators;
    use proptest::prelude::*;

    #[test]
    fn exact_sizes() {
        assert_eq!(target_size(0.6, 5), 3);
        assert_eq!(target_size(0.2, 10), 2);
        assert_eq!(target_size(0.8, 16), 13);
        assert_eq!(target_size(0.2, 1), 1);
    }

    #[test]
    fn random_walk_on_a_path_is_a_segment() {
        let g = generators::path(10);
        for seed in 0..20 {
            let nodes = sample_nodes(&g, &SamplerSpec::new(SamplerMethod::RandomWalk, 0.8, seed)).unwrap();
            assert_eq!(nodes.len(), 8);
            assert_eq!(nodes[7] - nodes[0], 7, "contiguous segment");
            assert_eq!(sample(&g, &SamplerSpec::new(SamplerMethod::RandomWalk, 0.8, seed)).unwrap().edge_count(), 7);
        }
    }

    #[test]
    fn complete_graph_samples_are_complete() {
        for m in SamplerMethod::ALL {
            let s = sample(&generators::complete(5), &SamplerSpec::new(m, 0.6, 1)).unwrap();
            assert_eq!(s.node_count(), 3);
            assert_eq!(s.edge_count(), 3);
        }
    }

    #[test]
    fn stalls_restart_on_disconnected_graphs() {
        let g = Graph::unlabeled(10, &[(0, 1), (2, 3)]).unwrap();
        for m in SamplerMethod::ALL {
            for seed in 0..10 {
                assert_eq!(sample_nodes(&g, &SamplerSpec::new(m, 0.8, seed)).unwrap().len(), 8);
            }
        }
    }

    #[test]
    fn invalid_inputs() {
        let g = generators::path(4);
        assert!(sample(&g, &SamplerSpec::new(SamplerMethod::Snowball, 1.0, 0)).is_err());
        assert!(sample(&g, &SamplerSpec::new(SamplerMethod::Snowball, 0.0, 0)).is_err());
        let empty = Graph::unlabeled(0, &[]).unwrap();
        assert!(sample(&empty, &SamplerSpec::new(SamplerMethod::ForestFire, 0.5, 0)).is_err());
    }

    #[test]
    fn distinct_seeds_differ() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = generators::erdos_renyi(40, 0.1, &mut rng);
        for m in SamplerMethod::ALL {
            let a = sample_nodes(&g, &SamplerSpec::new(m, 0.4, 1)).unwrap();
            let b = sample_nodes(&g, &SamplerSpec::new(m, 0.4, 2)).unwrap();
            assert_ne!(a, b, "{m}");
        }
    }

    proptest! {
        #[test]
        fn size_subset_induced_and_deterministic(
            n in 1usize..40, p in 0.0f64..0.5, gseed in any::<u64>(), seed in any::<u64>(),
            pct in prop::sample::select(vec![20usize, 40, 60, 80]), m in 0usize..3,
        ) {
            let g = generators::erdos_renyi(n, p, &mut ChaCha8Rng::seed_from_u64(gseed));
            let spec = SamplerSpec::new(SamplerMethod::ALL[m], pct as f64 / 100.0, seed);
            let nodes = sample_nodes(&g, &spec).unwrap();
            prop_assert_eq!(nodes.len(), (pct * n).div_ceil(100));
            prop_assert!(nodes.windows(2).all(|w| w[0] < w[1]));
            let s = sample(&g, &spec).unwrap();
            for (i, &u) in nodes.iter().enumerate() {
                for (j, &v) in nodes.iter().enumerate() {
                    prop_assert_eq!(s.has_edge(i, j), i != j && g.has_edge(u, v));
                }
            }
            prop_assert_eq!(sample_nodes(&g, &spec).unwrap(), nodes);
        }
    }
}
