use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Default number of label-refinement rounds.
pub const WL_ITERATIONS: usize = 3;

/// Assigns compressed WL labels from one dictionary shared by every graph it sees.
#[derive(Debug, Default)]
pub struct WlLabeler {
    dict: HashMap<(usize, Vec<usize>), usize>,
}

impl WlLabeler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Counts of `(round, label)` over rounds `0..=iterations`, starting from a constant label.
    pub fn features(&mut self, g: &Graph, iterations: usize) -> HashMap<(usize, usize), usize> {
        let n = g.node_count();
        let mut labels = vec![0usize; n];
        let mut counts = HashMap::new();
        *counts.entry((0, 0)).or_insert(0) += n;
        for round in 1..=iterations {
            let next: Vec<usize> = (0..n)
                .map(|u| {
                    let mut sig: Vec<usize> = g.neighbors(u).iter().map(|&v| labels[v]).collect();
                    sig.sort_unstable();
                    // Round-tagged own label keeps ids of different rounds apart.
                    let key = (labels[u] * (iterations + 1) + round, sig);
                    let fresh = self.dict.len();
                    *self.dict.entry(key).or_insert(fresh)
                })
                .collect();
            for &l in &next {
                *counts.entry((round, l)).or_insert(0) += 1;
            }
            labels = next;
        }
        counts
    }
}

fn dot(a: &HashMap<(usize, usize), usize>, b: &HashMap<(usize, usize), usize>) -> f64 {
    a.iter().map(|(k, &x)| (x * b.get(k).copied().unwrap_or(0)) as f64).sum()
}

/// Normalised WL subtree kernel `k(g1,g2) / √(k(g1,g1)·k(g2,g2))`.
pub fn wl_kernel(g1: &Graph, g2: &Graph, iterations: usize) -> Result<f64> {
    if g1.node_count() == 0 || g2.node_count() == 0 {
        return Err(Error::Empty("WL kernel of a graph with no nodes"));
    }
    let mut labeler = WlLabeler::new();
    let f1 = labeler.features(g1, iterations);
    let f2 = labeler.features(g2, iterations);
    Ok(dot(&f1, &f2) / (dot(&f1, &f1) * dot(&f2, &f2)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generators;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    /// String-label WL refinement: label = own label + sorted neighbour labels.
    fn oracle_multisets(g: &Graph, h: usize) -> BTreeMap<String, usize> {
        let mut labels = vec!["x".to_string(); g.node_count()];
        let mut out = BTreeMap::new();
        for round in 0..=h {
            if round > 0 {
                labels = (0..g.node_count())
                    .map(|u| {
                        let mut nb: Vec<&str> = g.neighbors(u).iter().map(|&v| labels[v].as_str()).collect();
                        nb.sort();
                        format!("{}({})", labels[u], nb.join(","))
                    })
                    .collect();
            }
            for l in &labels {
                *out.entry(format!("{round}:{l}")).or_insert(0) += 1;
            }
        }
        out
    }

    fn oracle_kernel(a: &Graph, b: &Graph, h: usize) -> f64 {
        let (fa, fb) = (oracle_multisets(a, h), oracle_multisets(b, h));
        let k = |x: &BTreeMap<String, usize>, y: &BTreeMap<String, usize>| -> f64 {
            x.iter().map(|(s, c)| (c * y.get(s).copied().unwrap_or(0)) as f64).sum()
        };
        k(&fa, &fb) / (k(&fa, &fa) * k(&fb, &fb)).sqrt()
    }

    #[test]
    fn triangle_versus_path() {
        let (k3, p3) = (generators::complete(3), generators::path(3));
        let v = wl_kernel(&k3, &p3, 3).unwrap();
        assert!((v - oracle_kernel(&k3, &p3, 3)).abs() < 1e-12);
        // shared: round 0 (3·3) and the P3 centre's round-1 label (3·1); self: 36 and 24
        assert!((v - 12.0 / 864f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn self_similarity_is_one() {
        let g = generators::path(6);
        assert!((wl_kernel(&g, &g, 3).unwrap() - 1.0).abs() < 1e-12);
        assert!(wl_kernel(&Graph::unlabeled(0, &[]).unwrap(), &g, 3).is_err());
    }

    proptest! {
        #[test]
        fn matches_oracle_and_is_invariant(n1 in 1usize..12, n2 in 1usize..12, s1 in any::<u64>(), s2 in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(s1);
            let a = generators::erdos_renyi(n1, 0.35, &mut rng);
            let b = generators::erdos_renyi(n2, 0.35, &mut ChaCha8Rng::seed_from_u64(s2));
            let k = wl_kernel(&a, &b, 3).unwrap();
            prop_assert!((k - oracle_kernel(&a, &b, 3)).abs() < 1e-12);
            prop_assert!((k - wl_kernel(&b, &a, 3).unwrap()).abs() < 1e-12);
            let mut perm: Vec<usize> = (0..n1).collect();
            perm.shuffle(&mut rng);
            let pa = a.permuted(&perm).unwrap();
            prop_assert!((wl_kernel(&a, &pa, 3).unwrap() - 1.0).abs() < 1e-12);
            prop_assert!((wl_kernel(&pa, &b, 3).unwrap() - k).abs() < 1e-12);
        }
    }
}
