use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{Activation, EncoderConfig, PoolingKind};
use super::pooling::{pool_step, Structure};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nn::{Bound, Linear, Neighborhood, ParamStore, SageLayer, Tape, Var};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum AssignNet {
    Sage(SageLayer),
    Linear(Linear),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct PoolLayer {
    ratio: f64,
    max_clusters: usize,
    assign: AssignNet,
}

/// Cluster count of a pooling level for a graph of `n` input nodes.
pub fn cluster_count(ratio: f64, n: usize) -> usize {
    ((ratio * n as f64).ceil() as usize).max(1)
}

/// SAGE message passing followed by a pooling head; maps a graph to one vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GraphEncoder<T> {
    config: EncoderConfig,
    input_dim: usize,
    max_nodes: usize,
    blocks: Vec<Vec<SageLayer>>,
    pools: Vec<PoolLayer>,
    params: ParamStore<T>,
}

/// Tape handles produced by [`GraphEncoder::forward`].
#[derive(Clone, Debug)]
pub struct EncoderForward {
    /// `1×d_H` graph embedding.
    pub embedding: Var,
    /// Sum of the auxiliary pooling losses, if any level pooled.
    pub aux_loss: Option<Var>,
    /// Row-stochastic assignment matrices of the levels that pooled.
    pub assignments: Vec<Var>,
}

impl<T: Scalar> GraphEncoder<T> {
    /// `max_nodes` fixes the width of the assignment networks; larger graphs are
    /// clamped to that many clusters.
    pub fn new(config: EncoderConfig, input_dim: usize, max_nodes: usize, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 || max_nodes == 0 {
            return Err(Error::InvalidArgument("input dimension and node bound must be positive".into()));
        }
        let mut params = ParamStore::new();
        let ratios = config.effective_ratios();
        let mut blocks = Vec::new();
        let mut pools = Vec::new();
        let mut in_dim = input_dim;
        for level in 0..=ratios.len() {
            let mut block = Vec::new();
            let mut d = in_dim;
            for l in 0..config.mp_layers {
                let out = if l + 1 == config.mp_layers {
                    config.embedding_dim
                } else {
                    config.hidden_dim
                };
                block.push(SageLayer::new(&mut params, &format!("block{level}.sage{l}"), d, out, rng));
                d = out;
            }
            blocks.push(block);
            if let Some(&ratio) = ratios.get(level) {
                let max_clusters = cluster_count(ratio, max_nodes);
                let name = format!("pool{level}");
                let assign = match config.pooling {
                    PoolingKind::DiffPool => AssignNet::Sage(SageLayer::new(&mut params, &name, in_dim, max_clusters, rng)),
                    _ => AssignNet::Linear(Linear::new(&mut params, &name, config.embedding_dim, max_clusters, true, rng)),
                };
                pools.push(PoolLayer {
                    ratio,
                    max_clusters,
                    assign,
                });
            }
            in_dim = config.embedding_dim;
        }
        Ok(GraphEncoder {
            config,
            input_dim,
            max_nodes,
            blocks,
            pools,
            params,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn pooling(&self) -> PoolingKind {
        self.config.pooling
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn embedding_dim(&self) -> usize {
        self.config.embedding_dim
    }

    pub fn max_nodes(&self) -> usize {
        self.max_nodes
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    fn activate(&self, tape: &mut Tape<T>, x: Var) -> Var {
        match self.config.activation {
            Activation::Relu => tape.relu(x),
            Activation::Identity => x,
        }
    }

    fn check_input(&self, g: &Graph) -> Result<()> {
        if g.node_count() == 0 {
            return Err(Error::Empty("graph with no nodes"));
        }
        if g.feature_dim() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: g.feature_dim(),
            });
        }
        Ok(())
    }

    /// Records the encoder on `tape` using parameters bound by `p`.
    pub fn forward(&self, tape: &mut Tape<T>, p: &Bound, g: &Graph) -> Result<EncoderForward> {
        self.check_input(g)?;
        let n = g.node_count();
        let mut x = tape.leaf(g.features().mapv(T::of));
        let mut structure = Structure::input(g);
        let mut aux: Option<Var> = None;
        let mut assignments = Vec::new();
        for (level, block) in self.blocks.iter().enumerate() {
            let nb: Neighborhood<T> = structure.neighborhood();
            let mut h = x;
            for layer in block {
                let z = layer.forward(tape, p, h, &nb);
                h = self.activate(tape, z);
            }
            let Some(pool) = self.pools.get(level) else {
                return Ok(EncoderForward {
                    embedding: tape.mean_rows(h),
                    aux_loss: aux,
                    assignments,
                });
            };
            let current = tape.value(h).nrows();
            let m = cluster_count(pool.ratio, n).min(pool.max_clusters);
            if m >= current {
                x = h;
                continue;
            }
            let logits = match &pool.assign {
                AssignNet::Sage(l) => l.forward(tape, p, x, &nb),
                AssignNet::Linear(l) => l.forward(tape, p, h),
            };
            let logits = tape.slice_cols(logits, 0, m);
            let s = tape.softmax_rows(logits);
            let step = pool_step(tape, self.config.pooling, h, &structure, s);
            let terms = tape.add(step.terms.0, step.terms.1);
            aux = Some(match aux {
                Some(a) => tape.add(a, terms),
                None => terms,
            });
            assignments.push(s);
            x = step.h;
            structure = Structure::Coarse(step.adj);
        }
        unreachable!("the final block always returns")
    }

    /// Embedding of `g`; deterministic and side-effect free.
    pub fn encode(&self, g: &Graph) -> Result<Array1<T>> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let out = self.forward(&mut tape, &p, g)?;
        Ok(tape.value(out.embedding).row(0).to_owned())
    }

    /// Embeddings of many graphs as rows of one matrix.
    pub fn encode_all<'a>(&self, graphs: impl IntoIterator<Item = &'a Graph>) -> Result<Array2<T>> {
        let rows = graphs.into_iter().map(|g| self.encode(g)).collect::<Result<Vec<_>>>()?;
        stack_rows(&rows, self.embedding_dim())
    }

    /// Assignment matrices of the pooling levels that fire on `g`.
    pub fn assignments(&self, g: &Graph) -> Result<Vec<Array2<T>>> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let out = self.forward(&mut tape, &p, g)?;
        Ok(out.assignments.iter().map(|&s| tape.value(s).clone()).collect())
    }
}

pub(crate) fn stack_rows<T: Scalar>(rows: &[Array1<T>], dim: usize) -> Result<Array2<T>> {
    let mut out = Array2::zeros((rows.len(), dim));
    for (i, r) in rows.iter().enumerate() {
        if r.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: r.len(),
            });
        }
        out.row_mut(i).assign(r);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generators;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small(pooling: PoolingKind) -> GraphEncoder<f64> {
        let cfg = EncoderConfig {
            hidden_dim: 8,
            embedding_dim: 6,
            pooling,
            ..EncoderConfig::default()
        };
        GraphEncoder::new(cfg, 3, 20, &mut ChaCha8Rng::seed_from_u64(7)).unwrap()
    }

    fn featured(n: usize, seed: u64) -> Graph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = generators::erdos_renyi(n, 0.3, &mut rng);
        let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
        g.with_features(x).unwrap()
    }

    #[test]
    fn embedding_has_configured_width_and_is_deterministic() {
        for p in PoolingKind::ALL {
            let enc = small(p);
            let g = featured(12, 1);
            let a = enc.encode(&g).unwrap();
            assert_eq!(a.len(), 6);
            assert!(a.iter().all(|x| x.is_finite()));
            assert_eq!(a, enc.encode(&g).unwrap());
        }
    }

    #[test]
    fn permutation_invariant_for_every_head() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in PoolingKind::ALL {
            let enc = small(p);
            let g = featured(15, 2);
            let base = enc.encode(&g).unwrap();
            for _ in 0..5 {
                let mut perm: Vec<usize> = (0..15).collect();
                perm.shuffle(&mut rng);
                let other = enc.encode(&g.permuted(&perm).unwrap()).unwrap();
                let diff = (&base - &other).mapv(f64::abs).fold(0.0f64, |m, &x| m.max(x));
                assert!(diff < 1e-9, "{p}: {diff}");
            }
        }
    }

    #[test]
    fn assignments_are_row_stochastic() {
        for p in [PoolingKind::DiffPool, PoolingKind::MinCutPool] {
            let enc = small(p);
            let s = enc.assignments(&featured(18, 4)).unwrap();
            assert_eq!(s.len(), 2, "{p}: both levels should pool an 18-node graph");
            for m in s {
                for row in m.rows() {
                    assert!((row.sum() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn skips_levels_that_would_not_shrink() {
        let enc = small(PoolingKind::MinCutPool);
        // one node: ceil(0.5) = 1 cluster is not fewer than 1 node
        let g = featured(1, 5);
        assert!(enc.assignments(&g).unwrap().is_empty());
        assert_eq!(enc.encode(&g).unwrap().len(), 6);
    }

    #[test]
    fn rejects_bad_input() {
        let enc = small(PoolingKind::MeanPool);
        assert!(matches!(
            enc.encode(&Graph::unlabeled(3, &[(0, 1)]).unwrap()),
            Err(Error::DimensionMismatch { expected: 3, actual: 1 })
        ));
        let empty = Graph::new(0, &[], Array2::zeros((0, 3)), 0).unwrap();
        assert!(enc.encode(&empty).is_err());
    }

    #[test]
    fn f32_encoder_runs() {
        let cfg = EncoderConfig {
            hidden_dim: 4,
            embedding_dim: 4,
            pooling: PoolingKind::DiffPool,
            ..EncoderConfig::default()
        };
        let enc = GraphEncoder::<f32>::new(cfg, 3, 20, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(enc.encode(&featured(10, 9)).unwrap().iter().all(|x| x.is_finite()));
    }
}
