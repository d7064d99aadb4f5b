//! Graph reconstruction: decode an embedding into an adjacency matrix.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::check_finite;
use super::matching::{lifted_target, max_pool_match, MatchingConfig, BCE_EPS};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::metrics::{similarity, stat_profile_pair, wl_kernel, SimilarityKind, Statistic, WL_ITERATIONS};
use crate::models::{EncoderConfig, GraphEncoder, Plateau, PoolingKind, TrainConfig, TrainingRecord};
use crate::nn::{Adam, Bound, Mlp, ParamStore, Tape, Var};
use crate::oracle::EmbeddingOracle;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconstructionConfig {
    /// Auto-encoder encoder; mean pooling regardless of the attacked model.
    pub encoder: EncoderConfig,
    pub decoder_hidden: Vec<usize>,
    pub train: TrainConfig,
    pub fine_tune: TrainConfig,
    pub threshold: f64,
    pub pos_weight: f64,
    pub matching: MatchingConfig,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        let ten = TrainConfig {
            epochs: 10,
            patience: 0,
            ..TrainConfig::default()
        };
        ReconstructionConfig {
            encoder: EncoderConfig::with_pooling(PoolingKind::MeanPool),
            decoder_hidden: vec![256, 512],
            train: ten.clone(),
            fine_tune: ten,
            threshold: 0.5,
            pos_weight: 1.0,
            matching: MatchingConfig::default(),
        }
    }
}

/// Number of upper-triangle slots of an `n`-node adjacency.
pub fn slot_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

fn slot_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// Symmetric zero-diagonal matrix from upper-triangle slot values.
pub fn slots_to_matrix(values: &[f64], n: usize) -> Array2<f64> {
    let mut p = Array2::zeros((n, n));
    for ((i, j), &v) in slot_pairs(n).zip(values) {
        p[[i, j]] = v;
        p[[j, i]] = v;
    }
    p
}

/// Keeps slots with probability at least `threshold`, then drops isolated nodes.
pub fn threshold_graph(p: &Array2<f64>, threshold: f64) -> Graph {
    let n = p.nrows();
    let edges: Vec<(usize, usize)> = slot_pairs(n).filter(|&(i, j)| p[[i, j]] >= threshold).collect();
    Graph::unlabeled(n, &edges).expect("slot pairs are valid edges").without_isolated()
}

/// Encoder plus MLP decoder to `n_max(n_max−1)/2` edge probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GraphAutoEncoder<T> {
    encoder: GraphEncoder<T>,
    decoder: Mlp,
    decoder_params: ParamStore<T>,
    n_max: usize,
    threshold: f64,
    pub record: TrainingRecord,
    pub fine_tune_record: TrainingRecord,
}

struct StepSettings<'a> {
    pos_weight: f64,
    matching: &'a MatchingConfig,
}

impl<T: Scalar> GraphAutoEncoder<T> {
    pub fn new(input_dim: usize, n_max: usize, cfg: &ReconstructionConfig) -> Result<Self> {
        if n_max < 2 {
            return Err(Error::InvalidArgument("reconstruction needs at least two node slots".into()));
        }
        if !(cfg.threshold > 0.0 && cfg.threshold < 1.0) {
            return Err(Error::InvalidArgument("threshold must lie in (0, 1)".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
        let encoder = GraphEncoder::new(cfg.encoder.clone(), input_dim, n_max, &mut rng)?;
        let mut decoder_params = ParamStore::new();
        let mut dims = vec![encoder.embedding_dim()];
        dims.extend(&cfg.decoder_hidden);
        dims.push(slot_count(n_max));
        let decoder = Mlp::new(&mut decoder_params, "decoder", &dims, &mut rng);
        Ok(GraphAutoEncoder {
            encoder,
            decoder,
            decoder_params,
            n_max,
            threshold: cfg.threshold,
            record: TrainingRecord::default(),
            fine_tune_record: TrainingRecord::default(),
        })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn encoder(&self) -> &GraphEncoder<T> {
        &self.encoder
    }

    pub fn decoder_params(&self) -> &ParamStore<T> {
        &self.decoder_params
    }

    pub fn embedding_dim(&self) -> usize {
        self.decoder.in_dim()
    }

    fn decode_var(&self, tape: &mut Tape<T>, p: &Bound, z: Var) -> Var {
        let logits = self.decoder.forward(tape, p, z);
        tape.sigmoid(logits)
    }

    /// Probabilistic adjacency `P` (`n_max × n_max`, symmetric, zero diagonal).
    pub fn decode(&self, h: &Array1<T>) -> Result<Array2<f64>> {
        check_finite(h)?;
        if h.len() != self.embedding_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.embedding_dim(),
                actual: h.len(),
            });
        }
        let mut tape = Tape::new();
        let p = self.decoder_params.bind(&mut tape);
        let z = tape.leaf(h.clone().insert_axis(Axis(0)));
        let probs = self.decode_var(&mut tape, &p, z);
        let values: Vec<f64> = tape.value(probs).iter().map(|x| x.as_f64()).collect();
        Ok(slots_to_matrix(&values, self.n_max))
    }

    /// Decoded graph after thresholding and dropping isolated nodes.
    pub fn reconstruct(&self, h: &Array1<T>) -> Result<Graph> {
        Ok(threshold_graph(&self.decode(h)?, self.threshold))
    }

    fn check_size(&self, g: &Graph) -> Result<()> {
        if g.node_count() > self.n_max {
            return Err(Error::InvalidArgument(format!(
                "graph with {} nodes exceeds n_max = {}",
                g.node_count(),
                self.n_max
            )));
        }
        Ok(())
    }

    /// Decodes `z`, matches against `g` with the decoded values held fixed, and
    /// records the weight-normalised matched cross-entropy.
    fn matched_step(&self, tape: &mut Tape<T>, pd: &Bound, z: Var, g: &Graph, s: &StepSettings) -> Result<Var> {
        let probs = self.decode_var(tape, pd, z);
        let values: Vec<f64> = tape.value(probs).iter().map(|x| x.as_f64()).collect();
        let p = slots_to_matrix(&values, self.n_max);
        let m = max_pool_match(g, &p, s.matching)?;
        let lifted = lifted_target(g, &m.assignment, self.n_max);
        let count = slot_count(self.n_max);
        let mut target = Array2::zeros((1, count));
        let mut weight = Array2::ones((1, count));
        for (k, (i, j)) in slot_pairs(self.n_max).enumerate() {
            if lifted[[i, j]] > 0.5 {
                target[[0, k]] = T::one();
                weight[[0, k]] = T::of(s.pos_weight);
            }
        }
        Ok(tape.bce_probs(probs, target, weight, T::of(BCE_EPS)))
    }
}

fn run_epochs(
    n: usize,
    train: &TrainConfig,
    record: &mut TrainingRecord,
    mut batch_step: impl FnMut(&[usize], usize, usize) -> Result<f64>,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed ^ 0xdec0de);
    let mut plateau = Plateau::new(train);
    let mut order: Vec<usize> = (0..n).collect();
    record.learning_rate = train.learning_rate;
    record.seed = train.seed;
    for epoch in 0..train.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (step, chunk) in order.chunks(train.batch_size.max(1)).enumerate() {
            total += batch_step(chunk, epoch, step)?;
        }
        let mean = total / n as f64;
        record.epoch_losses.push(mean);
        record.epochs_run = epoch + 1;
        log::debug!("reconstruction epoch {epoch}: loss {mean:.5}");
        if plateau.update(mean) {
            break;
        }
    }
    Ok(())
}

fn finite(value: f64, epoch: usize, step: usize) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteLoss { loss: value, epoch, step })
    }
}

/// Trains encoder and decoder jointly on the auxiliary graphs.
pub fn train_autoencoder<T: Scalar>(aux: &[Graph], cfg: &ReconstructionConfig) -> Result<GraphAutoEncoder<T>> {
    let first = aux.first().ok_or(Error::Empty("auto-encoder training set"))?;
    let n_max = aux.iter().map(Graph::node_count).max().unwrap_or(0);
    let mut ae = GraphAutoEncoder::new(first.feature_dim(), n_max, cfg)?;
    let settings = StepSettings {
        pos_weight: cfg.pos_weight,
        matching: &cfg.matching,
    };
    let lr = T::of(cfg.train.learning_rate);
    let mut opt_e = Adam::new(ae.encoder.params(), lr);
    let mut opt_d = Adam::new(&ae.decoder_params, lr);
    let mut record = TrainingRecord::default();
    run_epochs(aux.len(), &cfg.train, &mut record, |chunk, epoch, step| {
        let mut acc_e = ae.encoder.params().zeros_like();
        let mut acc_d = ae.decoder_params.zeros_like();
        let mut total = 0.0;
        for &i in chunk {
            let mut tape = Tape::new();
            let pe = ae.encoder.params().bind(&mut tape);
            let pd = ae.decoder_params.bind(&mut tape);
            let z = ae.encoder.forward(&mut tape, &pe, &aux[i])?.embedding;
            let loss = ae.matched_step(&mut tape, &pd, z, &aux[i], &settings)?;
            total += finite(tape.scalar(loss).as_f64(), epoch, step)?;
            let grads = tape.backward(loss);
            pe.accumulate(&grads, &mut acc_e);
            pd.accumulate(&grads, &mut acc_d);
        }
        let scale = T::one() / T::of_usize(chunk.len());
        opt_e.step(ae.encoder.params_mut(), &acc_e, scale);
        opt_d.step(&mut ae.decoder_params, &acc_d, scale);
        Ok(total)
    })?;
    ae.record = record;
    Ok(ae)
}

/// Fine-tunes only the decoder on `(graph, target embedding)` pairs of the auxiliary set.
pub fn fine_tune_decoder<T: Scalar>(
    ae: &mut GraphAutoEncoder<T>,
    aux: &[Graph],
    target: &impl EmbeddingOracle<T>,
    cfg: &ReconstructionConfig,
) -> Result<()> {
    if target.embedding_dim() != ae.embedding_dim() {
        return Err(Error::DimensionMismatch {
            expected: ae.embedding_dim(),
            actual: target.embedding_dim(),
        });
    }
    if aux.is_empty() {
        return Err(Error::Empty("fine-tuning set"));
    }
    for g in aux {
        ae.check_size(g)?;
    }
    let embeddings = target.query_all(aux)?;
    let settings = StepSettings {
        pos_weight: cfg.pos_weight,
        matching: &cfg.matching,
    };
    let mut opt = Adam::new(&ae.decoder_params, T::of(cfg.fine_tune.learning_rate));
    let mut record = TrainingRecord::default();
    run_epochs(aux.len(), &cfg.fine_tune, &mut record, |chunk, epoch, step| {
        let mut acc = ae.decoder_params.zeros_like();
        let mut total = 0.0;
        for &i in chunk {
            let mut tape = Tape::new();
            let pd = ae.decoder_params.bind(&mut tape);
            let z = tape.leaf(embeddings.row(i).to_owned().insert_axis(Axis(0)));
            let loss = ae.matched_step(&mut tape, &pd, z, &aux[i], &settings)?;
            total += finite(tape.scalar(loss).as_f64(), epoch, step)?;
            let grads = tape.backward(loss);
            pd.accumulate(&grads, &mut acc);
        }
        opt.step(&mut ae.decoder_params, &acc, T::one() / T::of_usize(chunk.len()));
        Ok(total)
    })?;
    ae.fine_tune_record = record;
    Ok(())
}

/// Mean similarity between reconstructions and the graphs behind the embeddings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionScores {
    pub graphs: usize,
    /// Reconstructions with no edges at all.
    pub empty: usize,
    pub wl: f64,
    /// `(statistic, measure, mean value)` for every statistic and measure.
    pub stats: Vec<(Statistic, SimilarityKind, f64)>,
}

impl ReconstructionScores {
    pub fn stat(&self, statistic: Statistic, kind: SimilarityKind) -> Option<f64> {
        self.stats
            .iter()
            .find(|(s, k, _)| *s == statistic && *k == kind)
            .map(|&(_, _, v)| v)
    }
}

/// Worst attainable value of each measure, used for empty reconstructions.
fn worst(kind: SimilarityKind) -> f64 {
    match kind {
        SimilarityKind::Cosine => 0.0,
        SimilarityKind::Wasserstein | SimilarityKind::Js => 1.0,
    }
}

/// Scores one reconstruction against its original graph.
pub fn score_pair(reconstructed: &Graph, original: &Graph) -> Result<(f64, Vec<(Statistic, SimilarityKind, f64)>)> {
    let pairs = Statistic::ALL.iter().flat_map(|&s| SimilarityKind::ALL.iter().map(move |&k| (s, k)));
    if reconstructed.node_count() == 0 || original.node_count() == 0 {
        return Ok((0.0, pairs.map(|(s, k)| (s, k, worst(k))).collect()));
    }
    let wl = wl_kernel(reconstructed, original, WL_ITERATIONS)?;
    let (a, b) = stat_profile_pair(reconstructed, original)?;
    let stats = pairs
        .map(|(s, k)| Ok((s, k, similarity(a.get(s), b.get(s), k).unwrap_or(worst(k)))))
        .collect::<Result<Vec<_>>>()?;
    Ok((wl, stats))
}

/// Reconstructs every graph from the oracle's embedding and averages the scores.
pub fn evaluate_reconstruction<T: Scalar>(
    ae: &GraphAutoEncoder<T>,
    oracle: &impl EmbeddingOracle<T>,
    graphs: &[Graph],
) -> Result<ReconstructionScores> {
    if graphs.is_empty() {
        return Err(Error::Empty("reconstruction evaluation set"));
    }
    let mut scores = ReconstructionScores {
        graphs: graphs.len(),
        ..Default::default()
    };
    let mut sums: Vec<(Statistic, SimilarityKind, f64)> = Vec::new();
    for g in graphs {
        let r = ae.reconstruct(&oracle.query(g)?)?;
        if r.node_count() == 0 {
            scores.empty += 1;
        }
        let (wl, stats) = score_pair(&r, g)?;
        scores.wl += wl;
        if sums.is_empty() {
            sums = stats;
        } else {
            for (acc, (_, _, v)) in sums.iter_mut().zip(stats) {
                acc.2 += v;
            }
        }
    }
    let n = graphs.len() as f64;
    scores.wl /= n;
    scores.stats = sums.into_iter().map(|(s, k, v)| (s, k, v / n)).collect();
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generators;
    use crate::metrics::wl_kernel;

    fn small_cfg(epochs: usize) -> ReconstructionConfig {
        let train = TrainConfig {
            epochs,
            patience: 0,
            learning_rate: 3e-3,
            batch_size: 4,
            seed: 1,
            ..TrainConfig::default()
        };
        ReconstructionConfig {
            encoder: EncoderConfig {
                hidden_dim: 16,
                embedding_dim: 16,
                ..EncoderConfig::with_pooling(PoolingKind::MeanPool)
            },
            decoder_hidden: vec![32],
            train: train.clone(),
            fine_tune: train,
            ..ReconstructionConfig::default()
        }
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(threshold_graph(&Array2::zeros((4, 4)), 0.5).node_count(), 0);
        let mut p = Array2::zeros((5, 5));
        p[[1, 3]] = 0.9;
        p[[3, 1]] = 0.9;
        let g = threshold_graph(&p, 0.5);
        assert_eq!((g.node_count(), g.edge_count()), (2, 1));
    }

    #[test]
    fn identical_pair_scores_perfectly_and_empty_scores_worst() {
        let g = generators::cycle(5);
        let (wl, stats) = score_pair(&g, &g).unwrap();
        assert!((wl - 1.0).abs() < 1e-12);
        for (_, k, v) in stats {
            let best = if k == SimilarityKind::Cosine { 1.0 } else { 0.0 };
            assert!((v - best).abs() < 1e-9, "{k}: {v}");
        }
        let empty = Graph::unlabeled(0, &[]).unwrap();
        let (wl, stats) = score_pair(&empty, &g).unwrap();
        assert_eq!(wl, 0.0);
        assert!(stats.iter().all(|&(_, k, v)| v == worst(k)));
    }

    #[test]
    fn decode_is_symmetric_with_zero_diagonal() {
        let ae = GraphAutoEncoder::<f64>::new(1, 6, &small_cfg(0)).unwrap();
        let p = ae.decode(&Array1::from_elem(16, 0.3)).unwrap();
        assert_eq!(p.dim(), (6, 6));
        for i in 0..6 {
            assert_eq!(p[[i, i]], 0.0);
            for j in 0..6 {
                assert_eq!(p[[i, j]], p[[j, i]]);
                assert!((0.0..=1.0).contains(&p[[i, j]]));
            }
        }
        let h = Array1::from_elem(16, 0.1);
        assert_eq!(ae.reconstruct(&h).unwrap(), ae.reconstruct(&h).unwrap());
    }

    #[test]
    fn overfits_a_single_graph() {
        let g = generators::cycle(6);
        let ae: GraphAutoEncoder<f64> = train_autoencoder(&[g.clone()], &small_cfg(300)).unwrap();
        assert!(ae.record.final_loss().unwrap() < 0.05, "{:?}", ae.record.final_loss());
        let h = ae.encoder().encode(&g).unwrap();
        let r = ae.reconstruct(&h).unwrap();
        assert!((wl_kernel(&r, &g, 3).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fine_tuning_touches_only_the_decoder() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let aux: Vec<Graph> = (0..8).map(|_| generators::molecule_like(7, 1, &mut rng)).collect();
        let cfg = small_cfg(2);
        let mut ae: GraphAutoEncoder<f64> = train_autoencoder(&aux, &cfg).unwrap();
        let target = ae.encoder().clone();
        let before = ae.clone();
        let zero = ReconstructionConfig {
            fine_tune: TrainConfig {
                epochs: 0,
                ..cfg.fine_tune.clone()
            },
            ..cfg.clone()
        };
        fine_tune_decoder(&mut ae, &aux, &target, &zero).unwrap();
        let scores = evaluate_reconstruction(&ae, &target, &aux).unwrap();
        assert_eq!(scores.stats.len(), 12);
        assert!((0.0..=1.0).contains(&scores.wl));
        assert_eq!(ae.decoder_params(), before.decoder_params());
        fine_tune_decoder(&mut ae, &aux, &target, &cfg).unwrap();
        assert_ne!(ae.decoder_params(), before.decoder_params());
        assert_eq!(ae.encoder(), before.encoder());
        let wide = EncoderConfig {
            embedding_dim: 8,
            hidden_dim: 8,
            ..cfg.encoder.clone()
        };
        let other = GraphEncoder::<f64>::new(wide, 1, 7, &mut rng).unwrap();
        assert!(fine_tune_decoder(&mut ae, &aux, &other, &cfg).is_err());
    }
}
