//! Subgraph inference: decide whether a subgraph is contained in the graph behind an embedding.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::check_finite;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::metrics::roc_auc;
use crate::models::{EncoderConfig, GraphEncoder, Plateau, TrainConfig, TrainingRecord};
use crate::nn::{Adam, Mlp, ParamStore, Tape, Var};
use crate::oracle::EmbeddingOracle;
use crate::samplers::{sample, SamplerSpec};
use crate::scalar::Scalar;

/// Guards the gradient of the Euclidean distance at zero.
const DISTANCE_EPS: f64 = 1e-12;

/// How the target and subgraph embeddings are combined before classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Concatenation,
    ElementwiseDifference,
    EuclideanDistance,
}

impl Aggregation {
    pub const ALL: [Aggregation; 3] = [
        Aggregation::Concatenation,
        Aggregation::EuclideanDistance,
        Aggregation::ElementwiseDifference,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Aggregation::Concatenation => "concat",
            Aggregation::ElementwiseDifference => "ediff",
            Aggregation::EuclideanDistance => "edist",
        }
    }

    /// Feature width for target width `dt` and subgraph width `ds`.
    pub fn output_dim(self, dt: usize, ds: usize) -> usize {
        match self {
            Aggregation::Concatenation => dt + ds,
            Aggregation::ElementwiseDifference => dt,
            Aggregation::EuclideanDistance => 1,
        }
    }

    fn check(self, dt: usize, ds: usize) -> Result<()> {
        if self != Aggregation::Concatenation && dt != ds {
            return Err(Error::DimensionMismatch { expected: dt, actual: ds });
        }
        Ok(())
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match key.as_str() {
            "concat" | "concatenation" => Ok(Aggregation::Concatenation),
            "ediff" | "difference" | "elementwisedifference" => Ok(Aggregation::ElementwiseDifference),
            "edist" | "distance" | "euclideandistance" => Ok(Aggregation::EuclideanDistance),
            _ => Err(Error::InvalidArgument(format!("unknown aggregation `{s}`"))),
        }
    }
}

/// Combines two embeddings into the classifier input.
pub fn aggregate<T: Scalar>(h_t: &Array1<T>, h_s: &Array1<T>, strategy: Aggregation) -> Result<Array1<T>> {
    strategy.check(h_t.len(), h_s.len())?;
    Ok(match strategy {
        Aggregation::Concatenation => h_t.iter().chain(h_s.iter()).copied().collect(),
        Aggregation::ElementwiseDifference => h_t - h_s,
        Aggregation::EuclideanDistance => {
            let d = (h_t - h_s).mapv(|x| x * x).sum().sqrt();
            Array1::from_elem(1, d)
        }
    })
}

fn aggregate_var<T: Scalar>(tape: &mut Tape<T>, ht: Var, hs: Var, strategy: Aggregation) -> Var {
    match strategy {
        Aggregation::Concatenation => tape.concat_cols(ht, hs),
        Aggregation::ElementwiseDifference => tape.sub(ht, hs),
        Aggregation::EuclideanDistance => {
            let d = tape.sub(ht, hs);
            let d = tape.square(d);
            let d = tape.sum(d);
            let d = tape.add_scalar(d, T::of(DISTANCE_EPS));
            tape.sqrt(d)
        }
    }
}

/// Target embedding, candidate subgraph and whether the subgraph came from the target.
#[derive(Clone, Debug, PartialEq)]
pub struct SubgraphSample<T> {
    pub target_embedding: Array1<T>,
    pub subgraph: Graph,
    pub label: bool,
}

/// One positive and one negative sample per auxiliary graph. Negatives come from
/// a uniformly chosen different graph; sampler seeds are drawn independently.
pub fn generate_samples<T: Scalar>(
    aux: &[Graph],
    oracle: &impl EmbeddingOracle<T>,
    spec: &SamplerSpec,
) -> Result<Vec<SubgraphSample<T>>> {
    if aux.len() < 2 {
        return Err(Error::InvalidArgument("subgraph samples need at least two auxiliary graphs".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(2 * aux.len());
    for (i, g) in aux.iter().enumerate() {
        let h = oracle.query(g)?;
        let pos = sample(g, &spec.with_seed(rng.random()))?;
        let mut j = rng.random_range(0..aux.len() - 1);
        if j >= i {
            j += 1;
        }
        let neg = sample(&aux[j], &spec.with_seed(rng.random()))?;
        out.push(SubgraphSample {
            target_embedding: h.clone(),
            subgraph: pos,
            label: true,
        });
        out.push(SubgraphSample {
            target_embedding: h,
            subgraph: neg,
            label: false,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubgraphAttackConfig {
    pub strategy: Aggregation,
    pub classifier_hidden: Vec<usize>,
    /// Extractor architecture; `None` mirrors the target encoder.
    pub extractor: Option<EncoderConfig>,
    pub train: TrainConfig,
}

impl Default for SubgraphAttackConfig {
    fn default() -> Self {
        SubgraphAttackConfig {
            strategy: Aggregation::ElementwiseDifference,
            classifier_hidden: vec![128, 32],
            extractor: None,
            train: TrainConfig::default(),
        }
    }
}

/// Embedding extractor, aggregation and binary classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SubgraphAttackModel<T> {
    strategy: Aggregation,
    extractor: GraphEncoder<T>,
    trainable_extractor: bool,
    classifier: Mlp,
    params: ParamStore<T>,
    pub record: TrainingRecord,
}

/// A fresh extractor sized for the subgraphs in `samples`.
pub fn new_extractor<T: Scalar>(config: EncoderConfig, samples: &[SubgraphSample<T>], seed: u64) -> Result<GraphEncoder<T>> {
    let first = samples.first().ok_or(Error::Empty("subgraph samples"))?;
    let max_nodes = samples.iter().map(|s| s.subgraph.node_count()).max().unwrap_or(1).max(1);
    GraphEncoder::new(config, first.subgraph.feature_dim(), max_nodes, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Trains the classifier, and the extractor too when `trainable_extractor`, on one BCE loss.
pub fn train_subgraph_attack<T: Scalar>(
    samples: &[SubgraphSample<T>],
    extractor: GraphEncoder<T>,
    trainable_extractor: bool,
    cfg: &SubgraphAttackConfig,
) -> Result<SubgraphAttackModel<T>> {
    let first = samples.first().ok_or(Error::Empty("subgraph attack training set"))?;
    let dt = first.target_embedding.len();
    let ds = extractor.embedding_dim();
    cfg.strategy.check(dt, ds)?;
    for s in samples {
        check_finite(&s.target_embedding)?;
        if s.target_embedding.len() != dt {
            return Err(Error::DimensionMismatch {
                expected: dt,
                actual: s.target_embedding.len(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
    let mut params = ParamStore::new();
    let mut dims = vec![cfg.strategy.output_dim(dt, ds)];
    dims.extend(&cfg.classifier_hidden);
    dims.push(1);
    let classifier = Mlp::new(&mut params, "classifier", &dims, &mut rng);
    let mut model = SubgraphAttackModel {
        strategy: cfg.strategy,
        extractor,
        trainable_extractor,
        classifier,
        params,
        record: TrainingRecord {
            learning_rate: cfg.train.learning_rate,
            seed: cfg.train.seed,
            ..TrainingRecord::default()
        },
    };

    // A frozen extractor's outputs never change; compute them once.
    let frozen: Option<Vec<Array1<T>>> = if trainable_extractor {
        None
    } else {
        Some(samples.iter().map(|s| model.extractor.encode(&s.subgraph)).collect::<Result<_>>()?)
    };

    let lr = T::of(cfg.train.learning_rate);
    let mut opt_c = Adam::new(&model.params, lr);
    let mut opt_e = Adam::new(model.extractor.params(), lr);
    let mut plateau = Plateau::new(&cfg.train);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..cfg.train.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (step, chunk) in order.chunks(cfg.train.batch_size.max(1)).enumerate() {
            let mut acc_c = model.params.zeros_like();
            let mut acc_e = model.extractor.params().zeros_like();
            for &i in chunk {
                let s = &samples[i];
                let mut tape = Tape::new();
                let pc = model.params.bind(&mut tape);
                let (hs, pe) = match &frozen {
                    Some(cache) => (tape.leaf(cache[i].clone().insert_axis(Axis(0))), None),
                    None => {
                        let pe = model.extractor.params().bind(&mut tape);
                        let fwd = model.extractor.forward(&mut tape, &pe, &s.subgraph)?;
                        (fwd.embedding, Some(pe))
                    }
                };
                let ht = tape.leaf(s.target_embedding.clone().insert_axis(Axis(0)));
                let chi = aggregate_var(&mut tape, ht, hs, model.strategy);
                let logit = model.classifier.forward(&mut tape, &pc, chi);
                let y = if s.label { T::one() } else { T::zero() };
                let loss = tape.bce_with_logits(logit, Array2::from_elem((1, 1), y), Array2::ones((1, 1)));
                let value = tape.scalar(loss).as_f64();
                if !value.is_finite() {
                    return Err(Error::NonFiniteLoss { loss: value, epoch, step });
                }
                total += value;
                let grads = tape.backward(loss);
                pc.accumulate(&grads, &mut acc_c);
                if let Some(pe) = pe {
                    pe.accumulate(&grads, &mut acc_e);
                }
            }
            let scale = T::one() / T::of_usize(chunk.len());
            opt_c.step(&mut model.params, &acc_c, scale);
            if trainable_extractor {
                opt_e.step(model.extractor.params_mut(), &acc_e, scale);
            }
        }
        let mean = total / samples.len() as f64;
        model.record.epoch_losses.push(mean);
        model.record.epochs_run = epoch + 1;
        log::debug!("subgraph epoch {epoch}: loss {mean:.5}");
        if plateau.update(mean) {
            break;
        }
    }
    Ok(model)
}

impl<T: Scalar> SubgraphAttackModel<T> {
    pub fn strategy(&self) -> Aggregation {
        self.strategy
    }

    pub fn extractor(&self) -> &GraphEncoder<T> {
        &self.extractor
    }

    pub fn is_extractor_trainable(&self) -> bool {
        self.trainable_extractor
    }

    /// Probability that `g_s` is contained in the graph behind `h_t`.
    pub fn infer(&self, h_t: &Array1<T>, g_s: &Graph) -> Result<f64> {
        check_finite(h_t)?;
        let hs = self.extractor.encode(g_s)?;
        let chi = aggregate(h_t, &hs, self.strategy)?;
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let x = tape.leaf(chi.insert_axis(Axis(0)));
        let logit = self.classifier.forward(&mut tape, &p, x);
        let s = tape.sigmoid(logit);
        Ok(tape.scalar(s).as_f64())
    }

    pub fn scores(&self, samples: &[SubgraphSample<T>]) -> Result<Vec<f64>> {
        samples.iter().map(|s| self.infer(&s.target_embedding, &s.subgraph)).collect()
    }

    pub fn evaluate_auc(&self, samples: &[SubgraphSample<T>]) -> Result<f64> {
        let labels: Vec<bool> = samples.iter().map(|s| s.label).collect();
        roc_auc(&self.scores(samples)?, &labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generators;
    use crate::models::PoolingKind;
    use crate::samplers::SamplerMethod;
    use ndarray::array;

    #[test]
    fn aggregation_arithmetic() {
        let (a, b) = (array![1.0, 2.0], array![0.0, 2.0]);
        assert_eq!(aggregate(&a, &b, Aggregation::ElementwiseDifference).unwrap(), array![1.0, 0.0]);
        assert_eq!(aggregate(&a, &b, Aggregation::EuclideanDistance).unwrap(), array![1.0]);
        assert_eq!(aggregate(&a, &b, Aggregation::Concatenation).unwrap(), array![1.0, 2.0, 0.0, 2.0]);
        assert_eq!(aggregate(&a, &a, Aggregation::EuclideanDistance).unwrap(), array![0.0]);
        assert_eq!(
            aggregate(&b, &a, Aggregation::ElementwiseDifference).unwrap(),
            -aggregate(&a, &b, Aggregation::ElementwiseDifference).unwrap()
        );
        assert!(aggregate(&a, &array![1.0], Aggregation::ElementwiseDifference).is_err());
        assert_eq!(aggregate(&a, &array![1.0], Aggregation::Concatenation).unwrap().len(), 3);
    }

    fn setup() -> (Vec<Graph>, GraphEncoder<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ds = generators::synthetic_dataset("toy", 80, 10..=24, 3, &mut rng);
        let cfg = EncoderConfig {
            hidden_dim: 16,
            embedding_dim: 16,
            pooling: PoolingKind::MeanPool,
            ..EncoderConfig::default()
        };
        let enc = GraphEncoder::new(cfg, 3, 24, &mut rng).unwrap();
        (ds.graphs, enc)
    }

    #[test]
    fn balanced_and_reproducible_samples() {
        let (graphs, enc) = setup();
        let spec = SamplerSpec::new(SamplerMethod::ForestFire, 0.8, 5);
        let s = generate_samples(&graphs, &enc, &spec).unwrap();
        assert_eq!(s.len(), 2 * graphs.len());
        assert_eq!(s.iter().filter(|x| x.label).count(), graphs.len());
        for (i, pair) in s.chunks(2).enumerate() {
            assert_eq!(pair[0].subgraph.source(), Some(i));
            assert_ne!(pair[1].subgraph.source(), Some(i));
            assert_eq!(pair[0].subgraph.node_count(), crate::samplers::target_size(0.8, graphs[i].node_count()));
        }
        assert_eq!(s, generate_samples(&graphs, &enc, &spec).unwrap());
        assert!(generate_samples(&graphs[..1], &enc, &spec).is_err());
    }

    #[test]
    fn joint_training_learns_and_frozen_keeps_extractor() {
        let (graphs, enc) = setup();
        let spec = SamplerSpec::new(SamplerMethod::RandomWalk, 0.8, 1);
        let train = generate_samples(&graphs[..60], &enc, &spec).unwrap();
        let test = generate_samples(&graphs[60..], &enc, &spec.with_seed(2)).unwrap();
        let cfg = SubgraphAttackConfig {
            classifier_hidden: vec![16, 8],
            train: TrainConfig {
                epochs: 20,
                learning_rate: 3e-3,
                batch_size: 16,
                ..TrainConfig::default()
            },
            ..SubgraphAttackConfig::default()
        };
        let ext = new_extractor(enc.config().clone(), &train, 9).unwrap();
        let model = train_subgraph_attack(&train, ext, true, &cfg).unwrap();
        let r = &model.record;
        assert!(r.final_loss().unwrap() < r.initial_loss().unwrap());
        let auc = model.evaluate_auc(&test).unwrap();
        assert!(auc > 0.6, "auc {auc}");

        let frozen = train_subgraph_attack(&train, enc.clone(), false, &cfg).unwrap();
        assert_eq!(frozen.extractor(), &enc);
        assert!((0.0..=1.0).contains(&frozen.evaluate_auc(&test).unwrap()));
    }
}
