//! Property inference: predict bucketised graph properties from an embedding.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_finite, Standardizer};
use crate::error::{Error, Result};
use crate::graph::{BinningStrategy, BucketScheme, Graph, GraphProperty};
use crate::models::{argmax, Plateau, TrainConfig, TrainingRecord};
use crate::nn::{Adam, Linear, Mlp, ParamStore, Tape};
use crate::oracle::EmbeddingOracle;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropertyAttackConfig {
    /// Widths of the shared extractor layers.
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
}

impl Default for PropertyAttackConfig {
    fn default() -> Self {
        PropertyAttackConfig {
            hidden: vec![256, 256],
            train: TrainConfig::default(),
        }
    }
}

/// One embedding with its bucket label for every property.
#[derive(Clone, Debug, PartialEq)]
pub struct PropertySample<T> {
    pub embedding: Array1<T>,
    pub labels: Vec<usize>,
}

/// Bucket schemes for `properties`, fitted on the auxiliary graphs only.
pub fn build_schemes(
    aux: &[Graph],
    properties: &[GraphProperty],
    k: usize,
    strategy: BinningStrategy,
) -> Result<Vec<BucketScheme>> {
    properties.iter().map(|&p| BucketScheme::build(aux, p, k, strategy)).collect()
}

/// Queries the oracle once per graph and labels the result with every scheme.
pub fn build_training_set<T: Scalar>(
    graphs: &[Graph],
    oracle: &impl EmbeddingOracle<T>,
    schemes: &[BucketScheme],
) -> Result<Vec<PropertySample<T>>> {
    graphs
        .iter()
        .map(|g| {
            Ok(PropertySample {
                embedding: oracle.query(g)?,
                labels: schemes.iter().map(|s| s.label(g)).collect(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Head {
    Trained(Linear),
    /// Only one class occurred in training; always predict it.
    Constant(usize),
}

/// Shared extractor with one softmax head per property.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PropertyAttackModel<T> {
    schemes: Vec<BucketScheme>,
    standardizer: Standardizer<T>,
    extractor: Mlp,
    heads: Vec<Head>,
    params: ParamStore<T>,
    pub record: TrainingRecord,
}

fn stack<T: Scalar>(samples: &[&PropertySample<T>]) -> Array2<T> {
    let d = samples[0].embedding.len();
    let mut x = Array2::zeros((samples.len(), d));
    for (i, s) in samples.iter().enumerate() {
        x.row_mut(i).assign(&s.embedding);
    }
    x
}

/// Jointly trains the extractor and all heads on the summed cross-entropy.
pub fn train_property_attack<T: Scalar>(
    samples: &[PropertySample<T>],
    schemes: Vec<BucketScheme>,
    cfg: &PropertyAttackConfig,
) -> Result<PropertyAttackModel<T>> {
    let first = samples.first().ok_or(Error::Empty("property attack training set"))?;
    let d = first.embedding.len();
    for s in samples {
        if s.labels.len() != schemes.len() {
            return Err(Error::DimensionMismatch {
                expected: schemes.len(),
                actual: s.labels.len(),
            });
        }
        if s.embedding.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: s.embedding.len(),
            });
        }
        check_finite(&s.embedding)?;
    }
    let all: Vec<&PropertySample<T>> = samples.iter().collect();
    let standardizer = Standardizer::fit(&stack(&all))?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
    let mut params = ParamStore::new();
    let mut dims = vec![d];
    dims.extend(&cfg.hidden);
    let extractor = Mlp::new(&mut params, "extractor", &dims, &mut rng);
    let width = *dims.last().expect("non-empty");
    let heads: Vec<Head> = schemes
        .iter()
        .enumerate()
        .map(|(p, scheme)| {
            let mut seen: Vec<usize> = samples.iter().map(|s| s.labels[p]).collect();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() < 2 {
                log::warn!("{}: a single class in training data, head skipped", scheme.property);
                Head::Constant(seen[0])
            } else {
                Head::Trained(Linear::new(&mut params, &format!("head.{}", scheme.property), width, scheme.num_bins(), true, &mut rng))
            }
        })
        .collect();

    let mut model = PropertyAttackModel {
        schemes,
        standardizer,
        extractor,
        heads,
        params,
        record: TrainingRecord {
            learning_rate: cfg.train.learning_rate,
            seed: cfg.train.seed,
            ..TrainingRecord::default()
        },
    };
    if model.heads.iter().all(|h| matches!(h, Head::Constant(_))) {
        return Ok(model);
    }

    let mut opt = Adam::new(&model.params, T::of(cfg.train.learning_rate));
    let mut plateau = Plateau::new(&cfg.train);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..cfg.train.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (step, chunk) in order.chunks(cfg.train.batch_size.max(1)).enumerate() {
            let batch: Vec<&PropertySample<T>> = chunk.iter().map(|&i| &samples[i]).collect();
            let x = model.standardizer.apply_rows(&stack(&batch))?;
            let mut tape = Tape::new();
            let p = model.params.bind(&mut tape);
            let xv = tape.leaf(x);
            let z = model.extractor.forward(&mut tape, &p, xv);
            let z = tape.relu(z);
            let mut loss = None;
            for (h, head) in model.heads.iter().enumerate() {
                let Head::Trained(lin) = head else { continue };
                let logits = lin.forward(&mut tape, &p, z);
                let targets: Vec<usize> = batch.iter().map(|s| s.labels[h]).collect();
                let ce = tape.softmax_cross_entropy(logits, &targets);
                loss = Some(match loss {
                    Some(l) => tape.add(l, ce),
                    None => ce,
                });
            }
            let loss = loss.expect("at least one trained head");
            let value = tape.scalar(loss).as_f64();
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss { loss: value, epoch, step });
            }
            total += value * chunk.len() as f64;
            let grads = tape.backward(loss);
            let mut acc = model.params.zeros_like();
            p.accumulate(&grads, &mut acc);
            opt.step(&mut model.params, &acc, T::one());
        }
        let mean = total / samples.len() as f64;
        model.record.epoch_losses.push(mean);
        model.record.epochs_run = epoch + 1;
        if plateau.update(mean) {
            break;
        }
    }
    Ok(model)
}

impl<T: Scalar> PropertyAttackModel<T> {
    pub fn schemes(&self) -> &[BucketScheme] {
        &self.schemes
    }

    pub fn properties(&self) -> Vec<GraphProperty> {
        self.schemes.iter().map(|s| s.property).collect()
    }

    /// Predicted bucket per property; ties go to the lowest bucket.
    pub fn infer(&self, h: &Array1<T>) -> Result<Vec<usize>> {
        check_finite(h)?;
        let x = self.standardizer.apply(h)?.insert_axis(ndarray::Axis(0));
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let xv = tape.leaf(x);
        let z = self.extractor.forward(&mut tape, &p, xv);
        let z = tape.relu(z);
        Ok(self
            .heads
            .iter()
            .map(|head| match head {
                Head::Constant(c) => *c,
                Head::Trained(lin) => {
                    let logits = lin.forward(&mut tape, &p, z);
                    argmax(tape.value(logits).row(0).iter().copied())
                }
            })
            .collect())
    }

    /// Per-property accuracy on labelled samples.
    pub fn evaluate_accuracy(&self, samples: &[PropertySample<T>]) -> Result<Vec<f64>> {
        if samples.is_empty() {
            return Err(Error::Empty("property attack test set"));
        }
        let mut hits = vec![0usize; self.schemes.len()];
        for s in samples {
            for (h, (pred, truth)) in self.infer(&s.embedding)?.into_iter().zip(&s.labels).enumerate() {
                if pred == *truth {
                    hits[h] += 1;
                }
            }
        }
        Ok(hits.iter().map(|&c| c as f64 / samples.len() as f64).collect())
    }
}

/// Expected accuracy of uniform guessing over `k` buckets.
pub fn baseline_random(k: usize) -> f64 {
    1.0 / k as f64
}

/// Accuracy of always predicting the bucket of the auxiliary mean property value.
pub fn baseline_summarize(aux: &[Graph], test: &[Graph], scheme: &BucketScheme) -> Result<f64> {
    if aux.is_empty() || test.is_empty() {
        return Err(Error::Empty("summarize baseline needs auxiliary and test graphs"));
    }
    let mean = aux.iter().map(|g| scheme.property.compute(g)).sum::<f64>() / aux.len() as f64;
    let guess = scheme.bucketize(mean);
    Ok(test.iter().filter(|g| scheme.label(g) == guess).count() as f64 / test.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generators;
    use crate::models::{EncoderConfig, GraphEncoder, PoolingKind};
    use rand::Rng;

    fn graphs(count: usize, seed: u64) -> Vec<Graph> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|i| {
                let n = rng.random_range(4..30);
                generators::erdos_renyi(n, rng.random_range(0.1..0.5), &mut rng).with_source(i)
            })
            .collect()
    }

    fn encoder() -> GraphEncoder<f64> {
        let cfg = EncoderConfig {
            hidden_dim: 16,
            embedding_dim: 16,
            pooling: PoolingKind::MeanPool,
            ..EncoderConfig::default()
        };
        GraphEncoder::new(cfg, 1, 30, &mut ChaCha8Rng::seed_from_u64(1)).unwrap()
    }

    #[test]
    fn baselines() {
        assert_eq!(baseline_random(2), 0.5);
        assert_eq!(baseline_random(8), 0.125);
        let aux = graphs(20, 1);
        let scheme = BucketScheme::build(&aux, GraphProperty::NumNodes, 1, BinningStrategy::EqualWidth).unwrap();
        assert_eq!(baseline_summarize(&aux, &aux, &scheme).unwrap(), 1.0);
    }

    #[test]
    fn density_label_arithmetic() {
        let scheme = BucketScheme::from_values(&[0.1, 0.9], GraphProperty::Density, 2, BinningStrategy::EqualWidth).unwrap();
        assert_eq!(scheme.bucketize(0.75), 1);
    }

    #[test]
    fn one_sample_per_graph_and_learning() {
        let aux = graphs(200, 2);
        let test = graphs(100, 3);
        let enc = encoder();
        let props = GraphProperty::ALL.to_vec();
        let schemes = build_schemes(&aux, &props, 2, BinningStrategy::Quantile).unwrap();
        let train = build_training_set(&aux, &enc, &schemes).unwrap();
        assert_eq!(train.len(), 200);
        let cfg = PropertyAttackConfig {
            hidden: vec![32, 32],
            train: TrainConfig {
                epochs: 60,
                learning_rate: 3e-3,
                ..TrainConfig::default()
            },
        };
        let model = train_property_attack(&train, schemes, &cfg).unwrap();
        assert_eq!(model.properties().len(), 5);
        let r = &model.record;
        assert!(r.final_loss().unwrap() < r.initial_loss().unwrap());
        let acc = model.evaluate_accuracy(&build_training_set(&test, &enc, model.schemes()).unwrap()).unwrap();
        assert!(acc[0] > 0.6, "num_nodes accuracy {acc:?}");
        let again = model.evaluate_accuracy(&build_training_set(&test, &enc, model.schemes()).unwrap()).unwrap();
        assert_eq!(acc, again);
        for s in build_training_set(&test, &enc, model.schemes()).unwrap() {
            for (pred, scheme) in model.infer(&s.embedding).unwrap().iter().zip(model.schemes()) {
                assert!(*pred < scheme.num_bins());
            }
        }
    }

    #[test]
    fn single_class_head_is_constant() {
        let aux: Vec<Graph> = (0..10).map(|i| generators::path(5).with_source(i)).collect();
        let enc = encoder();
        let scheme = BucketScheme::from_values(&[0.0, 10.0], GraphProperty::NumNodes, 2, BinningStrategy::EqualWidth).unwrap();
        let train = build_training_set(&aux, &enc, std::slice::from_ref(&scheme)).unwrap();
        let model = train_property_attack(&train, vec![scheme], &PropertyAttackConfig::default()).unwrap();
        let only = train[0].labels[0];
        assert!(train.iter().all(|s| s.labels[0] == only));
        assert_eq!(model.infer(&train[0].embedding).unwrap(), vec![only]);
    }
}
