use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{EncoderConfig, Plateau, TrainConfig, TrainingRecord};
use super::encoder::GraphEncoder;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nn::{Adam, Mlp, ParamStore, Tape, Var};
use crate::scalar::Scalar;

/// Width of the hidden layer of the classification head.
pub const HEAD_HIDDEN: usize = 64;

/// Index of the largest score; ties resolve to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(scores: impl IntoIterator<Item = T>) -> usize {
    let mut best: Option<(usize, T)> = None;
    for (i, s) in scores.into_iter().enumerate() {
        match best {
            Some((_, b)) if !(s > b) => {}
            _ => best = Some((i, s)),
        }
    }
    best.map_or(0, |(i, _)| i)
}

/// A graph encoder trained for graph classification, with its head kept for utility checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TrainedEncoder<T> {
    encoder: GraphEncoder<T>,
    head: Mlp,
    head_params: ParamStore<T>,
    num_classes: usize,
    pub record: TrainingRecord,
}

/// Total loss of one graph and its parameter gradients.
#[derive(Clone, Debug)]
pub struct LossGradients<T> {
    pub loss: T,
    pub encoder: Vec<Array2<T>>,
    pub head: Vec<Array2<T>>,
}

impl<T: Scalar> TrainedEncoder<T> {
    /// Randomly initialised model; `train_target` starts from this.
    pub fn untrained(config: EncoderConfig, input_dim: usize, max_nodes: usize, num_classes: usize, seed: u64) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidArgument("classification needs at least two classes".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = GraphEncoder::new(config, input_dim, max_nodes, &mut rng)?;
        let mut head_params = ParamStore::new();
        let head = Mlp::new(&mut head_params, "head", &[encoder.embedding_dim(), HEAD_HIDDEN, num_classes], &mut rng);
        Ok(TrainedEncoder {
            encoder,
            head,
            head_params,
            num_classes,
            record: TrainingRecord {
                seed,
                ..TrainingRecord::default()
            },
        })
    }

    pub fn encoder(&self) -> &GraphEncoder<T> {
        &self.encoder
    }

    pub fn encoder_mut(&mut self) -> &mut GraphEncoder<T> {
        &mut self.encoder
    }

    pub fn head_params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.head_params
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn embedding_dim(&self) -> usize {
        self.encoder.embedding_dim()
    }

    pub fn encode(&self, g: &Graph) -> Result<Array1<T>> {
        self.encoder.encode(g)
    }

    /// Class logits of the head for a released embedding.
    pub fn class_scores(&self, h: &Array1<T>) -> Result<Array1<T>> {
        if h.len() != self.embedding_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.embedding_dim(),
                actual: h.len(),
            });
        }
        let mut tape = Tape::new();
        let p = self.head_params.bind(&mut tape);
        let x = tape.leaf(h.clone().insert_axis(ndarray::Axis(0)));
        let out = self.head.forward(&mut tape, &p, x);
        Ok(tape.value(out).row(0).to_owned())
    }

    pub fn classify_embedding(&self, h: &Array1<T>) -> Result<usize> {
        Ok(argmax(self.class_scores(h)?.iter().copied()))
    }

    pub fn classify(&self, g: &Graph) -> Result<usize> {
        self.classify_embedding(&self.encode(g)?)
    }

    /// Records cross-entropy plus auxiliary pooling losses for one graph.
    fn loss_on_tape(&self, tape: &mut Tape<T>, g: &Graph) -> Result<(Var, crate::nn::Bound, crate::nn::Bound)> {
        if g.label() >= self.num_classes {
            return Err(Error::InvalidArgument(format!("label {} out of range", g.label())));
        }
        let pe = self.encoder.params().bind(tape);
        let ph = self.head_params.bind(tape);
        let fwd = self.encoder.forward(tape, &pe, g)?;
        let logits = self.head.forward(tape, &ph, fwd.embedding);
        let ce = tape.softmax_cross_entropy(logits, &[g.label()]);
        let loss = match fwd.aux_loss {
            Some(a) => tape.add(ce, a),
            None => ce,
        };
        Ok((loss, pe, ph))
    }

    /// Training objective on `g` and its gradients for every parameter.
    pub fn loss_and_gradients(&self, g: &Graph) -> Result<LossGradients<T>> {
        let mut tape = Tape::new();
        let (loss, pe, ph) = self.loss_on_tape(&mut tape, g)?;
        let grads = tape.backward(loss);
        let mut encoder = self.encoder.params().zeros_like();
        let mut head = self.head_params.zeros_like();
        pe.accumulate(&grads, &mut encoder);
        ph.accumulate(&grads, &mut head);
        Ok(LossGradients {
            loss: tape.scalar(loss),
            encoder,
            head,
        })
    }

    /// Fraction of graphs whose predicted class equals their label.
    pub fn accuracy(&self, graphs: &[Graph]) -> Result<f64> {
        if graphs.is_empty() {
            return Err(Error::Empty("accuracy over no graphs"));
        }
        let mut hits = 0usize;
        for g in graphs {
            if self.classify(g)? == g.label() {
                hits += 1;
            }
        }
        Ok(hits as f64 / graphs.len() as f64)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec(self)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

/// Trains a target encoder and classification head on labelled graphs.
pub fn train_target<T: Scalar>(
    graphs: &[Graph],
    num_classes: usize,
    config: EncoderConfig,
    train: &TrainConfig,
) -> Result<TrainedEncoder<T>> {
    let first = graphs.first().ok_or(Error::Empty("target training set"))?;
    let mut classes: Vec<usize> = graphs.iter().map(Graph::label).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::InvalidArgument("target training needs at least two classes present".into()));
    }
    let max_nodes = graphs.iter().map(Graph::node_count).max().unwrap_or(1);
    let mut model = TrainedEncoder::untrained(config, first.feature_dim(), max_nodes, num_classes, train.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed ^ 0x5eed);
    let lr = T::of(train.learning_rate);
    let mut opt_e = Adam::new(model.encoder.params(), lr);
    let mut opt_h = Adam::new(&model.head_params, lr);
    let mut plateau = Plateau::new(train);
    let mut order: Vec<usize> = (0..graphs.len()).collect();
    let batch = train.batch_size.max(1);

    for epoch in 0..train.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (step, chunk) in order.chunks(batch).enumerate() {
            let mut acc_e = model.encoder.params().zeros_like();
            let mut acc_h = model.head_params.zeros_like();
            for &i in chunk {
                let mut tape = Tape::new();
                let (loss, pe, ph) = model.loss_on_tape(&mut tape, &graphs[i])?;
                let value = tape.scalar(loss).as_f64();
                if !value.is_finite() {
                    return Err(Error::NonFiniteLoss { loss: value, epoch, step });
                }
                total += value;
                let grads = tape.backward(loss);
                pe.accumulate(&grads, &mut acc_e);
                ph.accumulate(&grads, &mut acc_h);
            }
            let scale = T::one() / T::of_usize(chunk.len());
            opt_e.step(model.encoder.params_mut(), &acc_e, scale);
            opt_h.step(&mut model.head_params, &acc_h, scale);
        }
        let mean = total / graphs.len() as f64;
        model.record.epoch_losses.push(mean);
        model.record.epochs_run = epoch + 1;
        log::debug!("target epoch {epoch}: loss {mean:.5}");
        if plateau.update(mean) {
            break;
        }
    }
    model.record.learning_rate = train.learning_rate;
    model.record.seed = train.seed;
    Ok(model)
}
