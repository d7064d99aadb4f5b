use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Graph-pooling head placed after message passing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolingKind {
    MeanPool,
    DiffPool,
    MinCutPool,
}

impl PoolingKind {
    pub const ALL: [PoolingKind; 3] = [PoolingKind::MeanPool, PoolingKind::DiffPool, PoolingKind::MinCutPool];

    pub fn name(self) -> &'static str {
        match self {
            PoolingKind::MeanPool => "mean_pool",
            PoolingKind::DiffPool => "diff_pool",
            PoolingKind::MinCutPool => "min_cut_pool",
        }
    }

    /// Cluster ratios of the hierarchical levels, relative to the input node count.
    pub fn default_ratios(self) -> Vec<f64> {
        match self {
            PoolingKind::MeanPool => vec![],
            PoolingKind::DiffPool => vec![0.25, 0.25 * 0.25],
            PoolingKind::MinCutPool => vec![0.5, 0.5 * 0.5],
        }
    }
}

impl fmt::Display for PoolingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PoolingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match key.as_str() {
            "meanpool" | "mean" => Ok(PoolingKind::MeanPool),
            "diffpool" | "diff" => Ok(PoolingKind::DiffPool),
            "mincutpool" | "mincut" => Ok(PoolingKind::MinCutPool),
            _ => Err(Error::InvalidArgument(format!("unknown pooling `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

/// Architecture of a graph encoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub mp_layers: usize,
    pub hidden_dim: usize,
    pub embedding_dim: usize,
    pub pooling: PoolingKind,
    /// Per-level cluster ratios; empty means the pooling kind's defaults.
    pub ratios: Vec<f64>,
    pub activation: Activation,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            mp_layers: 3,
            hidden_dim: 192,
            embedding_dim: 192,
            pooling: PoolingKind::MeanPool,
            ratios: Vec::new(),
            activation: Activation::Relu,
        }
    }
}

impl EncoderConfig {
    pub fn with_pooling(pooling: PoolingKind) -> Self {
        EncoderConfig {
            pooling,
            ..Self::default()
        }
    }

    pub fn effective_ratios(&self) -> Vec<f64> {
        match self.pooling {
            PoolingKind::MeanPool => Vec::new(),
            _ if self.ratios.is_empty() => self.pooling.default_ratios(),
            _ => self.ratios.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mp_layers == 0 || self.hidden_dim == 0 || self.embedding_dim == 0 {
            return Err(Error::InvalidArgument("encoder layer count and widths must be positive".into()));
        }
        if self.effective_ratios().iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
            return Err(Error::InvalidArgument("pooling ratios must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Optimisation settings shared by every trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Epochs without relative improvement of the epoch loss before stopping; 0 disables.
    pub patience: usize,
    pub min_rel_improvement: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            learning_rate: 1e-3,
            batch_size: 32,
            patience: 10,
            min_rel_improvement: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_epochs(epochs: usize, seed: u64) -> Self {
        TrainConfig {
            epochs,
            seed,
            ..Self::default()
        }
    }
}

/// Tracks the plateau rule of [`TrainConfig`].
#[derive(Debug)]
pub(crate) struct Plateau {
    best: f64,
    stale: usize,
    patience: usize,
    min_rel: f64,
}

impl Plateau {
    pub(crate) fn new(cfg: &TrainConfig) -> Self {
        Plateau {
            best: f64::INFINITY,
            stale: 0,
            patience: cfg.patience,
            min_rel: cfg.min_rel_improvement,
        }
    }

    /// Records an epoch loss; true when training should stop.
    pub(crate) fn update(&mut self, loss: f64) -> bool {
        if !self.best.is_finite() || loss < self.best - self.min_rel * self.best.abs().max(1e-12) {
            self.best = loss;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        self.patience > 0 && self.stale >= self.patience
    }
}

/// Summary of one training run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub epochs_run: usize,
    pub epoch_losses: Vec<f64>,
    pub learning_rate: f64,
    pub seed: u64,
}

impl TrainingRecord {
    pub fn initial_loss(&self) -> Option<f64> {
        self.epoch_losses.first().copied()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_losses.last().copied()
    }
}
