//! Declarative experiment configuration (TOML).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use embedleak::attacks::subgraph::Aggregation;
use embedleak::graph::{BinningStrategy, GraphProperty};
use embedleak::models::{Activation, EncoderConfig, PoolingKind, TrainConfig};
use embedleak::samplers::{SamplerMethod, SamplerSpec};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Stage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Property,
    Subgraph,
    Reconstruct,
}

impl AttackKind {
    pub const ALL: [AttackKind; 3] = [AttackKind::Property, AttackKind::Subgraph, AttackKind::Reconstruct];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Property => "property",
            AttackKind::Subgraph => "subgraph",
            AttackKind::Reconstruct => "reconstruct",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "property" => Ok(AttackKind::Property),
            "subgraph" => Ok(AttackKind::Subgraph),
            "reconstruct" | "reconstruction" => Ok(AttackKind::Reconstruct),
            _ => Err(format!("unknown attack `{s}`")),
        }
    }
}

/// Shared target/extractor architecture; pooling comes from the cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSection {
    pub mp_layers: usize,
    pub hidden_dim: usize,
    pub embedding_dim: usize,
    pub activation: Activation,
}

impl Default for EncoderSection {
    fn default() -> Self {
        let e = EncoderConfig::default();
        EncoderSection {
            mp_layers: e.mp_layers,
            hidden_dim: e.hidden_dim,
            embedding_dim: e.embedding_dim,
            activation: e.activation,
        }
    }
}

impl EncoderSection {
    pub fn build(&self, pooling: PoolingKind) -> EncoderConfig {
        EncoderConfig {
            mp_layers: self.mp_layers,
            hidden_dim: self.hidden_dim,
            embedding_dim: self.embedding_dim,
            activation: self.activation,
            ..EncoderConfig::with_pooling(pooling)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropertySection {
    pub ks: Vec<usize>,
    pub properties: Vec<GraphProperty>,
    pub binning: BinningStrategy,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
}

impl Default for PropertySection {
    fn default() -> Self {
        PropertySection {
            ks: vec![2, 4, 6, 8],
            properties: GraphProperty::ALL.to_vec(),
            binning: BinningStrategy::default(),
            hidden: vec![256, 256],
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerEntry {
    pub method: SamplerMethod,
    pub ratio: f64,
}

impl SamplerEntry {
    pub fn spec(&self, seed: u64) -> SamplerSpec {
        SamplerSpec {
            method: self.method,
            ratio: self.ratio,
            seed,
            ..SamplerSpec::default()
        }
    }

    pub fn label(&self) -> String {
        format!("{}@{}", self.method, self.ratio)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubgraphSection {
    pub samplers: Vec<SamplerEntry>,
    pub strategies: Vec<Aggregation>,
    pub classifier_hidden: Vec<usize>,
    /// Also run the arm whose extractor is the frozen target model.
    pub target_baseline: bool,
    pub train: TrainConfig,
}

impl Default for SubgraphSection {
    fn default() -> Self {
        SubgraphSection {
            samplers: vec![SamplerEntry {
                method: SamplerMethod::ForestFire,
                ratio: 0.8,
            }],
            strategies: vec![Aggregation::ElementwiseDifference],
            classifier_hidden: vec![128, 32],
            target_baseline: false,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructionSection {
    /// Auxiliary graphs above this size are left out of auto-encoder training.
    pub max_nodes: Option<usize>,
    pub decoder_hidden: Vec<usize>,
    pub train: TrainConfig,
    pub fine_tune: TrainConfig,
    pub threshold: f64,
    pub pos_weight: f64,
}

impl Default for ReconstructionSection {
    fn default() -> Self {
        let r = embedleak::attacks::reconstruction::ReconstructionConfig::default();
        ReconstructionSection {
            max_nodes: None,
            decoder_hidden: r.decoder_hidden,
            train: r.train,
            fine_tune: r.fine_tune,
            threshold: r.threshold,
            pos_weight: r.pos_weight,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefenseSection {
    pub betas: Vec<f64>,
    /// Noise draws per β.
    pub repeats: usize,
    /// Bucket count of the property attack under the sweep.
    pub property_k: usize,
    pub sampler: SamplerEntry,
    pub strategy: Aggregation,
}

impl Default for DefenseSection {
    fn default() -> Self {
        DefenseSection {
            betas: vec![0.0, 0.5, 1.0, 2.0, 4.0],
            repeats: 1,
            property_k: 2,
            sampler: SamplerEntry {
                method: SamplerMethod::RandomWalk,
                ratio: 0.8,
            },
            strategy: Aggregation::ElementwiseDifference,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferAxis {
    /// Auxiliary graphs from `from`, target model and test graphs from `to`.
    Dataset,
    /// Subgraph attack trained with sampler `from`, tested with sampler `to`.
    Sampler,
    /// Subgraph-attack extractor pooling `from` against a target with pooling `to`.
    Model,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferSpec {
    pub axis: TransferAxis,
    pub from: String,
    pub to: String,
    pub attack: AttackKind,
    /// Dataset for sampler/model transfer.
    #[serde(default)]
    pub dataset: Option<String>,
    /// Target pooling for dataset/sampler transfer.
    #[serde(default)]
    pub pooling: Option<PoolingKind>,
    /// Bucket count for property transfer.
    #[serde(default)]
    pub k: Option<usize>,
}

/// Node features the models see.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeFeatures {
    /// Attributes and one-hot node labels from the dataset files.
    #[default]
    Original,
    /// One-hot node degree, replacing the dataset's own features.
    DegreeOnehot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub datasets: Vec<String>,
    pub data_root: Option<PathBuf>,
    pub node_features: NodeFeatures,
    pub poolings: Vec<PoolingKind>,
    pub attacks: Vec<AttackKind>,
    pub defense_enabled: bool,
    pub runs: usize,
    pub seed: u64,
    pub encoder: EncoderSection,
    pub target: TrainConfig,
    pub property: PropertySection,
    pub subgraph: SubgraphSection,
    pub reconstruction: ReconstructionSection,
    pub defense: DefenseSection,
    pub transfer: Vec<TransferSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            datasets: Vec::new(),
            data_root: None,
            node_features: NodeFeatures::Original,
            poolings: PoolingKind::ALL.to_vec(),
            attacks: Vec::new(),
            defense_enabled: false,
            runs: 5,
            seed: 0,
            encoder: EncoderSection::default(),
            target: TrainConfig::default(),
            property: PropertySection::default(),
            subgraph: SubgraphSection::default(),
            reconstruction: ReconstructionSection::default(),
            defense: DefenseSection::default(),
            transfer: Vec::new(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::new(Stage::Config, msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.runs == 0 {
            return Err(invalid("runs must be at least 1"));
        }
        if self.datasets.is_empty() {
            return Err(invalid("no datasets listed"));
        }
        if self.poolings.is_empty() {
            return Err(invalid("no poolings listed"));
        }
        for p in &self.poolings {
            self.encoder.build(*p).validate().map_err(|e| invalid(e.to_string()))?;
        }
        if self.attacks.contains(&AttackKind::Property) {
            if self.property.ks.is_empty() || self.property.properties.is_empty() {
                return Err(invalid("property attack needs at least one k and one property"));
            }
            if self.property.ks.iter().any(|&k| k < 2) {
                return Err(invalid("bucket counts must be at least 2"));
            }
        }
        if self.attacks.contains(&AttackKind::Subgraph)
            && (self.subgraph.samplers.is_empty() || self.subgraph.strategies.is_empty())
        {
            return Err(invalid("subgraph attack needs at least one sampler and one strategy"));
        }
        for s in self.subgraph.samplers.iter().chain([&self.defense.sampler]) {
            s.spec(0).validate().map_err(|e| invalid(e.to_string()))?;
        }
        if self.defense_enabled {
            if self.defense.repeats == 0 {
                return Err(invalid("defense repeats must be at least 1"));
            }
            if self.defense.betas.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
                return Err(invalid("defense betas must be finite and non-negative"));
            }
        }
        for t in &self.transfer {
            match t.axis {
                TransferAxis::Dataset => {
                    for d in [&t.from, &t.to] {
                        if !self.datasets.contains(d) {
                            return Err(invalid(format!("transfer dataset `{d}` is not listed in datasets")));
                        }
                    }
                }
                TransferAxis::Sampler | TransferAxis::Model => {
                    if t.attack != AttackKind::Subgraph {
                        return Err(invalid("sampler and model transfer apply to the subgraph attack"));
                    }
                    let d = t.dataset.as_ref().ok_or_else(|| invalid("sampler/model transfer needs `dataset`"))?;
                    if !self.datasets.contains(d) {
                        return Err(invalid(format!("transfer dataset `{d}` is not listed in datasets")));
                    }
                    if t.axis == TransferAxis::Model {
                        for p in [&t.from, &t.to] {
                            p.parse::<PoolingKind>().map_err(|e| invalid(e.to_string()))?;
                        }
                    } else {
                        for s in [&t.from, &t.to] {
                            parse_sampler(s)?;
                        }
                    }
                }
            }
            if t.attack == AttackKind::Reconstruct {
                return Err(invalid("transfer is defined for the property and subgraph attacks"));
            }
        }
        Ok(())
    }

    pub fn target_config(&self, pooling: PoolingKind) -> EncoderConfig {
        self.encoder.build(pooling)
    }
}

/// Parses `method@ratio`, e.g. `forest_fire@0.8`.
pub fn parse_sampler(s: &str) -> Result<SamplerEntry, HarnessError> {
    let (m, r) = s
        .split_once('@')
        .ok_or_else(|| invalid(format!("sampler `{s}` is not of the form method@ratio")))?;
    let method: SamplerMethod = m.parse().map_err(|e: embedleak::Error| invalid(e.to_string()))?;
    let ratio: f64 = r.parse().map_err(|_| invalid(format!("bad sampling ratio in `{s}`")))?;
    let entry = SamplerEntry { method, ratio };
    entry.spec(0).validate().map_err(|e| invalid(e.to_string()))?;
    Ok(entry)
}
