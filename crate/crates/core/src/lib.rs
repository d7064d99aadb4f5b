//! Graph embedding models and the inference attacks that recover information
//! about a graph from its released whole-graph embedding.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the precision for the common entry points.

pub mod attacks;
pub mod defense;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod oracle;
pub mod samplers;
pub mod scalar;

pub use error::{Error, Result};
pub use graph::{Graph, GraphDataset, GraphProperty};
pub use models::{EncoderConfig, PoolingKind, TrainConfig};
pub use scalar::Scalar;

pub type Encoder64 = models::GraphEncoder<f64>;
pub type Encoder32 = models::GraphEncoder<f32>;
pub type Target64 = models::TrainedEncoder<f64>;
pub type Target32 = models::TrainedEncoder<f32>;
pub type PropertyAttack64 = attacks::property::PropertyAttackModel<f64>;
pub type PropertyAttack32 = attacks::property::PropertyAttackModel<f32>;
pub type SubgraphAttack64 = attacks::subgraph::SubgraphAttackModel<f64>;
pub type SubgraphAttack32 = attacks::subgraph::SubgraphAttackModel<f32>;
pub type AutoEncoder64 = attacks::reconstruction::GraphAutoEncoder<f64>;
pub type AutoEncoder32 = attacks::reconstruction::GraphAutoEncoder<f32>;
