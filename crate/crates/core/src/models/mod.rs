//! Target graph-embedding models.

mod config;
mod encoder;
mod pooling;
mod target;

pub use config::{Activation, EncoderConfig, PoolingKind, TrainConfig, TrainingRecord};
pub(crate) use config::Plateau;
pub use encoder::{cluster_count, EncoderForward, GraphEncoder};
pub use pooling::{hierarchical_pool_layer, mean_pool, AuxLosses, Coarsened};
pub use target::{argmax, train_target, LossGradients, TrainedEncoder, HEAD_HIDDEN};
