//! Evaluation metrics: WL kernel, statistic profiles, histogram similarities, accuracy and AUC.

mod classification;
mod similarity;
mod stats;
mod wl;

pub use classification::{accuracy, roc_auc};
pub use similarity::{cosine, jensen_shannon, similarity, wasserstein, SimilarityKind};
pub use stats::{
    betweenness, closeness, local_clustering, stat_profile, stat_profile_pair, StatProfile, Statistic, STAT_BINS,
};
pub use wl::{wl_kernel, WlLabeler, WL_ITERATIONS};
