//! Rows of the machine-readable result tables.

use serde::{Deserialize, Serialize};

pub const DATASETS_JSON: &str = "datasets.json";
pub const TARGETS_CSV: &str = "targets.csv";
pub const PROPERTY_CSV: &str = "property.csv";
pub const SUBGRAPH_CSV: &str = "subgraph.csv";
pub const RECONSTRUCTION_CSV: &str = "reconstruction.csv";
pub const DEFENSE_CSV: &str = "defense.csv";
pub const TRANSFER_CSV: &str = "transfer.csv";
pub const TRANSFER_JSON: &str = "transfer.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub graphs: usize,
    pub classes: usize,
    pub feature_dim: usize,
    pub avg_nodes: f64,
    pub avg_edges: f64,
    pub max_nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetRow {
    pub dataset: String,
    pub pooling: String,
    pub run: usize,
    pub seed: u64,
    pub epochs_run: usize,
    pub final_loss: f64,
    pub train_accuracy: f64,
    /// Accuracy on the graphs the attacks are evaluated on.
    pub test_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyRow {
    pub dataset: String,
    pub pooling: String,
    pub run: usize,
    pub property: String,
    pub k: usize,
    /// `attack`, `random` or `summarize`.
    pub method: String,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgraphRow {
    pub dataset: String,
    pub pooling: String,
    pub run: usize,
    pub sampler: String,
    pub ratio: f64,
    pub strategy: String,
    /// `joint` (trainable extractor) or `target_embedding` (frozen target model).
    pub arm: String,
    pub auc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionRow {
    pub dataset: String,
    pub pooling: String,
    pub run: usize,
    /// `wl` or `<statistic>_<measure>`, e.g. `degree_cosine`.
    pub metric: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefenseRow {
    pub dataset: String,
    pub pooling: String,
    pub run: usize,
    /// Empty for the undefended release.
    pub beta: Option<f64>,
    pub metric: String,
    pub value: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferRow {
    pub axis: String,
    pub attack: String,
    pub dataset: String,
    pub pooling: String,
    pub from: String,
    pub to: String,
    pub run: usize,
    pub metric: String,
    pub value: f64,
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_examples() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-12);
        assert!(mean_std(&[]).0.is_nan());
    }
}
