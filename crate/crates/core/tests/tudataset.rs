use std::path::Path;

use embedleak::graph::{load_tudataset, split_dataset};
use embedleak::GraphProperty;

fn data() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data"))
}

#[test]
fn mutag_shape() {
    let ds = load_tudataset(data(), "MUTAG").unwrap();
    assert_eq!(ds.len(), 188);
    assert_eq!(ds.num_classes, 2);
    assert_eq!(ds.max_nodes(), 28);
    assert!((ds.avg_nodes() - 17.93).abs() < 0.01, "{}", ds.avg_nodes());
    assert!((ds.avg_edges() - 19.79).abs() < 0.01, "{}", ds.avg_edges());
    let positives = ds.graphs.iter().filter(|g| g.label() == 1).count();
    assert_eq!(positives, 125);
    for g in &ds.graphs {
        assert_eq!(g.feature_dim(), ds.feature_dim());
        for row in g.features().rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12, "features are one-hot");
        }
        assert!(GraphProperty::Diameter.compute(g) >= 1.0);
    }
}

#[test]
fn mutag_splits_partition_the_graphs() {
    let ds = load_tudataset(data(), "MUTAG").unwrap();
    let s = split_dataset(ds.len(), 3).unwrap();
    let mut all: Vec<usize> = [&s.target_train, &s.attack_train, &s.attack_test]
        .iter()
        .flat_map(|v| v.iter().copied())
        .collect();
    all.sort_unstable();
    assert_eq!(all, (0..188).collect::<Vec<_>>());
}
