use std::fs;
use std::path::{Path, PathBuf};

use embedleak_harness::results::{DatasetSummary, PropertyRow, ReconstructionRow, SubgraphRow};
use embedleak_harness::{ExperimentConfig, Pipeline, Stage};

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn smoke() -> ExperimentConfig {
    ExperimentConfig::load(&workspace().join("configs/smoke.toml")).unwrap()
}

fn run(cfg: &ExperimentConfig, out: &Path) -> PathBuf {
    let mut p = Pipeline::new(cfg.clone(), workspace().join("data"), out).unwrap();
    p.run_all().unwrap();
    p.store().root().to_owned()
}

const TABLES: [&str; 7] = [
    "targets.csv",
    "property.csv",
    "subgraph.csv",
    "reconstruction.csv",
    "defense.csv",
    "transfer.csv",
    "report.md",
];

#[test]
fn smoke_run_is_reproducible_and_resumable() {
    let cfg = smoke();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run(&cfg, a.path());
    let rb = run(&cfg, b.path());
    assert_eq!(ra.file_name(), rb.file_name());
    for t in TABLES {
        let x = fs::read(ra.join(t)).unwrap_or_else(|_| panic!("missing {t}"));
        assert_eq!(x, fs::read(rb.join(t)).unwrap(), "{t} differs between runs");
    }
    let first = fs::read(ra.join("report.md")).unwrap();
    // second pass over the same directory reloads checkpoints
    run(&cfg, a.path());
    assert_eq!(first, fs::read(ra.join("report.md")).unwrap());
    assert!(ra.join("plots").read_dir().unwrap().count() > 0);

    let store = embedleak_harness::RunStore::existing(&ra).unwrap();
    let sub: Vec<SubgraphRow> = store.read_csv("subgraph.csv").unwrap();
    assert!(sub.iter().all(|r| (0.0..=1.0).contains(&r.auc)));
    assert!(sub.iter().any(|r| r.arm == "target_embedding"));
    let prop: Vec<PropertyRow> = store.read_csv("property.csv").unwrap();
    assert!(prop.iter().all(|r| (0.0..=1.0).contains(&r.accuracy)));
    let rec: Vec<ReconstructionRow> = store.read_csv("reconstruction.csv").unwrap();
    assert!(rec.iter().any(|r| r.metric == "wl"));
}

#[test]
fn seed_changes_results() {
    let mut cfg = smoke();
    cfg.attacks.clear();
    cfg.defense_enabled = false;
    cfg.transfer.clear();
    let dir = tempfile::tempdir().unwrap();
    let a = run(&cfg, dir.path());
    cfg.seed = 9;
    let b = run(&cfg, dir.path());
    assert_ne!(a, b);
    assert_ne!(fs::read(a.join("targets.csv")).unwrap(), fs::read(b.join("targets.csv")).unwrap());
}

#[test]
fn mutag_from_disk() {
    let cfg: ExperimentConfig = toml::from_str(
        r#"
        name = "mutag"
        datasets = ["MUTAG"]
        poolings = ["mean_pool"]
        attacks = ["property", "reconstruct"]
        runs = 1
        [encoder]
        mp_layers = 2
        hidden_dim = 8
        embedding_dim = 8
        [target]
        epochs = 3
        [property]
        ks = [2]
        properties = ["num_nodes"]
        hidden = [16]
        train = { epochs = 3 }
        [reconstruction]
        decoder_hidden = [16]
        train = { epochs = 1 }
        fine_tune = { epochs = 1 }
        "#,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut p = Pipeline::new(cfg, workspace().join("crates/core/tests/data"), dir.path()).unwrap();
    let ds: Vec<DatasetSummary> = p.ingest().unwrap();
    assert_eq!(ds[0].graphs, 188);
    assert_eq!(ds[0].classes, 2);
    let rows = p.property_attack().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(!p.reconstruction_attack().unwrap().is_empty());
}

#[test]
fn missing_dataset_fails_at_ingest() {
    let cfg = ExperimentConfig {
        datasets: vec!["NOPE".into()],
        ..ExperimentConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let mut p = Pipeline::new(cfg, dir.path().to_owned(), dir.path()).unwrap();
    let err = p.ingest().unwrap_err();
    assert_eq!(err.stage, Stage::Ingest);
}

#[test]
fn degree_features_replace_dataset_features() {
    let cfg: ExperimentConfig = toml::from_str(
        r#"
        datasets = ["MUTAG"]
        node_features = "degree_onehot"
        "#,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut p = Pipeline::new(cfg, workspace().join("crates/core/tests/data"), dir.path()).unwrap();
    let ds = p.ingest().unwrap();
    // MUTAG's largest degree is 4
    assert_eq!(ds[0].feature_dim, 5);
}
