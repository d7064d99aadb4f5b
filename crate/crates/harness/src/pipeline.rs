//! Stage-by-stage orchestration of one experiment configuration.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::rc::Rc;

use embedleak::attacks::property::{
    baseline_random, baseline_summarize, build_schemes, build_training_set, train_property_attack,
    PropertyAttackConfig, PropertyAttackModel,
};
use embedleak::attacks::reconstruction::{
    evaluate_reconstruction, fine_tune_decoder, train_autoencoder, GraphAutoEncoder, ReconstructionConfig,
};
use embedleak::attacks::subgraph::{
    generate_samples, new_extractor, train_subgraph_attack, Aggregation, SubgraphAttackConfig, SubgraphAttackModel,
};
use embedleak::defense::{evaluate_release, sweep, SweepAttacks};
use embedleak::graph::{
    degree_onehot_features, generators, load_tudataset, max_degree, split_dataset, DataSplit, Graph, GraphDataset,
};
use embedleak::models::{train_target, EncoderConfig, PoolingKind, TrainConfig, TrainedEncoder};
use embedleak::oracle::{AccessLog, EmbeddingOracle};
use embedleak::samplers::SamplerSpec;
use ndarray::{concatenate, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{
    parse_sampler, AttackKind, ExperimentConfig, NodeFeatures, SamplerEntry, TransferAxis, TransferSpec,
};
use crate::error::{AtStage, HarnessError, HarnessResult, Stage};
use crate::results::*;
use crate::store::{cell_seed, RunStore};

type Target = TrainedEncoder<f64>;

/// Name prefix of generated datasets, e.g. `synthetic-120`.
pub const SYNTHETIC_PREFIX: &str = "synthetic-";

/// Loads `name` from `root`, or generates it for `synthetic-<count>`.
pub fn load_dataset(root: &Path, name: &str, seed: u64) -> HarnessResult<GraphDataset> {
    if let Some(count) = name.strip_prefix(SYNTHETIC_PREFIX) {
        let count: usize = count
            .parse()
            .map_err(|_| HarnessError::new(Stage::Ingest, format!("bad synthetic dataset size in `{name}`")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(seed, &["synthetic", name]));
        return Ok(generators::synthetic_dataset(name, count, 8..=20, 3, &mut rng));
    }
    load_tudataset(root, name).at(Stage::Ingest)
}

/// Zero-pads node features to `dim` columns.
fn pad_features(ds: &GraphDataset, dim: usize) -> HarnessResult<GraphDataset> {
    let graphs = ds
        .graphs
        .iter()
        .map(|g| {
            let extra = Array2::zeros((g.node_count(), dim - g.feature_dim()));
            let feats = concatenate(Axis(1), &[g.features().view(), extra.view()]).at(Stage::Ingest)?;
            g.clone().with_features(feats).at(Stage::Ingest)
        })
        .collect::<HarnessResult<Vec<_>>>()?;
    GraphDataset::new(ds.name.clone(), graphs, ds.num_classes).at(Stage::Ingest)
}

/// Replaces every graph's features with a one-hot of its node degrees.
fn degree_features(ds: &GraphDataset) -> HarnessResult<GraphDataset> {
    let max_deg = max_degree(&ds.graphs);
    let graphs = ds.graphs.iter().map(|g| degree_onehot_features(g, max_deg)).collect();
    GraphDataset::new(ds.name.clone(), graphs, ds.num_classes).at(Stage::Ingest)
}

fn select(ds: &GraphDataset, idx: &[usize]) -> Vec<Graph> {
    ds.select(idx)
}

fn seeded(train: &TrainConfig, seed: u64) -> TrainConfig {
    TrainConfig { seed, ..train.clone() }
}

fn key(parts: &[&str]) -> String {
    parts.join("-")
}

pub struct Pipeline {
    cfg: ExperimentConfig,
    data_root: PathBuf,
    store: RunStore,
    /// Persist attack models and embeddings alongside the tables.
    pub persist_models: bool,
    datasets: BTreeMap<String, GraphDataset>,
    splits: HashMap<(String, usize), DataSplit>,
    targets: HashMap<(String, PoolingKind, usize), Rc<Target>>,
    property_models: HashMap<String, Rc<PropertyAttackModel<f64>>>,
    subgraph_models: HashMap<String, Rc<SubgraphAttackModel<f64>>>,
    autoencoders: HashMap<String, Rc<GraphAutoEncoder<f64>>>,
}

impl Pipeline {
    pub fn new(cfg: ExperimentConfig, data_root: PathBuf, out_dir: &Path) -> HarnessResult<Self> {
        cfg.validate()?;
        let store = RunStore::open(out_dir, &cfg)?;
        Ok(Pipeline {
            cfg,
            data_root,
            store,
            persist_models: true,
            datasets: BTreeMap::new(),
            splits: HashMap::new(),
            targets: HashMap::new(),
            property_models: HashMap::new(),
            subgraph_models: HashMap::new(),
            autoencoders: HashMap::new(),
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn store(&self) -> &RunStore {
        &self.store
    }

    fn runs(&self) -> std::ops::Range<usize> {
        0..self.cfg.runs
    }

    /// Loads every listed dataset; datasets compared across a transfer share a feature width.
    pub fn ingest(&mut self) -> HarnessResult<Vec<DatasetSummary>> {
        if self.datasets.is_empty() {
            let mut loaded = BTreeMap::new();
            for name in &self.cfg.datasets {
                let mut ds = load_dataset(&self.data_root, name, self.cfg.seed)?;
                if self.cfg.node_features == NodeFeatures::DegreeOnehot {
                    ds = degree_features(&ds)?;
                }
                if ds.len() < embedleak::graph::MIN_SPLIT_SIZE {
                    return Err(HarnessError::new(Stage::Ingest, format!("dataset {name} has only {} graphs", ds.len())));
                }
                log::info!("ingested {name}: {} graphs, {:.1} nodes on average", ds.len(), ds.avg_nodes());
                loaded.insert(name.clone(), ds);
            }
            let linked: Vec<&String> = self
                .cfg
                .transfer
                .iter()
                .filter(|t| t.axis == TransferAxis::Dataset)
                .flat_map(|t| [&t.from, &t.to])
                .collect();
            let width = linked.iter().map(|n| loaded[*n].feature_dim()).max().unwrap_or(0);
            for name in linked {
                if loaded[name].feature_dim() < width {
                    let padded = pad_features(&loaded[name], width)?;
                    loaded.insert(name.clone(), padded);
                }
            }
            self.datasets = loaded;
        }
        let summaries: Vec<DatasetSummary> = self
            .datasets
            .values()
            .map(|d| DatasetSummary {
                name: d.name.clone(),
                graphs: d.len(),
                classes: d.num_classes,
                feature_dim: d.feature_dim(),
                avg_nodes: d.avg_nodes(),
                avg_edges: d.avg_edges(),
                max_nodes: d.max_nodes(),
            })
            .collect();
        self.store.write_json(DATASETS_JSON, &summaries)?;
        Ok(summaries)
    }

    fn dataset(&self, name: &str) -> HarnessResult<&GraphDataset> {
        self.datasets
            .get(name)
            .ok_or_else(|| HarnessError::new(Stage::Ingest, format!("dataset {name} is not loaded")))
    }

    pub fn split(&mut self, name: &str, run: usize) -> HarnessResult<DataSplit> {
        let k = (name.to_string(), run);
        if let Some(s) = self.splits.get(&k) {
            return Ok(s.clone());
        }
        let len = self.dataset(name)?.len();
        let split = split_dataset(len, cell_seed(self.cfg.seed, &["split", name, &run.to_string()])).at(Stage::Split)?;
        self.store.write_json(&format!("splits/{name}-run{run}.json"), &split)?;
        self.splits.insert(k, split.clone());
        Ok(split)
    }

    /// Trained target for one cell, loaded from its checkpoint when present.
    pub fn target(&mut self, name: &str, pooling: PoolingKind, run: usize) -> HarnessResult<Rc<Target>> {
        let k = (name.to_string(), pooling, run);
        if let Some(t) = self.targets.get(&k) {
            return Ok(t.clone());
        }
        let seed = cell_seed(self.cfg.seed, &["target", name, pooling.name(), &run.to_string()]);
        let path = self.store.path(&format!("targets/{name}-{pooling}-seed{seed}.json"));
        let target = if path.is_file() {
            Target::load(&path).at(Stage::TrainTarget)?
        } else {
            let split = self.split(name, run)?;
            let ds = self.dataset(name)?;
            let train = select(ds, &split.target_train);
            log::info!("training target {name}/{pooling}/run{run} on {} graphs", train.len());
            let t: Target =
                train_target(&train, ds.num_classes, self.cfg.target_config(pooling), &seeded(&self.cfg.target, seed))
                    .at(Stage::TrainTarget)?;
            std::fs::create_dir_all(path.parent().expect("targets dir")).at(Stage::Store)?;
            t.save(&path).at(Stage::Store)?;
            t
        };
        let t = Rc::new(target);
        self.targets.insert(k, t.clone());
        Ok(t)
    }

    fn save_model<M: Serialize>(&self, rel: &str, model: &M) -> HarnessResult<()> {
        if self.persist_models {
            self.store.write_json(rel, model)?;
        }
        Ok(())
    }

    pub fn train_targets(&mut self) -> HarnessResult<Vec<TargetRow>> {
        self.ingest()?;
        let mut rows = Vec::new();
        for name in self.cfg.datasets.clone() {
            for &pooling in &self.cfg.poolings.clone() {
                for run in self.runs() {
                    let t = self.target(&name, pooling, run)?;
                    let split = self.split(&name, run)?;
                    let ds = self.dataset(&name)?;
                    let test = select(ds, &split.attack_test);
                    rows.push(TargetRow {
                        dataset: name.clone(),
                        pooling: pooling.to_string(),
                        run,
                        seed: t.record.seed,
                        epochs_run: t.record.epochs_run,
                        final_loss: t.record.final_loss().unwrap_or(f64::NAN),
                        train_accuracy: t.accuracy(&select(ds, &split.target_train)).at(Stage::TrainTarget)?,
                        test_accuracy: t.accuracy(&test).at(Stage::TrainTarget)?,
                    });
                    if self.persist_models {
                        let emb = t.query_all(&test).at(Stage::TrainTarget)?;
                        let rows: Vec<(usize, Vec<f64>)> = split
                            .attack_test
                            .iter()
                            .zip(emb.rows())
                            .map(|(&i, r)| (i, r.to_vec()))
                            .collect();
                        self.store.write_json(&format!("embeddings/{name}-{pooling}-run{run}.json"), &rows)?;
                    }
                    self.store.write_csv(TARGETS_CSV, &rows)?;
                }
            }
        }
        Ok(rows)
    }

    /// Property attack trained on auxiliary graphs of `aux_name` against `target`.
    fn property_model(
        &mut self,
        model_key: &str,
        target: &Target,
        aux_name: &str,
        run: usize,
        k: usize,
    ) -> HarnessResult<Rc<PropertyAttackModel<f64>>> {
        if let Some(m) = self.property_models.get(model_key) {
            return Ok(m.clone());
        }
        let rel = format!("models/property/{model_key}.json");
        let model = match self.store.read_json::<PropertyAttackModel<f64>>(&rel)? {
            Some(m) => m,
            None => {
                let split = self.split(aux_name, run)?;
                let aux = select(self.dataset(aux_name)?, &split.attack_train);
                let p = &self.cfg.property;
                let schemes = build_schemes(&aux, &p.properties, k, p.binning).at(Stage::PropertyAttack)?;
                let log = AccessLog::new(target);
                let samples = build_training_set(&aux, &log, &schemes).at(Stage::PropertyAttack)?;
                log.assert_only(&split.attack_train).at(Stage::PropertyAttack)?;
                let cfg = PropertyAttackConfig {
                    hidden: p.hidden.clone(),
                    train: seeded(&p.train, cell_seed(self.cfg.seed, &["property", model_key])),
                };
                let m = train_property_attack(&samples, schemes, &cfg).at(Stage::PropertyAttack)?;
                self.save_model(&rel, &m)?;
                m
            }
        };
        let m = Rc::new(model);
        self.property_models.insert(model_key.to_string(), m.clone());
        Ok(m)
    }

    pub fn property_attack(&mut self) -> HarnessResult<Vec<PropertyRow>> {
        self.ingest()?;
        let mut rows = Vec::new();
        for name in self.cfg.datasets.clone() {
            for pooling in self.cfg.poolings.clone() {
                for run in self.runs() {
                    let target = self.target(&name, pooling, run)?;
                    let split = self.split(&name, run)?;
                    for k in self.cfg.property.ks.clone() {
                        let mk = key(&[&name, pooling.name(), &format!("run{run}"), &format!("k{k}")]);
                        let model = self.property_model(&mk, &target, &name, run, k)?;
                        let ds = self.dataset(&name)?;
                        let aux = select(ds, &split.attack_train);
                        let test = select(ds, &split.attack_test);
                        let test_set = build_training_set(&test, &*target, model.schemes()).at(Stage::PropertyAttack)?;
                        let acc = model.evaluate_accuracy(&test_set).at(Stage::PropertyAttack)?;
                        for (scheme, a) in model.schemes().iter().zip(acc) {
                            let row = |method: &str, accuracy: f64| PropertyRow {
                                dataset: name.clone(),
                                pooling: pooling.to_string(),
                                run,
                                property: scheme.property.to_string(),
                                k,
                                method: method.into(),
                                accuracy,
                            };
                            rows.push(row("attack", a));
                            rows.push(row("random", baseline_random(scheme.num_bins())));
                            let s = baseline_summarize(&aux, &test, scheme).at(Stage::PropertyAttack)?;
                            rows.push(row("summarize", s));
                        }
                        log::info!("property {mk} done");
                        self.store.write_csv(PROPERTY_CSV, &rows)?;
                    }
                }
            }
        }
        Ok(rows)
    }

    fn sampler_seed(&self, phase: &str, cell: &str, sampler: &SamplerEntry) -> u64 {
        cell_seed(self.cfg.seed, &[phase, cell, &sampler.label()])
    }

    /// Subgraph attack whose training samples come from `aux_name`'s auxiliary split.
    #[allow(clippy::too_many_arguments)]
    fn subgraph_model(
        &mut self,
        model_key: &str,
        target: &Target,
        aux_name: &str,
        run: usize,
        sampler: &SamplerEntry,
        strategy: Aggregation,
        extractor: Option<EncoderConfig>,
    ) -> HarnessResult<Rc<SubgraphAttackModel<f64>>> {
        if let Some(m) = self.subgraph_models.get(model_key) {
            return Ok(m.clone());
        }
        let rel = format!("models/subgraph/{model_key}.json");
        let model = match self.store.read_json::<SubgraphAttackModel<f64>>(&rel)? {
            Some(m) => m,
            None => {
                let split = self.split(aux_name, run)?;
                let aux = select(self.dataset(aux_name)?, &split.attack_train);
                let cell = key(&[aux_name, &format!("run{run}")]);
                let spec = sampler.spec(self.sampler_seed("subgraph-train", &cell, sampler));
                let log = AccessLog::new(target);
                let samples = generate_samples(&aux, &log, &spec).at(Stage::SubgraphAttack)?;
                log.assert_only(&split.attack_train).at(Stage::SubgraphAttack)?;
                let s = &self.cfg.subgraph;
                let seed = cell_seed(self.cfg.seed, &["subgraph", model_key]);
                let cfg = SubgraphAttackConfig {
                    strategy,
                    classifier_hidden: s.classifier_hidden.clone(),
                    extractor: extractor.clone(),
                    train: seeded(&s.train, seed),
                };
                let m = match extractor {
                    Some(arch) => {
                        let e = new_extractor(arch, &samples, seed).at(Stage::SubgraphAttack)?;
                        train_subgraph_attack(&samples, e, true, &cfg)
                    }
                    None => train_subgraph_attack(&samples, target.encoder().clone(), false, &cfg),
                }
                .at(Stage::SubgraphAttack)?;
                self.save_model(&rel, &m)?;
                m
            }
        };
        let m = Rc::new(model);
        self.subgraph_models.insert(model_key.to_string(), m.clone());
        Ok(m)
    }

    /// Sampler spec used to build evaluation samples from `test_name`'s test split.
    fn test_spec(&self, test_name: &str, run: usize, sampler: &SamplerEntry) -> SamplerSpec {
        let cell = key(&[test_name, &format!("run{run}")]);
        sampler.spec(self.sampler_seed("subgraph-test", &cell, sampler))
    }

    pub fn subgraph_attack(&mut self) -> HarnessResult<Vec<SubgraphRow>> {
        self.ingest()?;
        let mut rows = Vec::new();
        for name in self.cfg.datasets.clone() {
            for pooling in self.cfg.poolings.clone() {
                for run in self.runs() {
                    let target = self.target(&name, pooling, run)?;
                    let split = self.split(&name, run)?;
                    let test = select(self.dataset(&name)?, &split.attack_test);
                    for sampler in self.cfg.subgraph.samplers.clone() {
                        let samples = generate_samples(&test, &*target, &self.test_spec(&name, run, &sampler))
                            .at(Stage::SubgraphAttack)?;
                        let mut arms: Vec<(Aggregation, &str)> =
                            self.cfg.subgraph.strategies.iter().map(|&s| (s, "joint")).collect();
                        if self.cfg.subgraph.target_baseline {
                            arms.extend(self.cfg.subgraph.strategies.iter().map(|&s| (s, "target_embedding")));
                        }
                        for (strategy, arm) in arms {
                            let mk = self.subgraph_key(&name, pooling, run, &sampler, strategy, arm);
                            let extractor = (arm == "joint").then(|| self.cfg.target_config(pooling));
                            let model = self.subgraph_model(&mk, &target, &name, run, &sampler, strategy, extractor)?;
                            let auc = model.evaluate_auc(&samples).at(Stage::SubgraphAttack)?;
                            log::info!("subgraph {mk}: AUC {auc:.4}");
                            rows.push(SubgraphRow {
                                dataset: name.clone(),
                                pooling: pooling.to_string(),
                                run,
                                sampler: sampler.method.to_string(),
                                ratio: sampler.ratio,
                                strategy: strategy.to_string(),
                                arm: arm.into(),
                                auc,
                            });
                            self.store.write_csv(SUBGRAPH_CSV, &rows)?;
                        }
                    }
                }
            }
        }
        Ok(rows)
    }

    fn subgraph_key(
        &self,
        name: &str,
        pooling: PoolingKind,
        run: usize,
        sampler: &SamplerEntry,
        strategy: Aggregation,
        arm: &str,
    ) -> String {
        key(&[name, pooling.name(), &format!("run{run}"), &sampler.label(), strategy.name(), arm])
    }

    fn reconstruction_config(&self, seed: u64, fine_tune_seed: u64) -> ReconstructionConfig {
        let r = &self.cfg.reconstruction;
        ReconstructionConfig {
            encoder: self.cfg.target_config(PoolingKind::MeanPool),
            decoder_hidden: r.decoder_hidden.clone(),
            train: seeded(&r.train, seed),
            fine_tune: seeded(&r.fine_tune, fine_tune_seed),
            threshold: r.threshold,
            pos_weight: r.pos_weight,
            ..ReconstructionConfig::default()
        }
    }

    fn within_size(&self, graphs: Vec<Graph>) -> HarnessResult<Vec<Graph>> {
        let kept: Vec<Graph> = match self.cfg.reconstruction.max_nodes {
            Some(m) => graphs.into_iter().filter(|g| g.node_count() <= m).collect(),
            None => graphs,
        };
        if kept.is_empty() {
            return Err(HarnessError::new(Stage::Reconstruction, "no graphs within reconstruction.max_nodes"));
        }
        Ok(kept)
    }

    /// Pre-trained auto-encoder for a dataset and run, fine-tuned against `target`.
    fn autoencoder(&mut self, name: &str, pooling: PoolingKind, run: usize, target: &Target) -> HarnessResult<Rc<GraphAutoEncoder<f64>>> {
        let tuned_key = key(&[name, pooling.name(), &format!("run{run}")]);
        if let Some(a) = self.autoencoders.get(&tuned_key) {
            return Ok(a.clone());
        }
        let split = self.split(name, run)?;
        let aux = self.within_size(select(self.dataset(name)?, &split.attack_train))?;
        let base_key = key(&[name, &format!("run{run}"), "pretrained"]);
        let rc = self.reconstruction_config(
            cell_seed(self.cfg.seed, &["autoencoder", &base_key]),
            cell_seed(self.cfg.seed, &["fine-tune", &tuned_key]),
        );
        let base = match self.autoencoders.get(&base_key) {
            Some(a) => a.clone(),
            None => {
                log::info!("pre-training auto-encoder {base_key} on {} graphs", aux.len());
                let a = Rc::new(train_autoencoder::<f64>(&aux, &rc).at(Stage::Reconstruction)?);
                self.autoencoders.insert(base_key, a.clone());
                a
            }
        };
        let mut ae = (*base).clone();
        let log = AccessLog::new(target);
        fine_tune_decoder(&mut ae, &aux, &log, &rc).at(Stage::Reconstruction)?;
        log.assert_only(&split.attack_train).at(Stage::Reconstruction)?;
        self.save_model(&format!("models/reconstruction/{tuned_key}.json"), &ae)?;
        let ae = Rc::new(ae);
        self.autoencoders.insert(tuned_key, ae.clone());
        Ok(ae)
    }

    pub fn reconstruction_attack(&mut self) -> HarnessResult<Vec<ReconstructionRow>> {
        self.ingest()?;
        let mut rows = Vec::new();
        for name in self.cfg.datasets.clone() {
            for pooling in self.cfg.poolings.clone() {
                for run in self.runs() {
                    let target = self.target(&name, pooling, run)?;
                    let ae = self.autoencoder(&name, pooling, run, &target)?;
                    let split = self.split(&name, run)?;
                    let test = self.within_size(select(self.dataset(&name)?, &split.attack_test))?;
                    let scores = evaluate_reconstruction(&ae, &*target, &test).at(Stage::Reconstruction)?;
                    let row = |metric: String, value: f64| ReconstructionRow {
                        dataset: name.clone(),
                        pooling: pooling.to_string(),
                        run,
                        metric,
                        value,
                    };
                    rows.push(row("wl".into(), scores.wl));
                    for (s, k, v) in &scores.stats {
                        rows.push(row(format!("{}_{}", s.name(), k.name()), *v));
                    }
                    rows.push(row("empty_fraction".into(), scores.empty as f64 / scores.graphs as f64));
                    log::info!("reconstruction {name}/{pooling}/run{run}: WL {:.4}", scores.wl);
                    self.store.write_csv(RECONSTRUCTION_CSV, &rows)?;
                }
            }
        }
        Ok(rows)
    }

    /// Non-adaptive sweep: attacks trained on clean embeddings, evaluated on released ones.
    pub fn defense(&mut self) -> HarnessResult<Vec<DefenseRow>> {
        self.ingest()?;
        let d = self.cfg.defense.clone();
        let mut rows = Vec::new();
        for name in self.cfg.datasets.clone() {
            for pooling in self.cfg.poolings.clone() {
                for run in self.runs() {
                    let target = self.target(&name, pooling, run)?;
                    let run_tag = format!("run{run}");
                    let property = if self.cfg.attacks.contains(&AttackKind::Property) {
                        let mk = key(&[&name, pooling.name(), &run_tag, &format!("k{}", d.property_k)]);
                        Some(self.property_model(&mk, &target, &name, run, d.property_k)?)
                    } else {
                        None
                    };
                    let subgraph = if self.cfg.attacks.contains(&AttackKind::Subgraph) {
                        let mk = self.subgraph_key(&name, pooling, run, &d.sampler, d.strategy, "joint");
                        let extractor = Some(self.cfg.target_config(pooling));
                        let m = self.subgraph_model(&mk, &target, &name, run, &d.sampler, d.strategy, extractor)?;
                        Some((m, self.test_spec(&name, run, &d.sampler)))
                    } else {
                        None
                    };
                    let ae = if self.cfg.attacks.contains(&AttackKind::Reconstruct) {
                        Some(self.autoencoder(&name, pooling, run, &target)?)
                    } else {
                        None
                    };
                    let attacks = SweepAttacks {
                        property: property.as_deref(),
                        subgraph: subgraph.as_ref().map(|(m, s)| (&**m, s.clone())),
                        reconstruction: ae.as_deref(),
                    };
                    let split = self.split(&name, run)?;
                    let test = select(self.dataset(&name)?, &split.attack_test);
                    let base = |beta: Option<f64>, metric: String, value: f64, std: f64| DefenseRow {
                        dataset: name.clone(),
                        pooling: pooling.to_string(),
                        run,
                        beta,
                        metric,
                        value,
                        std,
                    };
                    for (metric, value) in evaluate_release(&target, &*target, &attacks, &test).at(Stage::Defense)? {
                        rows.push(base(None, metric, value, 0.0));
                    }
                    let seed = cell_seed(self.cfg.seed, &["defense", &name, pooling.name(), &run_tag]);
                    for r in sweep(&target, &attacks, &test, &d.betas, d.repeats, seed).at(Stage::Defense)? {
                        rows.push(base(Some(r.beta), r.metric, r.value, r.std));
                    }
                    self.store.write_csv(DEFENSE_CSV, &rows)?;
                }
            }
        }
        Ok(rows)
    }

    fn transfer_cell(&mut self, t: &TransferSpec, run: usize) -> HarnessResult<Vec<(String, String, String, f64)>> {
        let default_pooling = self.cfg.poolings[0];
        let run_tag = format!("run{run}");
        let (dataset, pooling, aux_name, test_name) = match t.axis {
            TransferAxis::Dataset => {
                (t.to.clone(), t.pooling.unwrap_or(default_pooling), t.from.clone(), t.to.clone())
            }
            TransferAxis::Sampler => {
                let d = t.dataset.clone().expect("validated");
                (d.clone(), t.pooling.unwrap_or(default_pooling), d.clone(), d)
            }
            TransferAxis::Model => {
                let d = t.dataset.clone().expect("validated");
                (d.clone(), t.to.parse().at(Stage::Transfer)?, d.clone(), d)
            }
        };
        let target = self.target(&dataset, pooling, run)?;
        let test_split = self.split(&test_name, run)?;
        let test = select(self.dataset(&test_name)?, &test_split.attack_test);
        let tag = key(&["transfer", &format!("{:?}", t.axis).to_lowercase(), &t.from, &t.to, pooling.name(), &run_tag]);
        let mut out = Vec::new();
        match t.attack {
            AttackKind::Property => {
                let k = t.k.unwrap_or(self.cfg.property.ks[0]);
                let mk = key(&[&tag, &format!("k{k}")]);
                let model = self.property_model(&mk, &target, &aux_name, run, k)?;
                let samples = build_training_set(&test, &*target, model.schemes()).at(Stage::Transfer)?;
                for (s, a) in model.schemes().iter().zip(model.evaluate_accuracy(&samples).at(Stage::Transfer)?) {
                    out.push((dataset.clone(), pooling.to_string(), format!("accuracy:{}", s.property), a));
                }
            }
            AttackKind::Subgraph => {
                let strategy = self.cfg.subgraph.strategies[0];
                let default_sampler = self.cfg.subgraph.samplers[0];
                let (train_sampler, test_sampler) = match t.axis {
                    TransferAxis::Sampler => (parse_sampler(&t.from)?, parse_sampler(&t.to)?),
                    _ => (default_sampler, default_sampler),
                };
                let extractor_pooling = match t.axis {
                    TransferAxis::Model => t.from.parse().at(Stage::Transfer)?,
                    _ => pooling,
                };
                let mk = key(&[&tag, &train_sampler.label(), strategy.name()]);
                let extractor = Some(self.cfg.target_config(extractor_pooling));
                let model = self.subgraph_model(&mk, &target, &aux_name, run, &train_sampler, strategy, extractor)?;
                let samples = generate_samples(&test, &*target, &self.test_spec(&test_name, run, &test_sampler))
                    .at(Stage::Transfer)?;
                out.push((dataset.clone(), pooling.to_string(), "auc".into(), model.evaluate_auc(&samples).at(Stage::Transfer)?));
            }
            AttackKind::Reconstruct => unreachable!("rejected by validation"),
        }
        Ok(out)
    }

    pub fn transfer(&mut self) -> HarnessResult<Vec<TransferRow>> {
        self.ingest()?;
        let mut rows = Vec::new();
        for t in self.cfg.transfer.clone() {
            for run in self.runs() {
                for (dataset, pooling, metric, value) in self.transfer_cell(&t, run)? {
                    rows.push(TransferRow {
                        axis: format!("{:?}", t.axis).to_lowercase(),
                        attack: t.attack.to_string(),
                        dataset,
                        pooling,
                        from: t.from.clone(),
                        to: t.to.clone(),
                        run,
                        metric,
                        value,
                    });
                }
                self.store.write_csv(TRANSFER_CSV, &rows)?;
            }
        }
        self.store.write_json(TRANSFER_JSON, &transfer_matrices(&rows))?;
        Ok(rows)
    }

    /// Every stage the configuration asks for, then the report.
    pub fn run_all(&mut self) -> HarnessResult<crate::report::Report> {
        self.ingest()?;
        self.train_targets()?;
        for a in self.cfg.attacks.clone() {
            match a {
                AttackKind::Property => drop(self.property_attack()?),
                AttackKind::Subgraph => drop(self.subgraph_attack()?),
                AttackKind::Reconstruct => drop(self.reconstruction_attack()?),
            }
        }
        if self.cfg.defense_enabled {
            self.defense()?;
        }
        if !self.cfg.transfer.is_empty() {
            self.transfer()?;
        }
        crate::report::write_report(&self.store)
    }
}

/// `group → from → to → [mean, std]`, where a group is `axis/attack/dataset/pooling/metric`.
pub type TransferMatrices = BTreeMap<String, BTreeMap<String, BTreeMap<String, [f64; 2]>>>;

pub fn transfer_matrices(rows: &[TransferRow]) -> TransferMatrices {
    let mut values: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
    for r in rows {
        let group = [r.axis.as_str(), &r.attack, &r.dataset, &r.pooling, &r.metric].join("/");
        values.entry((group, r.from.clone(), r.to.clone())).or_default().push(r.value);
    }
    let mut out = TransferMatrices::new();
    for ((group, from, to), v) in values {
        let (m, s) = mean_std(&v);
        out.entry(group).or_default().entry(from).or_default().insert(to, [m, s]);
    }
    out
}
