//! Content-addressed run directories.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{AtStage, HarnessResult, Stage};

/// SHA-256 of the configuration, ignoring where the data lives.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut keyed = cfg.clone();
    keyed.data_root = None;
    let canonical = serde_json::to_string(&keyed).expect("config serialises");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// Deterministic 64-bit seed for one cell of the experiment grid.
pub fn cell_seed(base: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

#[derive(Clone, Debug)]
pub struct RunStore {
    root: PathBuf,
}

impl RunStore {
    /// Opens `<out>/<name>-<hash12>` and records the configuration in it.
    pub fn open(out: &Path, cfg: &ExperimentConfig) -> HarnessResult<Self> {
        let hash = config_hash(cfg);
        let root = out.join(format!("{}-{}", cfg.name, &hash[..12]));
        fs::create_dir_all(&root).at(Stage::Store)?;
        let store = RunStore { root };
        let mut keyed = cfg.clone();
        keyed.data_root = None;
        store.write_text("config.toml", &toml::to_string(&keyed).at(Stage::Store)?)?;
        store.write_text("config.sha256", &format!("{hash}\n"))?;
        Ok(store)
    }

    /// An existing run directory, without rewriting its configuration.
    pub fn existing(root: &Path) -> HarnessResult<Self> {
        if !root.join("config.toml").is_file() {
            return Err(crate::error::HarnessError::new(
                Stage::Store,
                format!("{} is not a run directory", root.display()),
            ));
        }
        Ok(RunStore { root: root.to_owned() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn prepare(&self, rel: &str) -> HarnessResult<PathBuf> {
        let p = self.path(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).at(Stage::Store)?;
        }
        Ok(p)
    }

    pub fn write_text(&self, rel: &str, text: &str) -> HarnessResult<()> {
        fs::write(self.prepare(rel)?, text).at(Stage::Store)
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, rel: &str, value: &T) -> HarnessResult<()> {
        let text = serde_json::to_string_pretty(value).at(Stage::Store)?;
        self.write_text(rel, &text)
    }

    pub fn read_json<T: DeserializeOwned>(&self, rel: &str) -> HarnessResult<Option<T>> {
        let p = self.path(rel);
        if !p.is_file() {
            return Ok(None);
        }
        let text = fs::read_to_string(&p).at(Stage::Store)?;
        serde_json::from_str(&text).at(Stage::Store).map(Some)
    }

    pub fn write_csv<R: Serialize>(&self, rel: &str, rows: &[R]) -> HarnessResult<()> {
        let mut w = csv::Writer::from_path(self.prepare(rel)?).at(Stage::Store)?;
        for r in rows {
            w.serialize(r).at(Stage::Store)?;
        }
        w.flush().at(Stage::Store)
    }

    /// Rows of `rel`, or an empty list when the file does not exist.
    pub fn read_csv<R: DeserializeOwned>(&self, rel: &str) -> HarnessResult<Vec<R>> {
        let p = self.path(rel);
        if !p.is_file() {
            return Ok(Vec::new());
        }
        let mut r = csv::Reader::from_path(&p).at(Stage::Store)?;
        r.deserialize().collect::<Result<Vec<R>, _>>().at(Stage::Store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_data_root_but_not_seed() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.data_root = Some("/elsewhere".into());
        assert_eq!(config_hash(&a), config_hash(&b));
        b.seed = 1;
        assert_ne!(config_hash(&a), config_hash(&b));
    }

    #[test]
    fn cell_seeds_separate_parts() {
        assert_ne!(cell_seed(0, &["ab", "c"]), cell_seed(0, &["a", "bc"]));
        assert_eq!(cell_seed(3, &["x"]), cell_seed(3, &["x"]));
    }

    #[derive(Debug, PartialEq, Serialize, serde::Deserialize)]
    struct Row {
        id: u32,
        name: String,
        value: Option<f64>,
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::open(dir.path(), &ExperimentConfig::default()).unwrap();
        let rows = vec![
            Row { id: 1, name: "a".into(), value: Some(0.1 + 0.2) },
            Row { id: 2, name: "b".into(), value: None },
        ];
        store.write_csv("t/rows.csv", &rows).unwrap();
        let back: Vec<Row> = store.read_csv("t/rows.csv").unwrap();
        assert_eq!(back, rows);
        assert!(store.read_csv::<Row>("missing.csv").unwrap().is_empty());
        assert!(RunStore::existing(store.root()).is_ok());
    }
}
