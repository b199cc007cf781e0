//! Run configuration, read from TOML.
//!
//! Every key is optional; missing keys take the defaults of the reference
//! MNIST run. Relative paths are resolved against the directory holding the
//! configuration file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{LomError, Result};
use crate::experiment::ExperimentConfig;
use crate::mnist::{DatasetPaths, InputConfig};
use crate::network::TopologyConfig;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Directory with the four standard MNIST file names.
    pub dir: Option<PathBuf>,
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
}

impl DatasetConfig {
    /// Individual file keys override the directory.
    pub fn paths(&self) -> DatasetPaths {
        let mut p = DatasetPaths::in_dir(self.dir.clone().unwrap_or_else(|| PathBuf::from("data/mnist")));
        let pick = |slot: &mut PathBuf, v: &Option<PathBuf>| {
            if let Some(v) = v {
                slot.clone_from(v);
            }
        };
        pick(&mut p.train_images, &self.train_images);
        pick(&mut p.train_labels, &self.train_labels);
        pick(&mut p.test_images, &self.test_images);
        pick(&mut p.test_labels, &self.test_labels);
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub experiment: ExperimentConfig,
    pub input: InputConfig,
    pub topology: TopologyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            out_dir: PathBuf::from("runs/default"),
            dataset: DatasetConfig::default(),
            experiment: ExperimentConfig::default(),
            input: InputConfig::default(),
            topology: TopologyConfig::default(),
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| LomError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses `path` and resolves relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(LomError::MissingPath(path.to_path_buf()));
        }
        let text = fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text).map_err(|e| LomError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.out_dir);
        let d = &mut self.dataset;
        for p in [
            &mut d.dir,
            &mut d.train_images,
            &mut d.train_labels,
            &mut d.test_images,
            &mut d.test_labels,
        ]
        .into_iter()
        .flatten()
        {
            resolve(base, p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.input.validate()?;
        self.topology.validate()?;
        if self.experiment.bins == 0 || self.experiment.bin_size == 0 {
            return Err(LomError::config("bins and bin_size must be positive"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
