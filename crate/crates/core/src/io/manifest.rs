use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::Axes;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative paths resolve against the manifest's directory.
    pub volume_path: String,
    pub split: Split,
}

/// Volume-level train/test split plus the degradation it was prepared for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub r: usize,
    pub axes: Axes,
    pub seed: u64,
}

impl DatasetManifest {
    /// Shuffles `paths` with `seed` and assigns the first `n_train` to training.
    pub fn split_by_volume(paths: Vec<String>, n_train: usize, r: usize, axes: Axes, seed: u64) -> Result<Self> {
        if n_train > paths.len() {
            return Err(Error::invalid(format!("{n_train} training volumes requested, {} available", paths.len())));
        }
        let mut shuffled = paths;
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let entries = shuffled
            .into_iter()
            .enumerate()
            .map(|(i, volume_path)| ManifestEntry {
                volume_path,
                split: if i < n_train { Split::Train } else { Split::Test },
            })
            .collect();
        let m = Self { entries, r, axes, seed };
        m.validate(false)?;
        Ok(m)
    }

    /// Paths must be unique; `for_training` also requires both splits.
    pub fn validate(&self, for_training: bool) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.volume_path.as_str()) {
                return Err(Error::invalid(format!("duplicate manifest entry '{}'", e.volume_path)));
            }
        }
        if self.r == 0 {
            return Err(Error::invalid("manifest factor r must be positive"));
        }
        if for_training && (self.paths(Split::Train).next().is_none() || self.paths(Split::Test).next().is_none()) {
            return Err(Error::invalid("training needs at least one train and one test volume"));
        }
        Ok(())
    }

    pub fn paths(&self, split: Split) -> impl Iterator<Item = &str> {
        self.entries.iter().filter(move |e| e.split == split).map(|e| e.volume_path.as_str())
    }

    pub fn resolve(&self, base: &Path, split: Split) -> Vec<PathBuf> {
        self.paths(split).map(|p| base.join(p)).collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text).map_err(|e| Error::format(path, format!("malformed manifest: {e}")))?;
        m.validate(false).map_err(|e| Error::format(path, e.to_string()))?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}
