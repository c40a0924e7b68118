//! Study material on disk and the deterministic per-annotator sessions.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Pairs shown to each annotator per factor.
pub const SESSION_PAIRS: usize = 100;
pub const ORIGINAL_FILE: &str = "original.png";
pub const METHOD_A_FILE: &str = "method_a.png";
pub const METHOD_B_FILE: &str = "method_b.png";
pub const METHODS_FILE: &str = "methods.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Original,
    Left,
    Right,
}

impl FromStr for Role {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "original" => Ok(Role::Original),
            "left" => Ok(Role::Left),
            "right" => Ok(Role::Right),
            other => Err(format!("unknown image role '{other}' (original, left, right)")),
        }
    }
}

/// Display names of the two reconstructions in a pair directory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodNames {
    pub method_a: String,
    pub method_b: String,
}

impl Default for MethodNames {
    fn default() -> Self {
        Self {
            method_a: "method_a".into(),
            method_b: "method_b".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairAssets {
    pub pair_id: String,
    pub dir: PathBuf,
    pub methods: MethodNames,
}

/// Everything under `results/x{factor}/{pair_id}/`.
#[derive(Clone, Debug, Default)]
pub struct StudyPool {
    pub factors: BTreeMap<u32, Vec<PairAssets>>,
}

fn valid_pair_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.') && id != "." && id != ".."
}

fn read_methods(path: &Path) -> Result<Option<MethodNames>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Some(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?))
}

impl StudyPool {
    /// Scans `results_dir`. A `methods.json` next to the pair directories
    /// names the methods for the whole factor; one inside a pair overrides it.
    pub fn scan(results_dir: &Path) -> Result<Self> {
        let mut factors = BTreeMap::new();
        let entries = fs::read_dir(results_dir).with_context(|| format!("reading {}", results_dir.display()))?;
        for entry in entries {
            let path = entry?.path();
            let Some(factor) = path
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_prefix('x'))
                .and_then(|n| n.parse::<u32>().ok())
            else {
                continue;
            };
            if !path.is_dir() {
                continue;
            }
            let default_names = read_methods(&path.join(METHODS_FILE))?.unwrap_or_default();
            let mut pairs = Vec::new();
            for pair in fs::read_dir(&path)? {
                let dir = pair?.path();
                if !dir.is_dir() {
                    continue;
                }
                let pair_id = dir.file_name().unwrap().to_string_lossy().into_owned();
                if !valid_pair_id(&pair_id) {
                    log::warn!("skipping pair directory with unusable name {:?}", dir);
                    continue;
                }
                let missing: Vec<_> = [ORIGINAL_FILE, METHOD_A_FILE, METHOD_B_FILE]
                    .into_iter()
                    .filter(|f| !dir.join(f).is_file())
                    .collect();
                if !missing.is_empty() {
                    bail!("{} is missing {}", dir.display(), missing.join(", "));
                }
                let methods = read_methods(&dir.join(METHODS_FILE))?.unwrap_or_else(|| default_names.clone());
                pairs.push(PairAssets { pair_id, dir, methods });
            }
            pairs.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
            factors.insert(factor, pairs);
        }
        Ok(Self { factors })
    }
}

fn keyed_digest(annotator: &str, factor: u32, pair_id: &str, seed: u64, purpose: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    // Length prefixes keep field boundaries unambiguous.
    for field in [purpose.as_bytes(), annotator.as_bytes(), pair_id.as_bytes()] {
        h.update((field.len() as u64).to_le_bytes());
        h.update(field);
    }
    h.update(factor.to_le_bytes());
    h.update(seed.to_le_bytes());
    h.finalize().into()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionPair {
    pub pair_id: String,
    /// Whether `method_a` is displayed on the left. Never serialized.
    pub a_on_left: bool,
}

impl SessionPair {
    pub fn method_on(&self, side: Side, names: &MethodNames) -> String {
        let a_side = if self.a_on_left { Side::Left } else { Side::Right };
        if side == a_side {
            names.method_a.clone()
        } else {
            names.method_b.clone()
        }
    }

    pub fn file_for(&self, role: Role) -> &'static str {
        match (role, self.a_on_left) {
            (Role::Original, _) => ORIGINAL_FILE,
            (Role::Left, true) | (Role::Right, false) => METHOD_A_FILE,
            (Role::Left, false) | (Role::Right, true) => METHOD_B_FILE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Session {
    pub annotator: String,
    pub factor: u32,
    pub pairs: Vec<SessionPair>,
}

impl Session {
    /// Pure function of its arguments: the pool is ordered by a keyed hash
    /// and truncated to [`SESSION_PAIRS`]; sides come from a second hash.
    pub fn build(pool: &StudyPool, annotator: &str, factor: u32, seed: u64) -> Option<Session> {
        let assets = pool.factors.get(&factor)?;
        let mut keyed: Vec<([u8; 32], &PairAssets)> = assets
            .iter()
            .map(|a| (keyed_digest(annotator, factor, &a.pair_id, seed, "order"), a))
            .collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.pair_id.cmp(&b.1.pair_id)));
        if keyed.len() < SESSION_PAIRS {
            log::warn!(
                "factor x{factor} pool holds {} pairs; session for {annotator} is shorter than {SESSION_PAIRS}",
                keyed.len()
            );
        }
        let pairs = keyed
            .into_iter()
            .take(SESSION_PAIRS)
            .map(|(_, a)| SessionPair {
                pair_id: a.pair_id.clone(),
                a_on_left: keyed_digest(annotator, factor, &a.pair_id, seed, "side")[0] & 1 == 1,
            })
            .collect();
        Some(Session {
            annotator: annotator.to_string(),
            factor,
            pairs,
        })
    }

    pub fn pair(&self, pair_id: &str) -> Option<&SessionPair> {
        self.pairs.iter().find(|p| p.pair_id == pair_id)
    }
}
