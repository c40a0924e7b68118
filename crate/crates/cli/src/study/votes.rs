//! Append-only JSONL vote log and the per-annotator aggregate table.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use super::session::Side;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub annotator_id: String,
    pub factor: u32,
    pub pair_id: String,
    pub chosen_side: Side,
    pub chosen_method: String,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

/// Reads every parseable record in file order; unparseable lines are
/// counted and skipped. A missing file reads as empty.
pub fn read_votes(path: &Path) -> Result<(Vec<VoteRecord>, usize)> {
    if !path.exists() {
        return Ok((Vec::new(), 0));
    }
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let (mut records, mut skipped) = (Vec::new(), 0);
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<VoteRecord>(&line) {
            Ok(r) => records.push(r),
            Err(e) => {
                log::warn!("{}:{}: skipping corrupt vote record: {e}", path.display(), n + 1);
                skipped += 1;
            }
        }
    }
    Ok((records, skipped))
}

/// Key for last-vote-wins.
pub type VoteKey = (String, u32, String);

pub fn latest_votes(records: impl IntoIterator<Item = VoteRecord>) -> HashMap<VoteKey, VoteRecord> {
    let mut latest = HashMap::new();
    for r in records {
        latest.insert((r.annotator_id.clone(), r.factor, r.pair_id.clone()), r);
    }
    latest
}

/// Single writer over the log; each record is one `write_all` of one line.
pub struct VoteLog {
    file: File,
}

impl VoteLog {
    pub fn open(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .with_context(|| format!("opening vote log {}", path.display()))?;
        Ok(Self { file })
    }

    pub fn append(&mut self, record: &VoteRecord) -> Result<()> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FactorTable {
    pub methods: Vec<String>,
    /// annotator -> method -> votes.
    pub annotators: BTreeMap<String, BTreeMap<String, u64>>,
    pub totals: BTreeMap<String, u64>,
    /// Share of all votes at this factor, in percent.
    pub overall_percent: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub factors: BTreeMap<u32, FactorTable>,
    pub votes: u64,
    pub skipped_lines: usize,
}

impl StudyReport {
    /// Aggregates the effective (last) vote per annotator, factor and pair.
    pub fn from_latest<'a>(latest: impl IntoIterator<Item = &'a VoteRecord>, skipped_lines: usize) -> Self {
        let mut factors: BTreeMap<u32, FactorTable> = BTreeMap::new();
        let mut method_sets: BTreeMap<u32, BTreeSet<String>> = BTreeMap::new();
        let mut votes = 0;
        for r in latest {
            votes += 1;
            let t = factors.entry(r.factor).or_default();
            *t.annotators.entry(r.annotator_id.clone()).or_default().entry(r.chosen_method.clone()).or_default() += 1;
            *t.totals.entry(r.chosen_method.clone()).or_default() += 1;
            method_sets.entry(r.factor).or_default().insert(r.chosen_method.clone());
        }
        for (f, t) in &mut factors {
            t.methods = method_sets[f].iter().cloned().collect();
            let n: u64 = t.totals.values().sum();
            for m in &t.methods {
                t.overall_percent.insert(m.clone(), 100.0 * t.totals[m] as f64 / n as f64);
            }
        }
        Self {
            factors,
            votes,
            skipped_lines,
        }
    }

    /// Adds zero-vote columns so methods nobody chose still appear.
    pub fn include_methods<'a>(&mut self, factor: u32, methods: impl IntoIterator<Item = &'a str>) {
        let t = self.factors.entry(factor).or_default();
        for m in methods {
            if !t.methods.iter().any(|have| have == m) {
                t.methods.push(m.to_string());
                t.totals.insert(m.to_string(), 0);
                t.overall_percent.insert(m.to_string(), 0.0);
            }
        }
        t.methods.sort();
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let (records, skipped) = read_votes(path)?;
        let latest = latest_votes(records);
        Ok(Self::from_latest(latest.values(), skipped))
    }

    /// Per-annotator counts per method, one block per factor, closed by an
    /// "Overall in %" row.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        if self.factors.is_empty() {
            s.push_str("no votes recorded\n");
        }
        for (factor, t) in &self.factors {
            let name_w = t.annotators.keys().map(|a| a.len()).max().unwrap_or(0).max("Overall in %".len());
            let col_w: Vec<usize> = t.methods.iter().map(|m| m.len().max(7)).collect();
            let _ = write!(s, "Factor x{factor}\n{:<name_w$}", "Annotator");
            for (m, w) in t.methods.iter().zip(&col_w) {
                let _ = write!(s, "  {m:>w$}");
            }
            s.push('\n');
            for (annotator, counts) in &t.annotators {
                let _ = write!(s, "{annotator:<name_w$}");
                for (m, w) in t.methods.iter().zip(&col_w) {
                    let _ = write!(s, "  {:>w$}", counts.get(m).copied().unwrap_or(0));
                }
                s.push('\n');
            }
            let _ = write!(s, "{:<name_w$}", "Overall in %");
            for (m, w) in t.methods.iter().zip(&col_w) {
                let _ = write!(s, "  {:>w$.2}", t.overall_percent[m]);
            }
            s.push_str("\n\n");
        }
        if self.skipped_lines > 0 {
            let _ = writeln!(s, "skipped {} corrupt line(s)", self.skipped_lines);
        }
        s
    }
}
