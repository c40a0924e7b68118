//! `phantom` and `prepare`, plus the on-disk layout of a prepared dataset.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use medsr_core::io::{generate_phantom, load_raw, load_volume, save_raw, DatasetManifest, PhantomKind, Split};
use medsr_core::pipeline::degrade_volume;
use medsr_core::{Axes, Volume};
use serde::{Deserialize, Serialize};

use crate::cli::{PhantomArgs, PrepareArgs};

pub const PREPARED_FILE: &str = "prepared.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreparedEntry {
    pub name: String,
    pub split: Split,
    /// Source volume as listed in the manifest.
    pub source: String,
    /// Cropped HR volume, relative to the dataset directory.
    pub hr: String,
    /// Degraded LR volume, relative to the dataset directory.
    pub lr: String,
}

/// Index of a directory written by `prepare`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreparedDataset {
    pub r: usize,
    pub axes: Axes,
    pub seed: u64,
    pub degradation: String,
    pub entries: Vec<PreparedEntry>,
}

impl PreparedDataset {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(PREPARED_FILE);
        let text = fs::read_to_string(&path).with_context(|| format!("{} is not a prepared dataset", dir.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn entries(&self, split: Split) -> impl Iterator<Item = &PreparedEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Cropped HR volumes of one split, in manifest order.
    pub fn hr_volumes(&self, dir: &Path, split: Split) -> Result<Vec<(String, Volume)>> {
        self.entries(split)
            .map(|e| {
                let v = load_raw(&dir.join(&e.hr)).with_context(|| format!("loading {}", e.name))?;
                Ok((e.name.clone(), v))
            })
            .collect()
    }
}

fn volume_name(source: &str) -> String {
    let p = Path::new(source);
    let stem = if p.extension().is_some_and(|e| e == "json" || e == "f32") { p.file_stem() } else { p.file_name() };
    stem.map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "volume".into())
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn phantom(args: &PhantomArgs) -> Result<()> {
    ensure!(args.count > 0, "--count must be positive");
    let extents = match args.size.as_slice() {
        [s] => [*s; 3],
        [w, h, d] => [*w, *h, *d],
        other => bail!("--size takes W or W,H,D, got {other:?}"),
    };
    let n_train = args.train.unwrap_or((args.count * 3 / 4).max(1).min(args.count.saturating_sub(1)));
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut paths = Vec::with_capacity(args.count);
    for i in 0..args.count {
        let kind = args.kind.unwrap_or(PhantomKind::ALL[i % PhantomKind::ALL.len()]);
        let v = generate_phantom(kind, extents, args.seed.wrapping_add(i as u64))?;
        let file = format!("phantom_{i:03}.json");
        save_raw(&v, &args.out.join(&file))?;
        log::info!("{file}: {kind} {extents:?}");
        paths.push(file);
    }
    let manifest = DatasetManifest::split_by_volume(paths, n_train, args.r, args.axes, args.seed)?;
    manifest.validate(false)?;
    manifest.save(args.out.join(MANIFEST_FILE))?;
    println!(
        "wrote {} phantoms ({} train / {} test) and {}",
        args.count,
        n_train,
        args.count - n_train,
        args.out.join(MANIFEST_FILE).display()
    );
    Ok(())
}

pub fn prepare(args: &PrepareArgs) -> Result<()> {
    let mut manifest = DatasetManifest::load(&args.manifest)?;
    if let Some(r) = args.r {
        manifest.r = r;
    }
    if let Some(axes) = args.axes {
        manifest.axes = axes;
    }
    manifest.validate(false)?;
    if args.out.exists() && !args.force {
        bail!("{} already exists; pass --force to overwrite it", args.out.display());
    }
    let base = args.manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    fs::create_dir_all(args.out.join("hr"))?;
    fs::create_dir_all(args.out.join("lr"))?;

    let factors = manifest.axes.factors(manifest.r);
    let mut names = HashSet::new();
    let mut entries = Vec::with_capacity(manifest.entries.len());
    for e in &manifest.entries {
        let name = volume_name(&e.volume_path);
        ensure!(names.insert(name.clone()), "two manifest entries map to the volume name '{name}'");
        let source: PathBuf = base.join(&e.volume_path);
        let volume = load_volume(&source).with_context(|| format!("loading {}", source.display()))?;
        let hr = volume.center_crop_to_multiple(factors)?;
        let lr = degrade_volume(&hr, manifest.r, manifest.axes)?;
        let (hr_rel, lr_rel) = (format!("hr/{name}.json"), format!("lr/{name}.json"));
        save_raw(&hr, &args.out.join(&hr_rel))?;
        save_raw(&lr, &args.out.join(&lr_rel))?;
        log::info!("{name}: {:?} -> HR {:?} -> LR {:?}", volume.extents(), hr.extents(), lr.extents());
        entries.push(PreparedEntry {
            name,
            split: e.split,
            source: e.volume_path.clone(),
            hr: hr_rel,
            lr: lr_rel,
        });
    }
    let prepared = PreparedDataset {
        r: manifest.r,
        axes: manifest.axes,
        seed: manifest.seed,
        degradation: medsr_core::metrics::DEGRADATION.into(),
        entries,
    };
    fs::write(args.out.join(PREPARED_FILE), serde_json::to_string_pretty(&prepared)? + "\n")?;
    let count = |s| prepared.entries(s).count();
    println!(
        "prepared {} volumes ({} train / {} test) at x{} along {} in {}",
        prepared.entries.len(),
        count(Split::Train),
        count(Split::Test),
        prepared.r,
        prepared.axes,
        args.out.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_drop_volume_extensions() {
        assert_eq!(volume_name("a/b/phantom_001.json"), "phantom_001");
        assert_eq!(volume_name("scan.f32"), "scan");
        assert_eq!(volume_name("stacks/head ct"), "head_ct");
        assert_eq!(volume_name("stacks/head.v2"), "head_v2");
    }
}
