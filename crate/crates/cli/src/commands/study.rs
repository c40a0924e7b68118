//! `study-prepare`, `study-serve` and `study-report`.

use std::fs;
use std::io::Write;
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use medsr_core::io::{save_slice_png, Split};
use medsr_core::metrics::resize_to;
use medsr_core::pipeline::{degrade_volume, super_resolve_2d, InferenceOptions};
use medsr_core::{AxisMode, Axes};
use sha2::{Digest, Sha256};
use tokio::net::TcpListener;

use super::data::PreparedDataset;
use super::evaluate::CNN_METHOD;
use super::infer::load_checkpoint;
use crate::cli::{StudyPrepareArgs, StudyReportArgs, StudyServeArgs};
use crate::study::{self, MethodNames, StudyPool, StudyReport, StudyState, METHODS_FILE, METHOD_A_FILE, METHOD_B_FILE, ORIGINAL_FILE};

fn slice_key(seed: u64, name: &str, z: usize) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((name.len() as u64).to_le_bytes());
    h.update(name.as_bytes());
    h.update((z as u64).to_le_bytes());
    h.finalize().into()
}

pub fn study_prepare(args: &StudyPrepareArgs) -> Result<()> {
    let net = load_checkpoint(&args.xy)?;
    ensure!(net.config.axis_mode == AxisMode::TwoAxes, "study pairs need an in-plane (xy) checkpoint");
    let r = net.config.scale;
    let data = PreparedDataset::load(&args.data)?;
    let volumes = data.hr_volumes(&args.data, Split::Test)?;
    ensure!(!volumes.is_empty(), "{} has no test volumes", args.data.display());

    let factor_dir = args.out.join(format!("x{r}"));
    if factor_dir.exists() {
        if !args.force {
            bail!("{} already exists; pass --force to replace it", factor_dir.display());
        }
        fs::remove_dir_all(&factor_dir).with_context(|| format!("removing {}", factor_dir.display()))?;
    }
    fs::create_dir_all(&factor_dir)?;

    let mut pairs = Vec::with_capacity(volumes.len());
    for (name, v) in &volumes {
        let hr = v.center_crop_to_multiple(Axes::Xy.factors(r))?;
        let lr = degrade_volume(&hr, r, Axes::Xy)?;
        pairs.push((name, hr, lr));
    }
    let mut candidates: Vec<([u8; 32], usize, usize)> = pairs
        .iter()
        .enumerate()
        .flat_map(|(i, (name, hr, _))| (0..hr.depth()).map(move |z| (slice_key(args.seed, name, z), i, z)))
        .collect();
    candidates.sort();
    if candidates.len() < args.pairs {
        log::warn!("only {} test slices available; writing fewer than {} pairs", candidates.len(), args.pairs);
    }
    let opts = InferenceOptions {
        self_ensemble: args.ensemble,
    };
    let mut written = 0;
    for &(_, i, z) in candidates.iter().take(args.pairs) {
        let (name, hr, lr) = &pairs[i];
        let original = hr.axial_slice::<f32>(z);
        let low = lr.axial_slice::<f32>(z);
        let cnn = super_resolve_2d(&net, &low, opts)?;
        let (h, w) = original.plane_dims();
        let base = resize_to(&low, h, w, args.baseline)?.map(|v| v.clamp(0.0, 1.0));
        let dir = factor_dir.join(format!("{name}_z{z:03}"));
        fs::create_dir_all(&dir)?;
        save_slice_png(&original, &dir.join(ORIGINAL_FILE), 8)?;
        save_slice_png(&cnn, &dir.join(METHOD_A_FILE), 8)?;
        save_slice_png(&base, &dir.join(METHOD_B_FILE), 8)?;
        written += 1;
    }
    let names = MethodNames {
        method_a: CNN_METHOD.into(),
        method_b: args.baseline.to_string(),
    };
    fs::write(factor_dir.join(METHODS_FILE), serde_json::to_string_pretty(&names)? + "\n")?;
    println!("wrote {written} pairs ({} vs {}) to {}", names.method_a, names.method_b, factor_dir.display());
    Ok(())
}

pub fn study_serve(args: &StudyServeArgs) -> Result<()> {
    let pool = StudyPool::scan(&args.results)?;
    if pool.factors.is_empty() {
        bail!("no x<factor> directories under {}", args.results.display());
    }
    for (factor, pairs) in &pool.factors {
        log::info!("factor x{factor}: {} pairs", pairs.len());
    }
    let state = Arc::new(StudyState::new(pool, args.votes.clone(), args.seed)?);
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async {
        let listener = TcpListener::bind(args.bind).await.with_context(|| format!("binding {}", args.bind))?;
        println!("listening on http://{}", listener.local_addr()?);
        std::io::stdout().flush()?;
        study::serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
            log::info!("shutting down");
        })
        .await
    })
}

pub fn study_report(args: &StudyReportArgs) -> Result<()> {
    let report = StudyReport::from_file(&args.votes)?;
    if report.skipped_lines > 0 {
        log::warn!("skipped {} corrupt line(s) in {}", report.skipped_lines, args.votes.display());
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", report.to_table());
    }
    Ok(())
}
