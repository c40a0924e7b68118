//! `train`: one network stage on the training split of a prepared dataset.

use std::fs::{self, File};
use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use medsr_core::io::Split;
use medsr_core::net::{build_network, checkpoint, ShuffleAxis};
use medsr_core::pipeline::{degrade_volume, extract_patches, history_csv, train_stage, PatchPair};
use medsr_core::{AxisMode, Axes, SrNetConfig, TrainConfig};
use serde::Serialize;

use super::data::PreparedDataset;
use crate::cli::{Stage, TrainArgs};

#[derive(Serialize)]
struct RunConfig<'a> {
    stage: &'static str,
    train_volumes: Vec<&'a str>,
    patches: usize,
    network: &'a SrNetConfig,
    training: &'a TrainConfig,
}

pub struct StagePaths {
    pub checkpoint: PathBuf,
    pub latest: PathBuf,
    pub loss_csv: PathBuf,
    pub run_log: PathBuf,
    pub config: PathBuf,
}

impl StagePaths {
    pub fn new(out: &std::path::Path, stage: Stage) -> Self {
        let s = stage.name();
        Self {
            checkpoint: out.join(format!("{s}.ckpt")),
            latest: out.join(format!("{s}_latest.ckpt")),
            loss_csv: out.join(format!("{s}_loss.csv")),
            run_log: out.join(format!("{s}_run.log")),
            config: out.join(format!("{s}_config.json")),
        }
    }
}

fn train_config(args: &TrainArgs) -> TrainConfig {
    TrainConfig {
        patch_size: args.patch_size,
        batch_size: args.batch_size,
        epochs: args.epochs,
        lr_initial: args.lr_initial,
        lr_final: args.lr_final,
        lr_drop_epoch: args.lr_drop_epoch.unwrap_or(args.epochs.div_ceil(2)),
        lambda: args.lambda,
        blur_probability: args.blur_probability,
        sigma_max: args.sigma_max,
        fixed_sigma: args.fixed_sigma,
        stride: args.stride,
        seed: args.seed,
    }
}

fn net_config(args: &TrainArgs, r: usize) -> SrNetConfig {
    let base = match args.stage {
        Stage::Xy => SrNetConfig::two_axes(r),
        Stage::Z => SrNetConfig::one_axis(r, ShuffleAxis::Rows),
    };
    SrNetConfig {
        enable_second_block: !args.no_second_block,
        enable_intermediate_loss: !args.no_intermediate_loss,
        enable_short_skips: !args.no_short_skips,
        enable_long_skip: !args.no_long_skip,
        relu_before_shuffle: args.relu_before_shuffle,
        relu_on_output: args.relu_on_output,
        lambda: args.lambda,
        ..base.with_filters(args.filters)
    }
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

fn thin<T>(pairs: Vec<PatchPair<T>>, max: Option<usize>) -> Vec<PatchPair<T>> {
    match max {
        Some(m) if m > 0 && pairs.len() > m => {
            let n = pairs.len();
            let mut keep = (0..m).map(|i| i * n / m).peekable();
            pairs
                .into_iter()
                .enumerate()
                .filter_map(|(i, p)| (keep.next_if_eq(&i).is_some()).then_some(p))
                .collect()
        }
        _ => pairs,
    }
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let data = PreparedDataset::load(&args.data)?;
    let cfg = train_config(args);
    cfg.validate()?;
    let net_cfg = net_config(args, data.r);
    net_cfg.validate()?;

    let (axes, mode) = match args.stage {
        Stage::Xy => (Axes::Xy, AxisMode::TwoAxes),
        Stage::Z => (Axes::Z, AxisMode::OneAxis(ShuffleAxis::Rows)),
    };
    let volumes = data.hr_volumes(&args.data, Split::Train)?;
    anyhow::ensure!(!volumes.is_empty(), "{} has no training volumes", args.data.display());
    let mut pairs = Vec::new();
    for (id, (name, hr)) in volumes.iter().enumerate() {
        let hr = hr.center_crop_to_multiple(axes.factors(data.r))?;
        let lr = degrade_volume(&hr, data.r, axes)?;
        let found = extract_patches::<f32>(&lr, &hr, &cfg, mode, id).with_context(|| format!("patches from {name}"))?;
        log::debug!("{name}: {} patches", found.len());
        pairs.extend(found);
    }
    let pairs = thin(pairs, args.max_patches);

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let paths = StagePaths::new(&args.out, args.stage);
    let summary = format!(
        "stage={} r={} patch={} filters={} batch={} epochs={} lr={:e}->{:e}@{} lambda={} blur={} sigma_max={} stride={} seed={} \
         second_block={} intermediate_loss={} short_skips={} long_skip={} patches={}",
        args.stage.name(),
        data.r,
        cfg.patch_size,
        net_cfg.base_filters,
        cfg.batch_size,
        cfg.epochs,
        cfg.lr_initial,
        cfg.lr_final,
        cfg.lr_drop_epoch,
        net_cfg.effective_lambda(),
        cfg.blur_probability,
        cfg.sigma_max,
        cfg.stride,
        cfg.seed,
        on_off(net_cfg.enable_second_block),
        on_off(net_cfg.enable_intermediate_loss),
        on_off(net_cfg.enable_short_skips),
        on_off(net_cfg.enable_long_skip),
        pairs.len(),
    );
    println!("{summary}");
    let mut log_file = File::create(&paths.run_log).with_context(|| format!("creating {}", paths.run_log.display()))?;
    writeln!(log_file, "{summary}")?;
    let run = RunConfig {
        stage: args.stage.name(),
        train_volumes: volumes.iter().map(|(n, _)| n.as_str()).collect(),
        patches: pairs.len(),
        network: &net_cfg,
        training: &cfg,
    };
    fs::write(&paths.config, serde_json::to_string_pretty(&run)? + "\n")?;

    let net = build_network::<f32>(net_cfg, args.seed)?;
    let outcome = train_stage(&pairs, net, &cfg, |stats, net| {
        let line = format!("epoch {:>3}  loss {:.6}  lr {:e}", stats.epoch, stats.mean_loss, stats.learning_rate);
        println!("{line}");
        let _ = writeln!(log_file, "{line}");
        checkpoint::save(net, &paths.latest)
    })?;
    checkpoint::save(&outcome.net, &paths.checkpoint)?;
    fs::write(&paths.loss_csv, history_csv(&outcome.history))?;
    println!("wrote {} and {}", paths.checkpoint.display(), paths.loss_csv.display());
    Ok(())
}
