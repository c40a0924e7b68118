//! `evaluate`: PSNR / SSIM / IFC of each method on the test split.

use std::fs;

use anyhow::{bail, Context, Result};
use medsr_core::io::{export_comparison, Split};
use medsr_core::metrics::{evaluate as score, summary_table, Cnn, EvalOptions, Identity, Interpolation, Reconstructor, ResizeMethod};
use medsr_core::pipeline::{degrade_volume, InferenceOptions};

use super::data::PreparedDataset;
use super::infer::load_checkpoint;
use crate::cli::EvaluateArgs;

pub const CNN_METHOD: &str = "cnn";

fn build_methods(args: &EvaluateArgs) -> Result<Vec<Box<dyn Reconstructor>>> {
    let have_net = args.xy.is_some() || args.z.is_some();
    let names: Vec<String> = if args.methods.is_empty() {
        let mut v: Vec<String> = ResizeMethod::ALL.iter().map(|m| m.to_string()).collect();
        if have_net {
            v.push(CNN_METHOD.into());
        }
        v
    } else {
        args.methods.iter().map(|m| m.trim().to_lowercase()).collect()
    };
    let mut out: Vec<Box<dyn Reconstructor>> = Vec::new();
    for name in names {
        match name.as_str() {
            "identity" => out.push(Box::new(Identity)),
            CNN_METHOD => {
                if !have_net {
                    bail!("method cnn needs --xy and/or --z checkpoints");
                }
                out.push(Box::new(Cnn {
                    label: CNN_METHOD.into(),
                    net_xy: args.xy.as_deref().map(load_checkpoint).transpose()?,
                    net_z: args.z.as_deref().map(load_checkpoint).transpose()?,
                    options: InferenceOptions {
                        self_ensemble: args.ensemble,
                    },
                }));
            }
            other => {
                let m: ResizeMethod = other
                    .parse()
                    .with_context(|| format!("unknown method '{other}' (identity, nearest, bilinear, bicubic, lanczos, cnn)"))?;
                out.push(Box::new(Interpolation(m)));
            }
        }
    }
    Ok(out)
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let data = PreparedDataset::load(&args.data)?;
    let methods = build_methods(args)?;
    let test = data.hr_volumes(&args.data, Split::Test)?;
    if test.is_empty() {
        bail!("{} has no test volumes", args.data.display());
    }
    let opts = EvalOptions {
        mode: args.mode.into(),
        peak: args.peak,
        quantize_8bit: args.quantize_8bit,
    };
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut reports = Vec::with_capacity(methods.len());
    for m in &methods {
        let report = score(m.as_ref(), &test, data.r, data.axes, opts).with_context(|| format!("evaluating {}", m.name()))?;
        let path = args.out.join(format!("{}.csv", m.name()));
        fs::write(&path, report.to_csv())?;
        println!("{}", report.to_table());
        log::info!("wrote {}", path.display());
        reports.push(report);
    }
    let summary = summary_table(&reports);
    println!(
        "x{} along {}, {} degradation, PSNR peak {} on [0, 1] intensities{}\n{summary}",
        data.r,
        data.axes,
        medsr_core::metrics::DEGRADATION,
        args.peak,
        if args.quantize_8bit { ", 8-bit quantized" } else { "" }
    );
    fs::write(args.out.join("summary.txt"), &summary)?;

    if args.figures {
        let dir = args.out.join("figures");
        fs::create_dir_all(&dir)?;
        for (name, volume) in &test {
            let hr = volume.center_crop_to_multiple(data.axes.factors(data.r))?;
            let lr = degrade_volume(&hr, data.r, data.axes)?;
            let z = hr.depth() / 2;
            let mut panels = Vec::with_capacity(methods.len());
            for m in &methods {
                panels.push((m.name(), m.reconstruct(&lr, data.r, data.axes)?.axial_slice::<f32>(z)));
            }
            let path = dir.join(format!("{name}_z{z:03}.png"));
            export_comparison(&hr.axial_slice::<f32>(z), &panels, &path)?;
            log::info!("wrote {}", path.display());
        }
    }
    Ok(())
}
