//! `infer`: super-resolve a single volume.

use std::path::Path;

use anyhow::{bail, Context, Result};
use medsr_core::io::{load_volume, save_volume};
use medsr_core::net::checkpoint;
use medsr_core::pipeline::{super_resolve_3d, super_resolve_depth, super_resolve_slices, InferenceOptions};
use medsr_core::{Axes, SrNet32};

use crate::cli::InferArgs;

pub fn load_checkpoint(path: &Path) -> Result<SrNet32> {
    checkpoint::load::<f32>(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

/// Axes implied by the checkpoints on offer, checked against an explicit choice.
pub fn resolve_axes(requested: Option<Axes>, have_xy: bool, have_z: bool) -> Result<Axes> {
    let axes = match (requested, have_xy, have_z) {
        (Some(a), ..) => a,
        (None, true, true) => Axes::Xyz,
        (None, true, false) => Axes::Xy,
        (None, false, true) => Axes::Z,
        (None, false, false) => bail!("give --xy and/or --z checkpoints"),
    };
    match axes {
        Axes::Xy if !have_xy => bail!("--axes xy needs an --xy checkpoint"),
        Axes::Z if !have_z => bail!("--axes z needs a --z checkpoint"),
        Axes::Xyz if !(have_xy && have_z) => bail!("--axes xyz needs both --xy and --z checkpoints"),
        _ => Ok(axes),
    }
}

pub fn infer(args: &InferArgs) -> Result<()> {
    let axes = resolve_axes(args.axes, args.xy.is_some(), args.z.is_some())?;
    let xy = match (&args.xy, axes.touches_xy()) {
        (Some(p), true) => Some(load_checkpoint(p)?),
        _ => None,
    };
    let z = match (&args.z, axes.touches_z()) {
        (Some(p), true) => Some(load_checkpoint(p)?),
        _ => None,
    };
    if args.ensemble && axes == Axes::Z {
        log::warn!("--ensemble applies to the in-plane stage only; ignored for depth-only inference");
    }
    let opts = InferenceOptions {
        self_ensemble: args.ensemble,
    };
    let input = load_volume(&args.input).with_context(|| format!("loading {}", args.input.display()))?;
    let output = match (axes, xy, z) {
        (Axes::Xy, Some(xy), _) => super_resolve_slices(&xy, &input, opts)?,
        (Axes::Z, _, Some(z)) => super_resolve_depth(&z, &input)?,
        (Axes::Xyz, Some(xy), Some(z)) => {
            if xy.config.scale != z.config.scale {
                bail!("in-plane checkpoint is x{}, depth checkpoint is x{}", xy.config.scale, z.config.scale);
            }
            super_resolve_3d(&xy, &z, &input, xy.config.scale, opts)?
        }
        _ => unreachable!("resolve_axes checked the checkpoints"),
    };
    save_volume(&output, &args.output, args.format.into())
        .with_context(|| format!("writing {}", args.output.display()))?;
    println!(
        "{} {:?} -> {:?} ({}, ensemble {}) written to {}",
        args.input.display(),
        input.extents(),
        output.extents(),
        axes,
        if args.ensemble { "on" } else { "off" },
        args.output.display()
    );
    Ok(())
}
