//! Sliding-window LR/HR patch pairs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::volume::Volume;
use crate::error::{Error, Result};
use crate::net::{AxisMode, ShuffleAxis};
use crate::scalar::Scalar;
use crate::tensor::{gaussian_blur_3x3, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlaneKind {
    /// Fixed z, rows along y.
    Axial,
    /// Fixed y, rows along z.
    Coronal,
    /// Fixed x, rows along z.
    Sagittal,
}

/// Where a patch came from, so dataset splits can be audited.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PatchSource {
    pub volume: usize,
    pub plane: PlaneKind,
    pub plane_index: usize,
    /// Top-left corner in the LR plane.
    pub row: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatchPair<T> {
    pub lr: Tensor<T>,
    pub hr: Tensor<T>,
    pub source: PatchSource,
}

fn crop<T: Scalar>(plane: &Tensor<T>, row: usize, col: usize, h: usize, w: usize) -> Tensor<T> {
    let pw = plane.plane_dims().1;
    let src = plane.data();
    Tensor::from_fn(&[h, w], |i| src[(row + i / w) * pw + col + i % w])
}

fn window_starts(extent: usize, patch: usize, stride: usize) -> impl Iterator<Item = usize> {
    (0..=extent - patch).step_by(stride)
}

/// Cuts patch pairs out of matching LR/HR planes. `row_scale`/`col_scale` are
/// the HR/LR ratios along each plane axis.
fn plane_patches<T: Scalar>(
    lr: &Tensor<T>,
    hr: &Tensor<T>,
    scales: (usize, usize),
    cfg: &TrainConfig,
    source: PatchSource,
    out: &mut Vec<PatchPair<T>>,
) -> Result<()> {
    let p = cfg.patch_size;
    let (h, w) = lr.plane_dims();
    if p > h || p > w {
        return Err(Error::invalid(format!("patch size {p} exceeds {h}x{w} plane")));
    }
    for row in window_starts(h, p, cfg.stride) {
        for col in window_starts(w, p, cfg.stride) {
            out.push(PatchPair {
                lr: crop(lr, row, col, p, p),
                hr: crop(hr, row * scales.0, col * scales.1, p * scales.0, p * scales.1),
                source: PatchSource { row, col, ..source },
            });
        }
    }
    Ok(())
}

/// Extracts training pairs for one volume.
///
/// Two-axis mode slides over every axial slice. One-axis mode slides over the
/// coronal and sagittal reslices so that the upscaled (row) axis is depth.
pub fn extract_patches<T: Scalar>(
    lr: &Volume,
    hr: &Volume,
    cfg: &TrainConfig,
    mode: AxisMode,
    volume_id: usize,
) -> Result<Vec<PatchPair<T>>> {
    cfg.validate()?;
    let [lw, lh, ld] = lr.extents();
    let [hw, hh, hd] = hr.extents();
    let mut out = Vec::new();
    match mode {
        AxisMode::TwoAxes => {
            if hd != ld || hw % lw != 0 || hh % lh != 0 || hw / lw != hh / lh {
                return Err(Error::invalid(format!(
                    "HR {hw}x{hh}x{hd} is not an in-plane multiple of LR {lw}x{lh}x{ld}"
                )));
            }
            let r = hw / lw;
            for z in 0..ld {
                let src = PatchSource {
                    volume: volume_id,
                    plane: PlaneKind::Axial,
                    plane_index: z,
                    row: 0,
                    col: 0,
                };
                plane_patches(&lr.axial_slice(z), &hr.axial_slice(z), (r, r), cfg, src, &mut out)?;
            }
        }
        AxisMode::OneAxis(ShuffleAxis::Rows) => {
            if hw != lw || hh != lh || hd % ld != 0 {
                return Err(Error::invalid(format!(
                    "HR {hw}x{hh}x{hd} is not a depth multiple of LR {lw}x{lh}x{ld}"
                )));
            }
            let r = hd / ld;
            for y in 0..lh {
                let src = PatchSource {
                    volume: volume_id,
                    plane: PlaneKind::Coronal,
                    plane_index: y,
                    row: 0,
                    col: 0,
                };
                plane_patches(&lr.coronal_plane(y), &hr.coronal_plane(y), (r, 1), cfg, src, &mut out)?;
            }
            for x in 0..lw {
                let src = PatchSource {
                    volume: volume_id,
                    plane: PlaneKind::Sagittal,
                    plane_index: x,
                    row: 0,
                    col: 0,
                };
                plane_patches(&lr.sagittal_plane(x), &hr.sagittal_plane(x), (r, 1), cfg, src, &mut out)?;
            }
        }
        AxisMode::OneAxis(ShuffleAxis::Cols) => {
            return Err(Error::invalid("depth networks upscale rows; column mode has no volume layout"));
        }
    }
    Ok(out)
}

/// Blurs an LR patch with probability `blur_probability`; sigma is uniform on
/// `(0, sigma_max]` unless `fixed_sigma` is set.
pub fn augment<T: Scalar, R: Rng>(patch: &Tensor<T>, cfg: &TrainConfig, rng: &mut R) -> Result<Tensor<T>> {
    if cfg.blur_probability <= 0.0 || rng.gen::<f64>() >= cfg.blur_probability {
        return Ok(patch.clone());
    }
    let sigma = match cfg.fixed_sigma {
        Some(s) => s,
        None => cfg.sigma_max * (1.0 - rng.gen::<f64>()),
    };
    gaussian_blur_3x3(patch, sigma)
}
