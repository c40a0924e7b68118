//! Whole-slice inference and the two-stage (in-plane, then depth) volume path.

use super::ensemble::self_ensemble;
use super::volume::Volume;
use crate::error::{Error, Result};
use crate::net::{AxisMode, ShuffleAxis, SrNet};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Anything that maps an `h x w` image to `(h*ry) x (w*rx)`.
pub trait Upscaler {
    /// `(row, column)` upscaling factors.
    fn factors(&self) -> (usize, usize);
    fn upscale(&self, image: &Tensor<f32>) -> Result<Tensor<f32>>;
}

impl<T: Scalar> Upscaler for SrNet<T> {
    fn factors(&self) -> (usize, usize) {
        self.config.output_dims(1, 1)
    }

    /// Runs the network on the whole image and clamps the result to `[0, 1]`.
    fn upscale(&self, image: &Tensor<f32>) -> Result<Tensor<f32>> {
        if image.rank() != 2 {
            return Err(Error::invalid(format!("expected an h x w image, got {:?}", image.shape())));
        }
        let trace = self.forward(&image.cast::<T>())?;
        Ok(trace.final_hr.cast::<f32>().clamp(0.0, 1.0))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct InferenceOptions {
    /// Median over the 8 dihedral transforms (in-plane stage only).
    pub self_ensemble: bool,
}

/// Super-resolves one slice with a two-axis network.
pub fn super_resolve_2d<T: Scalar>(net: &SrNet<T>, slice: &Tensor<f32>, opts: InferenceOptions) -> Result<Tensor<f32>> {
    if net.config.axis_mode != AxisMode::TwoAxes {
        return Err(Error::invalid("in-plane super-resolution needs a two-axis network"));
    }
    if opts.self_ensemble {
        self_ensemble(net, slice)
    } else {
        net.upscale(slice)
    }
}

/// LR-pixel margin beyond which tile borders cannot influence an output
/// pixel, as `(rows, cols)` in HR pixels: six LR convolutions before the
/// shuffle, four HR convolutions after it.
pub fn receptive_margin_hr(net_factors: (usize, usize)) -> (usize, usize) {
    (6 * net_factors.0 + 4, 6 * net_factors.1 + 4)
}

/// Runs `up` independently on non-overlapping `tile x tile` LR tiles and
/// stitches the results. Pixels further than [`receptive_margin_hr`] from an
/// interior tile border match whole-slice inference; the rest see zero
/// padding instead of their true neighbours.
pub fn super_resolve_tiled<U: Upscaler + ?Sized>(up: &U, slice: &Tensor<f32>, tile: usize) -> Result<Tensor<f32>> {
    if tile == 0 {
        return Err(Error::invalid("tile size must be positive"));
    }
    let (h, w) = slice.plane_dims();
    let (ry, rx) = up.factors();
    let (oh, ow) = (h * ry, w * rx);
    let mut out = vec![0f32; oh * ow];
    for ty in (0..h).step_by(tile) {
        for tx in (0..w).step_by(tile) {
            let (th, tw) = (tile.min(h - ty), tile.min(w - tx));
            let piece = Tensor::from_fn(&[th, tw], |i| slice.at2(ty + i / tw, tx + i % tw));
            let hr = up.upscale(&piece)?;
            let (hh, hw) = hr.plane_dims();
            for y in 0..hh {
                let dst = (ty * ry + y) * ow + tx * rx;
                out[dst..dst + hw].copy_from_slice(&hr.data()[y * hw..(y + 1) * hw]);
            }
        }
    }
    Tensor::new(&[oh, ow], out)
}

/// Applies a two-axis network to every axial slice.
pub fn super_resolve_slices<T: Scalar>(net_xy: &SrNet<T>, volume: &Volume, opts: InferenceOptions) -> Result<Volume> {
    let r = net_xy.config.scale;
    let slices = (0..volume.depth())
        .map(|z| super_resolve_2d(net_xy, &volume.axial_slice(z), opts))
        .collect::<Result<Vec<_>>>()?;
    let s = volume.spacing_mm;
    let mut out = Volume::from_axial_slices(&slices, [s[0] / r as f64, s[1] / r as f64, s[2]])?;
    out.intensity = volume.intensity;
    Ok(out)
}

/// Applies a row-axis network to every coronal plane, upscaling depth.
pub fn super_resolve_depth<T: Scalar>(net_z: &SrNet<T>, volume: &Volume) -> Result<Volume> {
    if net_z.config.axis_mode != AxisMode::OneAxis(ShuffleAxis::Rows) {
        return Err(Error::invalid("depth super-resolution needs a one-axis (rows) network"));
    }
    let r = net_z.config.scale;
    let planes = (0..volume.height())
        .map(|y| net_z.upscale(&volume.coronal_plane(y)))
        .collect::<Result<Vec<_>>>()?;
    let s = volume.spacing_mm;
    let mut out = Volume::from_coronal_planes(&planes, [s[0], s[1], s[2] / r as f64])?;
    out.intensity = volume.intensity;
    Ok(out)
}

/// Width/height with `net_xy`, then depth with `net_z`; every extent grows by
/// `r` and every spacing shrinks by `r`.
pub fn super_resolve_3d<T: Scalar>(
    net_xy: &SrNet<T>,
    net_z: &SrNet<T>,
    volume: &Volume,
    r: usize,
    opts: InferenceOptions,
) -> Result<Volume> {
    if net_xy.config.scale != r || net_z.config.scale != r {
        return Err(Error::invalid(format!(
            "factor mismatch: requested x{r}, in-plane network x{}, depth network x{}",
            net_xy.config.scale, net_z.config.scale
        )));
    }
    if net_xy.config.axis_mode != AxisMode::TwoAxes {
        return Err(Error::invalid("first stage needs a two-axis network"));
    }
    let stage1 = super_resolve_slices(net_xy, volume, opts)?;
    super_resolve_depth(net_z, &stage1)
}
