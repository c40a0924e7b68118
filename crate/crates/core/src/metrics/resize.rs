//! Interpolation baselines. Sample positions use the half-pixel-centre
//! convention: output index `o` reads source coordinate `(o + 0.5) / s - 0.5`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::Volume;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResizeMethod {
    Nearest,
    Bilinear,
    /// Keys cubic, a = -0.5.
    Bicubic,
    /// Three-lobe Lanczos.
    Lanczos,
}

impl ResizeMethod {
    pub const ALL: [ResizeMethod; 4] = [Self::Nearest, Self::Bilinear, Self::Bicubic, Self::Lanczos];

    fn support(self) -> f64 {
        match self {
            Self::Nearest => 0.5,
            Self::Bilinear => 1.0,
            Self::Bicubic => 2.0,
            Self::Lanczos => 3.0,
        }
    }

    fn kernel(self, x: f64) -> f64 {
        let t = x.abs();
        match self {
            Self::Nearest => unreachable!("nearest is index-based"),
            Self::Bilinear => (1.0 - t).max(0.0),
            Self::Bicubic => {
                const A: f64 = -0.5;
                if t <= 1.0 {
                    (A + 2.0) * t * t * t - (A + 3.0) * t * t + 1.0
                } else if t < 2.0 {
                    A * t * t * t - 5.0 * A * t * t + 8.0 * A * t - 4.0 * A
                } else {
                    0.0
                }
            }
            Self::Lanczos => {
                if t < 1e-12 {
                    1.0
                } else if t < 3.0 {
                    let px = PI * t;
                    3.0 * px.sin() * (px / 3.0).sin() / (px * px)
                } else {
                    0.0
                }
            }
        }
    }
}

impl fmt::Display for ResizeMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Nearest => "nearest",
            Self::Bilinear => "bilinear",
            Self::Bicubic => "bicubic",
            Self::Lanczos => "lanczos",
        })
    }
}

impl FromStr for ResizeMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nearest" => Ok(Self::Nearest),
            "bilinear" => Ok(Self::Bilinear),
            "bicubic" => Ok(Self::Bicubic),
            "lanczos" | "lanczos3" => Ok(Self::Lanczos),
            other => Err(Error::invalid(format!(
                "unknown resize method '{other}' (expected nearest, bilinear, bicubic or lanczos)"
            ))),
        }
    }
}

/// Per-output-sample taps `(source index, weight)`, weights summing to one.
fn axis_taps(n_in: usize, n_out: usize, method: ResizeMethod) -> Vec<Vec<(usize, f64)>> {
    let scale = n_out as f64 / n_in as f64;
    let last = n_in as isize - 1;
    (0..n_out)
        .map(|o| {
            let center = (o as f64 + 0.5) / scale - 0.5;
            if method == ResizeMethod::Nearest {
                let i = ((center + 0.5).floor() as isize).clamp(0, last);
                return vec![(i as usize, 1.0)];
            }
            let s = method.support();
            let lo = (center - s).floor() as isize + 1;
            let hi = (center + s).ceil() as isize - 1;
            let mut taps: Vec<(usize, f64)> = Vec::with_capacity((hi - lo + 1) as usize);
            for i in lo..=hi {
                let w = method.kernel(center - i as f64);
                if w != 0.0 {
                    taps.push((i.clamp(0, last) as usize, w));
                }
            }
            let total: f64 = taps.iter().map(|t| t.1).sum();
            for t in &mut taps {
                t.1 /= total;
            }
            taps
        })
        .collect()
}

fn out_extent(n: usize, factor: f64) -> Result<usize> {
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(Error::invalid(format!("resize factor must be positive, got {factor}")));
    }
    let m = (n as f64 * factor).round() as usize;
    if m == 0 {
        return Err(Error::invalid(format!("factor {factor} shrinks extent {n} to zero")));
    }
    Ok(m)
}

/// Resamples an `h x w` image to `out_h x out_w`.
pub fn resize_to<T: Scalar>(image: &Tensor<T>, out_h: usize, out_w: usize, method: ResizeMethod) -> Result<Tensor<T>> {
    if image.rank() != 2 {
        return Err(Error::invalid(format!("resize expects an h x w image, got {:?}", image.shape())));
    }
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid("resize target must be non-empty"));
    }
    let (h, w) = image.plane_dims();
    let src: Vec<f64> = image.data().iter().map(|v| v.to_f64_lossy()).collect();
    let col_taps = axis_taps(w, out_w, method);
    let mut rows = vec![0.0; h * out_w];
    for y in 0..h {
        for (x, taps) in col_taps.iter().enumerate() {
            rows[y * out_w + x] = taps.iter().map(|&(i, wt)| wt * src[y * w + i]).sum();
        }
    }
    let row_taps = axis_taps(h, out_h, method);
    Ok(Tensor::from_fn(&[out_h, out_w], |k| {
        let (y, x) = (k / out_w, k % out_w);
        T::from_f64_lossy(row_taps[y].iter().map(|&(i, wt)| wt * rows[i * out_w + x]).sum())
    }))
}

/// Resamples by `factor` on both axes; extents round to the nearest integer.
pub fn resize<T: Scalar>(image: &Tensor<T>, factor: f64, method: ResizeMethod) -> Result<Tensor<T>> {
    let (h, w) = image.plane_dims();
    resize_to(image, out_extent(h, factor)?, out_extent(w, factor)?, method)
}

/// Separable resampling of a volume by per-axis factors `(x, y, z)`. Results
/// are clamped to `[0, 1]`; spacing shrinks by the realised ratio.
pub fn resize_volume(volume: &Volume, factors: [f64; 3], method: ResizeMethod) -> Result<Volume> {
    let ext = volume.extents();
    let new = [
        out_extent(ext[0], factors[0])?,
        out_extent(ext[1], factors[1])?,
        out_extent(ext[2], factors[2])?,
    ];
    let mut data: Vec<f64> = volume.voxels().iter().map(|&v| v as f64).collect();
    let mut cur = ext;
    // One pass per axis (x, y, z); storage order is (y, x, z).
    for axis in 0..3 {
        if new[axis] == cur[axis] {
            continue;
        }
        let taps = axis_taps(cur[axis], new[axis], method);
        let mut next_ext = cur;
        next_ext[axis] = new[axis];
        let [w, _, d] = cur;
        let [nw, nh, nd] = next_ext;
        let mut out = vec![0.0; nw * nh * nd];
        for y in 0..nh {
            for x in 0..nw {
                for z in 0..nd {
                    let (list, src): (_, &dyn Fn(usize) -> usize) = match axis {
                        0 => (&taps[x], &|i| (y * w + i) * d + z),
                        1 => (&taps[y], &|i| (i * w + x) * d + z),
                        _ => (&taps[z], &|i| (y * w + x) * d + i),
                    };
                    out[(y * nw + x) * nd + z] = list.iter().map(|&(i, wt)| wt * data[src(i)]).sum();
                }
            }
        }
        data = out;
        cur = next_ext;
    }
    let s = volume.spacing_mm;
    let spacing = [
        s[0] * ext[0] as f64 / new[0] as f64,
        s[1] * ext[1] as f64 / new[1] as f64,
        s[2] * ext[2] as f64 / new[2] as f64,
    ];
    let voxels = data.into_iter().map(|v| v.clamp(0.0, 1.0) as f32).collect();
    let mut out = Volume::new(new[0], new[1], new[2], voxels, spacing)?;
    out.intensity = volume.intensity;
    Ok(out)
}
