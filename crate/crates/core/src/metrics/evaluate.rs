//! Degrade -> reconstruct -> score harness and its report formats.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ifc::ifc;
use super::quality::{psnr, ssim};
use super::resize::{resize_volume, ResizeMethod};
use crate::error::{Error, Result};
use crate::net::SrNet;
use crate::pipeline::{
    degrade_volume, super_resolve_3d, super_resolve_depth, super_resolve_slices, Axes, InferenceOptions, Volume,
};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Name of the degradation operator, recorded in every report.
pub const DEGRADATION: &str = "box-average";

/// A named way of turning a degraded volume back into a full-resolution one.
pub trait Reconstructor {
    fn name(&self) -> String;
    fn reconstruct(&self, lr: &Volume, r: usize, axes: Axes) -> Result<Volume>;
}

/// Returns the degraded input unchanged; only shape-compatible at `r = 1`.
pub struct Identity;

impl Reconstructor for Identity {
    fn name(&self) -> String {
        "identity".into()
    }
    fn reconstruct(&self, lr: &Volume, _r: usize, _axes: Axes) -> Result<Volume> {
        Ok(lr.clone())
    }
}

pub struct Interpolation(pub ResizeMethod);

impl Reconstructor for Interpolation {
    fn name(&self) -> String {
        self.0.to_string()
    }
    fn reconstruct(&self, lr: &Volume, r: usize, axes: Axes) -> Result<Volume> {
        resize_volume(lr, axes.factors(r).map(|f| f as f64), self.0)
    }
}

/// The trained networks: in-plane, depth, or both in sequence.
pub struct Cnn<T> {
    pub label: String,
    pub net_xy: Option<SrNet<T>>,
    pub net_z: Option<SrNet<T>>,
    pub options: InferenceOptions,
}

impl<T: Scalar> Reconstructor for Cnn<T> {
    fn name(&self) -> String {
        self.label.clone()
    }
    fn reconstruct(&self, lr: &Volume, r: usize, axes: Axes) -> Result<Volume> {
        let missing = |which: &str| Error::invalid(format!("{} needs a {which} network for axes {axes}", self.label));
        let check = |net: &SrNet<T>| {
            if net.config.scale == r {
                Ok(())
            } else {
                Err(Error::invalid(format!("network is x{}, evaluation is x{r}", net.config.scale)))
            }
        };
        match axes {
            Axes::Xy => {
                let xy = self.net_xy.as_ref().ok_or_else(|| missing("in-plane"))?;
                check(xy)?;
                super_resolve_slices(xy, lr, self.options)
            }
            Axes::Z => {
                let z = self.net_z.as_ref().ok_or_else(|| missing("depth"))?;
                check(z)?;
                super_resolve_depth(z, lr)
            }
            Axes::Xyz => {
                let xy = self.net_xy.as_ref().ok_or_else(|| missing("in-plane"))?;
                let z = self.net_z.as_ref().ok_or_else(|| missing("depth"))?;
                super_resolve_3d(xy, z, lr, r, self.options)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// One row per axial slice.
    Slices,
    /// One row per volume: PSNR over all voxels, SSIM and IFC averaged over
    /// axial slices.
    Volumes,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub mode: EvalMode,
    pub peak: f64,
    /// Round both images to 8-bit levels before scoring.
    pub quantize_8bit: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            mode: EvalMode::Slices,
            peak: 1.0,
            quantize_8bit: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub image_id: String,
    pub psnr_db: f64,
    pub ssim: f64,
    pub ifc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: String,
    pub factor: usize,
    pub axes: Axes,
    pub degradation: String,
    pub peak: f64,
    pub quantize_8bit: bool,
    /// Sorted by `image_id`.
    pub rows: Vec<MetricRow>,
}

fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

impl MetricReport {
    /// Arithmetic mean of every column (`image_id` = "mean").
    pub fn aggregate(&self) -> MetricRow {
        let n = self.rows.len() as f64;
        let mean = |f: fn(&MetricRow) -> f64| self.rows.iter().map(f).sum::<f64>() / n;
        MetricRow {
            image_id: "mean".into(),
            psnr_db: mean(|r| r.psnr_db),
            ssim: mean(|r| r.ssim),
            ifc: mean(|r| r.ifc),
        }
    }

    /// Header comment, column row, one row per image, then the means as a
    /// trailing comment so data rows always equal the image count.
    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# method={} factor={} axes={} degradation={} peak={} quantize_8bit={}\nimage_id,psnr_db,ssim,ifc\n",
            self.method, self.factor, self.axes, self.degradation, self.peak, self.quantize_8bit
        );
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{:.6},{:.4}", r.image_id, fmt_db(r.psnr_db), r.ssim, r.ifc);
        }
        let a = self.aggregate();
        let _ = writeln!(s, "# mean,{},{:.6},{:.4}", fmt_db(a.psnr_db), a.ssim, a.ifc);
        s
    }

    pub fn to_table(&self) -> String {
        let width = self.rows.iter().map(|r| r.image_id.len()).max().unwrap_or(0).max(8);
        let mut s = format!(
            "{} x{} ({}), {} degradation, PSNR peak {}\n{:<width$}  {:>10}  {:>8}  {:>10}\n",
            self.method, self.factor, self.axes, self.degradation, self.peak, "image_id", "PSNR[dB]", "SSIM", "IFC"
        );
        let rule = "-".repeat(width + 34);
        let _ = writeln!(s, "{rule}");
        let agg = self.aggregate();
        for (i, r) in self.rows.iter().chain(std::iter::once(&agg)).enumerate() {
            if i == self.rows.len() {
                let _ = writeln!(s, "{rule}");
            }
            let _ = writeln!(s, "{:<width$}  {:>10}  {:>8.4}  {:>10.4}", r.image_id, fmt_db(r.psnr_db), r.ssim, r.ifc);
        }
        s
    }
}

/// One summary line per method: mean PSNR / SSIM / IFC.
pub fn summary_table(reports: &[MetricReport]) -> String {
    let width = reports.iter().map(|r| r.method.len()).max().unwrap_or(0).max(6);
    let mut s = format!("{:<width$}  {:>10}  {:>8}  {:>10}\n", "method", "PSNR[dB]", "SSIM", "IFC");
    for rep in reports {
        let a = rep.aggregate();
        let _ = writeln!(s, "{:<width$}  {:>10}  {:>8.4}  {:>10.4}", rep.method, fmt_db(a.psnr_db), a.ssim, a.ifc);
    }
    s
}

fn quantize(t: Tensor<f64>) -> Tensor<f64> {
    t.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0)
}

/// Degrades every volume by `r` along `axes`, reconstructs it with `method`
/// and scores the result against the (cropped) original.
pub fn evaluate(
    method: &dyn Reconstructor,
    dataset: &[(String, Volume)],
    r: usize,
    axes: Axes,
    opts: EvalOptions,
) -> Result<MetricReport> {
    if dataset.is_empty() {
        return Err(Error::invalid("evaluation dataset is empty"));
    }
    let mut rows = Vec::new();
    for (name, volume) in dataset {
        let hr = volume.center_crop_to_multiple(axes.factors(r))?;
        let lr = degrade_volume(&hr, r, axes)?;
        let rec = method.reconstruct(&lr, r, axes)?;
        if rec.extents() != hr.extents() {
            return Err(Error::invalid(format!(
                "{} produced {:?} for a {:?} target",
                method.name(),
                rec.extents(),
                hr.extents()
            )));
        }
        let slice = |v: &Volume, z: usize| {
            let t = v.axial_slice::<f64>(z);
            if opts.quantize_8bit {
                quantize(t)
            } else {
                t
            }
        };
        let mut per_slice = Vec::with_capacity(hr.depth());
        for z in 0..hr.depth() {
            let (a, b) = (slice(&hr, z), slice(&rec, z));
            per_slice.push(MetricRow {
                image_id: format!("{name}/z{z:03}"),
                psnr_db: psnr(&a, &b, opts.peak)?,
                ssim: ssim(&a, &b)?,
                ifc: ifc(&a, &b)?,
            });
        }
        match opts.mode {
            EvalMode::Slices => rows.extend(per_slice),
            EvalMode::Volumes => {
                let whole = |v: &Volume| {
                    let t = Tensor::from_fn(&[v.voxels().len()], |i| v.voxels()[i] as f64);
                    if opts.quantize_8bit {
                        quantize(t)
                    } else {
                        t
                    }
                };
                let n = per_slice.len() as f64;
                rows.push(MetricRow {
                    image_id: name.clone(),
                    psnr_db: psnr(&whole(&hr), &whole(&rec), opts.peak)?,
                    ssim: per_slice.iter().map(|r| r.ssim).sum::<f64>() / n,
                    ifc: per_slice.iter().map(|r| r.ifc).sum::<f64>() / n,
                });
            }
        }
    }
    rows.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    Ok(MetricReport {
        method: method.name(),
        factor: r,
        axes,
        degradation: DEGRADATION.into(),
        peak: opts.peak,
        quantize_8bit: opts.quantize_8bit,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smooth(n: usize, d: usize, phase: f32) -> Volume {
        let mut v = Vec::with_capacity(n * n * d);
        for y in 0..n {
            for x in 0..n {
                for z in 0..d {
                    let (fx, fy, fz) = (x as f32, y as f32, z as f32);
                    v.push(0.5 + 0.3 * (0.15 * fx + phase).sin() * (0.11 * fy).cos() + 0.1 * (0.2 * fz).sin());
                }
            }
        }
        Volume::new(n, n, d, v, [1.0; 3]).unwrap()
    }

    #[test]
    fn identity_at_unit_factor_is_perfect() {
        let data = vec![("a".to_string(), smooth(32, 2, 0.0))];
        let rep = evaluate(&Identity, &data, 1, Axes::Xy, EvalOptions::default()).unwrap();
        assert_eq!(rep.rows.len(), 2);
        for r in &rep.rows {
            assert_eq!(r.psnr_db, f64::INFINITY);
            assert!((r.ssim - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregate_is_row_mean_and_rows_sorted() {
        let data = vec![("b".to_string(), smooth(32, 2, 0.3)), ("a".to_string(), smooth(32, 2, 1.0))];
        let rep = evaluate(&Interpolation(ResizeMethod::Bilinear), &data, 2, Axes::Xy, EvalOptions::default()).unwrap();
        let ids: Vec<_> = rep.rows.iter().map(|r| r.image_id.as_str()).collect();
        assert_eq!(ids, ["a/z000", "a/z001", "b/z000", "b/z001"]);
        let agg = rep.aggregate();
        let mean_psnr = rep.rows.iter().map(|r| r.psnr_db).sum::<f64>() / 4.0;
        assert!((agg.psnr_db - mean_psnr).abs() < 1e-12);
        assert!(rep.to_csv().starts_with("# method=bilinear factor=2 axes=xy degradation=box-average peak=1"));
        assert_eq!(rep.to_csv().lines().count(), 2 + 4 + 1);
        assert!(rep.to_table().contains("mean"));
    }

    #[test]
    fn lanczos_beats_nearest_on_smooth_data() {
        let data = vec![("s".to_string(), smooth(48, 2, 0.2))];
        let score = |m| {
            evaluate(&Interpolation(m), &data, 2, Axes::Xy, EvalOptions::default())
                .unwrap()
                .aggregate()
                .psnr_db
        };
        assert!(score(ResizeMethod::Nearest) <= score(ResizeMethod::Lanczos));
    }

    #[test]
    fn volume_mode_and_errors() {
        let data = vec![("v".to_string(), smooth(32, 4, 0.0))];
        let opts = EvalOptions {
            mode: EvalMode::Volumes,
            quantize_8bit: true,
            ..Default::default()
        };
        let rep = evaluate(&Interpolation(ResizeMethod::Bicubic), &data, 2, Axes::Xyz, opts).unwrap();
        assert_eq!(rep.rows.len(), 1);
        assert!(rep.rows[0].psnr_db.is_finite());
        assert!(evaluate(&Identity, &[], 2, Axes::Xy, EvalOptions::default()).is_err());
        assert!(evaluate(&Identity, &data, 2, Axes::Xy, EvalOptions::default()).is_err());
    }
}
