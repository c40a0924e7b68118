use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Affine map from normalized `[0, 1]` intensities back to source units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntensityMapping {
    pub min: f64,
    pub max: f64,
}

impl IntensityMapping {
    pub fn to_source(&self, v: f32) -> f64 {
        self.min + v as f64 * (self.max - self.min)
    }
}

/// Which axes an operation resamples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axes {
    Xy,
    Z,
    Xyz,
}

impl Axes {
    pub fn touches_xy(self) -> bool {
        matches!(self, Axes::Xy | Axes::Xyz)
    }

    pub fn touches_z(self) -> bool {
        matches!(self, Axes::Z | Axes::Xyz)
    }

    /// Per-axis factor `(x, y, z)` for a uniform factor `r` on the selected axes.
    pub fn factors(self, r: usize) -> [usize; 3] {
        let xy = if self.touches_xy() { r } else { 1 };
        let z = if self.touches_z() { r } else { 1 };
        [xy, xy, z]
    }
}

impl std::str::FromStr for Axes {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xy" => Ok(Axes::Xy),
            "z" => Ok(Axes::Z),
            "xyz" => Ok(Axes::Xyz),
            other => Err(Error::invalid(format!("unknown axes '{other}' (expected xy, z or xyz)"))),
        }
    }
}

impl std::fmt::Display for Axes {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Axes::Xy => "xy",
            Axes::Z => "z",
            Axes::Xyz => "xyz",
        })
    }
}

/// Grayscale 3D image with intensities in `[0, 1]`.
///
/// Voxels are stored row-major over `(y, x, z)`: index `(y * width + x) * depth + z`.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    width: usize,
    height: usize,
    depth: usize,
    voxels: Vec<f32>,
    /// Voxel size along `(x, y, z)`.
    pub spacing_mm: [f64; 3],
    pub intensity: Option<IntensityMapping>,
}

impl Volume {
    pub fn new(width: usize, height: usize, depth: usize, voxels: Vec<f32>, spacing_mm: [f64; 3]) -> Result<Self> {
        if width == 0 || height == 0 || depth == 0 {
            return Err(Error::invalid(format!("volume extents must be positive, got {width}x{height}x{depth}")));
        }
        if voxels.len() != width * height * depth {
            return Err(Error::invalid(format!(
                "{width}x{height}x{depth} volume needs {} voxels, got {}",
                width * height * depth,
                voxels.len()
            )));
        }
        if let Some(bad) = voxels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("voxel intensity {bad} outside [0, 1]")));
        }
        if spacing_mm.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid(format!("spacing must be positive, got {spacing_mm:?}")));
        }
        Ok(Self {
            width,
            height,
            depth,
            voxels,
            spacing_mm,
            intensity: None,
        })
    }

    /// Min-max normalizes arbitrary intensities into `[0, 1]`, recording the inverse map.
    pub fn from_raw_intensities(
        width: usize,
        height: usize,
        depth: usize,
        values: &[f64],
        spacing_mm: [f64; 3],
    ) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("raw volume intensities".into()));
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let voxels = values.iter().map(|v| ((v - lo) / span).clamp(0.0, 1.0) as f32).collect();
        let mut vol = Self::new(width, height, depth, voxels, spacing_mm)?;
        vol.intensity = Some(IntensityMapping { min: lo, max: lo + span });
        Ok(vol)
    }

    /// Builds a volume from `depth` slices of `height x width`.
    pub fn from_axial_slices<T: Scalar>(slices: &[Tensor<T>], spacing_mm: [f64; 3]) -> Result<Self> {
        let first = slices.first().ok_or_else(|| Error::invalid("no slices"))?;
        let (h, w) = first.plane_dims();
        let d = slices.len();
        let mut voxels = vec![0f32; w * h * d];
        for (z, s) in slices.iter().enumerate() {
            if s.shape() != [h, w] {
                return Err(Error::shape("axial slice", s.shape(), &[h, w]));
            }
            for (i, &v) in s.data().iter().enumerate() {
                voxels[i * d + z] = v.to_f64_lossy().clamp(0.0, 1.0) as f32;
            }
        }
        Self::new(w, h, d, voxels, spacing_mm)
    }

    /// Builds a volume from `height` coronal planes of `depth x width`.
    pub fn from_coronal_planes<T: Scalar>(planes: &[Tensor<T>], spacing_mm: [f64; 3]) -> Result<Self> {
        let first = planes.first().ok_or_else(|| Error::invalid("no planes"))?;
        let (d, w) = first.plane_dims();
        let h = planes.len();
        let mut voxels = vec![0f32; w * h * d];
        for (y, p) in planes.iter().enumerate() {
            if p.shape() != [d, w] {
                return Err(Error::shape("coronal plane", p.shape(), &[d, w]));
            }
            let data = p.data();
            for x in 0..w {
                for z in 0..d {
                    voxels[(y * w + x) * d + z] = data[z * w + x].to_f64_lossy().clamp(0.0, 1.0) as f32;
                }
            }
        }
        Self::new(w, h, d, voxels, spacing_mm)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// `(width, height, depth)`.
    pub fn extents(&self) -> [usize; 3] {
        [self.width, self.height, self.depth]
    }

    pub fn voxels(&self) -> &[f32] {
        &self.voxels
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (y * self.width + x) * self.depth + z
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.voxels[self.index(x, y, z)]
    }

    /// `height x width` slice at depth `z`.
    pub fn axial_slice<T: Scalar>(&self, z: usize) -> Tensor<T> {
        Tensor::from_fn(&[self.height, self.width], |i| T::from_f64_lossy(self.voxels[i * self.depth + z] as f64))
    }

    /// `depth x width` plane at row `y`; rows run along depth.
    pub fn coronal_plane<T: Scalar>(&self, y: usize) -> Tensor<T> {
        let (w, d) = (self.width, self.depth);
        Tensor::from_fn(&[d, w], |i| {
            let (z, x) = (i / w, i % w);
            T::from_f64_lossy(self.voxels[(y * w + x) * d + z] as f64)
        })
    }

    /// `depth x height` plane at column `x`; rows run along depth.
    pub fn sagittal_plane<T: Scalar>(&self, x: usize) -> Tensor<T> {
        let (h, d) = (self.height, self.depth);
        Tensor::from_fn(&[d, h], |i| {
            let (z, y) = (i / h, i % h);
            T::from_f64_lossy(self.voxels[(y * self.width + x) * d + z] as f64)
        })
    }

    /// Center-crops each extent down to a multiple of its factor `(x, y, z)`.
    pub fn center_crop_to_multiple(&self, factors: [usize; 3]) -> Result<Self> {
        let ext = self.extents();
        let mut new = [0usize; 3];
        let mut off = [0usize; 3];
        for a in 0..3 {
            if factors[a] == 0 {
                return Err(Error::invalid("crop factor must be positive"));
            }
            new[a] = ext[a] / factors[a] * factors[a];
            if new[a] == 0 {
                return Err(Error::invalid(format!(
                    "extent {} is smaller than factor {} along axis {a}",
                    ext[a], factors[a]
                )));
            }
            off[a] = (ext[a] - new[a]) / 2;
        }
        if new == ext {
            return Ok(self.clone());
        }
        let [w, h, d] = new;
        let mut voxels = Vec::with_capacity(w * h * d);
        for y in 0..h {
            for x in 0..w {
                for z in 0..d {
                    voxels.push(self.get(x + off[0], y + off[1], z + off[2]));
                }
            }
        }
        let mut out = Self::new(w, h, d, voxels, self.spacing_mm)?;
        out.intensity = self.intensity;
        Ok(out)
    }

    pub(crate) fn with_voxels(&self, extents: [usize; 3], voxels: Vec<f32>, spacing_mm: [f64; 3]) -> Result<Self> {
        let mut out = Self::new(extents[0], extents[1], extents[2], voxels, spacing_mm)?;
        out.intensity = self.intensity;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize, d: usize) -> Volume {
        let n = w * h * d;
        Volume::new(w, h, d, (0..n).map(|i| i as f32 / n as f32).collect(), [1.0; 3]).unwrap()
    }

    #[test]
    fn rejects_out_of_range_and_bad_extents() {
        assert!(Volume::new(2, 2, 1, vec![0.0, 0.5, 1.0, 1.5], [1.0; 3]).is_err());
        assert!(Volume::new(2, 2, 1, vec![0.0; 3], [1.0; 3]).is_err());
        assert!(Volume::new(2, 2, 1, vec![0.0; 4], [0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn normalization_records_inverse() {
        let v = Volume::from_raw_intensities(2, 1, 1, &[-1000.0, 3000.0], [1.0; 3]).unwrap();
        assert_eq!(v.voxels(), &[0.0, 1.0]);
        let m = v.intensity.unwrap();
        assert_eq!(m.to_source(0.5), 1000.0);
    }

    #[test]
    fn slices_and_planes_agree_with_indexing() {
        let v = ramp(4, 3, 5);
        let ax: Tensor<f64> = v.axial_slice(2);
        assert_eq!(ax.at2(1, 3), v.get(3, 1, 2) as f64);
        let co: Tensor<f64> = v.coronal_plane(2);
        assert_eq!(co.shape(), &[5, 4]);
        assert_eq!(co.at2(4, 1), v.get(1, 2, 4) as f64);
        let sa: Tensor<f64> = v.sagittal_plane(3);
        assert_eq!(sa.shape(), &[5, 3]);
        assert_eq!(sa.at2(0, 2), v.get(3, 2, 0) as f64);
    }

    #[test]
    fn slice_round_trips() {
        let v = ramp(4, 3, 5);
        let slices: Vec<Tensor<f32>> = (0..5).map(|z| v.axial_slice(z)).collect();
        assert_eq!(Volume::from_axial_slices(&slices, [1.0; 3]).unwrap(), v);
        let planes: Vec<Tensor<f32>> = (0..3).map(|y| v.coronal_plane(y)).collect();
        assert_eq!(Volume::from_coronal_planes(&planes, [1.0; 3]).unwrap(), v);
    }

    #[test]
    fn center_crop() {
        let v = ramp(65, 64, 64);
        let c = v.center_crop_to_multiple([2, 2, 2]).unwrap();
        assert_eq!(c.extents(), [64, 64, 64]);
        assert_eq!(c.get(0, 0, 0), v.get(0, 0, 0));
        let v = ramp(7, 4, 5);
        let c = v.center_crop_to_multiple([2, 2, 2]).unwrap();
        assert_eq!(c.extents(), [6, 4, 4]);
        assert_eq!(c.get(0, 0, 0), v.get(0, 0, 0));
        let c = v.center_crop_to_multiple([4, 4, 4]).unwrap();
        assert_eq!(c.get(0, 0, 0), v.get(1, 0, 0));
    }
}
