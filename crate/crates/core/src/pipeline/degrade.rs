use super::volume::{Axes, Volume};
use crate::error::{Error, Result};

/// Box-average downsampling by `r` along the selected axes.
pub fn degrade_volume(hr: &Volume, r: usize, axes: Axes) -> Result<Volume> {
    if r == 0 {
        return Err(Error::invalid("degradation factor must be positive"));
    }
    let f = axes.factors(r);
    let ext = hr.extents();
    for a in 0..3 {
        if ext[a] % f[a] != 0 {
            return Err(Error::invalid(format!(
                "extent {} along axis {} is not divisible by {} (crop first)",
                ext[a],
                ["x", "y", "z"][a],
                f[a]
            )));
        }
    }
    let [w, h, d] = [ext[0] / f[0], ext[1] / f[1], ext[2] / f[2]];
    let norm = 1.0 / (f[0] * f[1] * f[2]) as f64;
    let mut voxels = Vec::with_capacity(w * h * d);
    for y in 0..h {
        for x in 0..w {
            for z in 0..d {
                let mut acc = 0.0f64;
                for by in 0..f[1] {
                    for bx in 0..f[0] {
                        for bz in 0..f[2] {
                            acc += hr.get(x * f[0] + bx, y * f[1] + by, z * f[2] + bz) as f64;
                        }
                    }
                }
                voxels.push(((acc * norm) as f32).clamp(0.0, 1.0));
            }
        }
    }
    let spacing = [
        hr.spacing_mm[0] * f[0] as f64,
        hr.spacing_mm[1] * f[1] as f64,
        hr.spacing_mm[2] * f[2] as f64,
    ];
    hr.with_voxels([w, h, d], voxels, spacing)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_stays_constant() {
        let v = Volume::new(4, 4, 4, vec![0.42; 64], [1.0; 3]).unwrap();
        let lr = degrade_volume(&v, 2, Axes::Xyz).unwrap();
        assert_eq!(lr.extents(), [2, 2, 2]);
        assert!(lr.voxels().iter().all(|&x| (x - 0.42).abs() < 1e-7));
        assert_eq!(lr.spacing_mm, [2.0; 3]);
    }

    #[test]
    fn block_mean() {
        // y-major storage: (y, x) = (0,0) 0.0, (0,1) 0.2, (1,0) 0.4, (1,1) 0.6.
        let v = Volume::new(2, 2, 1, vec![0.0, 0.2, 0.4, 0.6], [1.0; 3]).unwrap();
        let lr = degrade_volume(&v, 2, Axes::Xy).unwrap();
        assert_eq!(lr.extents(), [1, 1, 1]);
        assert!((lr.voxels()[0] - 0.3).abs() < 1e-7);
    }

    #[test]
    fn factor_one_is_identity() {
        let v = Volume::new(3, 2, 2, (0..12).map(|i| i as f32 / 12.0).collect(), [0.5, 0.5, 2.0]).unwrap();
        assert_eq!(degrade_volume(&v, 1, Axes::Xyz).unwrap(), v);
    }

    #[test]
    fn depth_only() {
        let v = Volume::new(2, 2, 4, (0..16).map(|i| i as f32 / 16.0).collect(), [1.0; 3]).unwrap();
        let lr = degrade_volume(&v, 2, Axes::Z).unwrap();
        assert_eq!(lr.extents(), [2, 2, 2]);
        assert!((lr.get(1, 0, 1) - (v.get(1, 0, 2) + v.get(1, 0, 3)) / 2.0).abs() < 1e-7);
        assert_eq!(lr.spacing_mm, [1.0, 1.0, 2.0]);
    }

    #[test]
    fn indivisible_rejected() {
        let v = Volume::new(3, 2, 2, vec![0.0; 12], [1.0; 3]).unwrap();
        assert!(degrade_volume(&v, 2, Axes::Xy).is_err());
        assert!(degrade_volume(&v, 2, Axes::Z).is_ok());
    }
}
