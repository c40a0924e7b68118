//! Information fidelity criterion.
//!
//! Simplified variant: a 3-level Laplacian pyramid (5-tap binomial low-pass,
//! decimation by 2) stands in for the steerable pyramid, and the Gaussian
//! scale mixture is reduced to one scalar multiplier per 3x3 neighbourhood.
//! Each band is modelled as `d = g c + v`; fidelity is
//! `sum 0.5 log2(1 + g^2 var(c) / var(v))` over all neighbourhoods and bands.
//! Values are comparable between methods scored by this implementation only.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const IFC_LEVELS: usize = 3;
pub const IFC_MIN_EXTENT: usize = 32;
const NEIGHBOURHOOD: usize = 3;
const VAR_FLOOR: f64 = 1e-10;
const BINOMIAL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

#[derive(Clone, Debug)]
struct Plane {
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl Plane {
    fn at(&self, y: isize, x: isize) -> f64 {
        // Symmetric reflection without edge repeat.
        let reflect = |i: isize, n: usize| {
            let n = n as isize;
            let mut i = i;
            if i < 0 {
                i = -i;
            }
            if i >= n {
                i = 2 * (n - 1) - i;
            }
            i.clamp(0, n - 1) as usize
        };
        self.data[reflect(y, self.h) * self.w + reflect(x, self.w)]
    }

    fn low_pass(&self) -> Plane {
        let mut tmp = vec![0.0; self.h * self.w];
        for y in 0..self.h {
            for x in 0..self.w {
                tmp[y * self.w + x] = (0..5).map(|k| BINOMIAL[k] * self.at(y as isize, x as isize + k as isize - 2)).sum();
            }
        }
        let rows = Plane { h: self.h, w: self.w, data: tmp };
        let mut out = vec![0.0; self.h * self.w];
        for y in 0..self.h {
            for x in 0..self.w {
                out[y * self.w + x] = (0..5).map(|k| BINOMIAL[k] * rows.at(y as isize + k as isize - 2, x as isize)).sum();
            }
        }
        Plane { h: self.h, w: self.w, data: out }
    }

    fn decimate(&self) -> Plane {
        let (h, w) = (self.h.div_ceil(2), self.w.div_ceil(2));
        let data = (0..h * w).map(|i| self.data[(i / w) * 2 * self.w + (i % w) * 2]).collect();
        Plane { h, w, data }
    }
}

fn band_pass_levels(img: Plane) -> Vec<Plane> {
    let mut bands = Vec::with_capacity(IFC_LEVELS);
    let mut level = img;
    for _ in 0..IFC_LEVELS {
        let low = level.low_pass();
        let band = level.data.iter().zip(&low.data).map(|(a, b)| a - b).collect();
        bands.push(Plane { h: level.h, w: level.w, data: band });
        level = low.decimate();
    }
    bands
}

fn band_fidelity(c: &Plane, d: &Plane) -> f64 {
    let n = (NEIGHBOURHOOD * NEIGHBOURHOOD) as f64;
    let mut total = 0.0;
    for y in 0..=c.h - NEIGHBOURHOOD {
        for x in 0..=c.w - NEIGHBOURHOOD {
            let (mut sc, mut sd, mut scc, mut sdd, mut scd) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for dy in 0..NEIGHBOURHOOD {
                for dx in 0..NEIGHBOURHOOD {
                    let i = (y + dy) * c.w + x + dx;
                    let (a, b) = (c.data[i], d.data[i]);
                    sc += a;
                    sd += b;
                    scc += a * a;
                    sdd += b * b;
                    scd += a * b;
                }
            }
            let (mc, md) = (sc / n, sd / n);
            let var_c = (scc / n - mc * mc).max(0.0);
            let var_d = (sdd / n - md * md).max(0.0);
            let cov = scd / n - mc * md;
            let (g, var_v) = if var_c < VAR_FLOOR {
                (0.0, var_d)
            } else {
                let g = cov / var_c;
                if g < 0.0 {
                    (0.0, var_d)
                } else {
                    (g, var_d - g * cov)
                }
            };
            let var_v = var_v.max(VAR_FLOOR);
            total += 0.5 * (1.0 + g * g * var_c / var_v).log2();
        }
    }
    total
}

/// Fidelity of `distorted` with respect to `reference`; non-negative and
/// largest for identical images.
pub fn ifc<T: Scalar>(reference: &Tensor<T>, distorted: &Tensor<T>) -> Result<f64> {
    reference.ensure_same_shape(distorted, "ifc")?;
    if reference.rank() != 2 {
        return Err(Error::invalid(format!("IFC expects h x w images, got {:?}", reference.shape())));
    }
    let (h, w) = reference.plane_dims();
    if h < IFC_MIN_EXTENT || w < IFC_MIN_EXTENT {
        return Err(Error::invalid(format!("image {h}x{w} is smaller than {IFC_MIN_EXTENT}x{IFC_MIN_EXTENT} required by IFC")));
    }
    let plane = |t: &Tensor<T>| Plane { h, w, data: t.data().iter().map(|v| v.to_f64_lossy()).collect() };
    let rb = band_pass_levels(plane(reference));
    let db = band_pass_levels(plane(distorted));
    Ok(rb.iter().zip(&db).map(|(c, d)| band_fidelity(c, d)).sum())
}
