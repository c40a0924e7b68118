//! Geometric self-ensemble: the 8 dihedral transforms, per-pixel median.

use super::infer::Upscaler;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Number of dihedral transforms (4 rotations x optional horizontal flip).
pub const ENSEMBLE_SIZE: usize = 8;

fn flip_horizontal(img: &Tensor<f32>) -> Tensor<f32> {
    let (h, w) = img.plane_dims();
    let src = img.data();
    Tensor::from_fn(&[h, w], |i| src[(i / w) * w + (w - 1 - i % w)])
}

/// Quarter turn counter-clockwise.
fn rot90(img: &Tensor<f32>) -> Tensor<f32> {
    let (h, w) = img.plane_dims();
    let src = img.data();
    // out is w x h; out[i][j] = in[j][w-1-i]
    Tensor::from_fn(&[w, h], |k| {
        let (i, j) = (k / h, k % h);
        src[j * w + (w - 1 - i)]
    })
}

fn rotate(img: &Tensor<f32>, quarter_turns: usize) -> Tensor<f32> {
    let mut out = img.clone();
    for _ in 0..quarter_turns % 4 {
        out = rot90(&out);
    }
    out
}

/// Transform `k` in `0..8`: optional flip (k >= 4), then `k % 4` quarter turns.
pub fn dihedral(img: &Tensor<f32>, k: usize) -> Tensor<f32> {
    let base = if k >= 4 { flip_horizontal(img) } else { img.clone() };
    rotate(&base, k % 4)
}

pub fn dihedral_inverse(img: &Tensor<f32>, k: usize) -> Tensor<f32> {
    let unrotated = rotate(img, (4 - k % 4) % 4);
    if k >= 4 {
        flip_horizontal(&unrotated)
    } else {
        unrotated
    }
}

/// Per-pixel median of equally shaped candidates. For an even count this is
/// the mean of the two middle order statistics.
pub fn pixelwise_median(candidates: &[Tensor<f32>]) -> Result<Tensor<f32>> {
    let first = candidates.first().ok_or_else(|| Error::invalid("no candidates"))?;
    for c in candidates {
        first.ensure_same_shape(c, "median")?;
    }
    let n = candidates.len();
    let mut buf = vec![0f32; n];
    Ok(Tensor::from_fn(first.shape(), |i| {
        for (b, c) in buf.iter_mut().zip(candidates) {
            *b = c.data()[i];
        }
        buf.sort_unstable_by(f32::total_cmp);
        if n % 2 == 1 {
            buf[n / 2]
        } else {
            (buf[n / 2 - 1] + buf[n / 2]) / 2.0
        }
    }))
}

/// Super-resolves all 8 dihedral variants of `slice`, maps each result back,
/// and returns their per-pixel median.
pub fn self_ensemble<U: Upscaler + ?Sized>(up: &U, slice: &Tensor<f32>) -> Result<Tensor<f32>> {
    let (ry, rx) = up.factors();
    if ry != rx {
        return Err(Error::invalid(format!(
            "self-ensemble needs an isotropic upscaler, got factors {ry}x{rx}"
        )));
    }
    let aligned = (0..ENSEMBLE_SIZE)
        .map(|k| up.upscale(&dihedral(slice, k)).map(|hr| dihedral_inverse(&hr, k)))
        .collect::<Result<Vec<_>>>()?;
    pixelwise_median(&aligned)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    /// Nearest-neighbour replication; commutes with every dihedral transform.
    struct Replicate {
        r: usize,
        calls: Cell<usize>,
    }

    impl Upscaler for Replicate {
        fn factors(&self) -> (usize, usize) {
            (self.r, self.r)
        }
        fn upscale(&self, img: &Tensor<f32>) -> Result<Tensor<f32>> {
            self.calls.set(self.calls.get() + 1);
            let (h, w) = img.plane_dims();
            let r = self.r;
            Ok(Tensor::from_fn(&[h * r, w * r], |i| img.at2(i / (w * r) / r, (i % (w * r)) / r)))
        }
    }

    /// Adds a position-dependent bias so outputs differ per transform.
    struct Biased;

    impl Upscaler for Biased {
        fn factors(&self) -> (usize, usize) {
            (1, 1)
        }
        fn upscale(&self, img: &Tensor<f32>) -> Result<Tensor<f32>> {
            let w = img.plane_dims().1;
            Ok(Tensor::from_fn(img.shape(), |i| img.data()[i] + (i % w) as f32 * 0.01 + (i / w) as f32 * 0.003))
        }
    }

    fn sample(h: usize, w: usize) -> Tensor<f32> {
        Tensor::from_fn(&[h, w], |i| ((i * 37) % 101) as f32 / 101.0)
    }

    #[test]
    fn transforms_invert_and_are_distinct() {
        let img = sample(3, 5);
        let mut seen = Vec::new();
        for k in 0..ENSEMBLE_SIZE {
            let t = dihedral(&img, k);
            assert_eq!(dihedral_inverse(&t, k), img, "k={k}");
            assert!(!seen.contains(&t));
            seen.push(t);
        }
        assert_eq!(dihedral(&img, 1).shape(), &[5, 3]);
    }

    #[test]
    fn rot90_matches_hand_example() {
        // [[1,2],[3,4]] turned counter-clockwise is [[2,4],[1,3]].
        let img = Tensor::new(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(rot90(&img).data(), &[2.0, 4.0, 1.0, 3.0]);
    }

    #[test]
    fn equivariant_stub_matches_single_pass_exactly() {
        let up = Replicate { r: 2, calls: Cell::new(0) };
        let img = sample(6, 9);
        let single = up.upscale(&img).unwrap();
        up.calls.set(0);
        let ens = self_ensemble(&up, &img).unwrap();
        assert_eq!(up.calls.get(), 8);
        assert_eq!(ens, single);
    }

    #[test]
    fn constant_in_constant_out() {
        let up = Replicate { r: 2, calls: Cell::new(0) };
        let ens = self_ensemble(&up, &Tensor::full(&[4, 4], 0.25)).unwrap();
        assert!(ens.data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn median_of_eight_is_mean_of_middle_pair() {
        let vals = [7.0, 1.0, 5.0, 3.0, 8.0, 2.0, 6.0, 4.0];
        let cands: Vec<_> = vals.iter().map(|&v| Tensor::full(&[1, 1], v)).collect();
        assert_eq!(pixelwise_median(&cands).unwrap().data(), &[4.5]);
        let mut rev = cands.clone();
        rev.reverse();
        assert_eq!(pixelwise_median(&rev).unwrap(), pixelwise_median(&cands).unwrap());
    }

    #[test]
    fn median_bounded_by_candidates() {
        let img = sample(5, 5);
        let ens = self_ensemble(&Biased, &img).unwrap();
        let aligned: Vec<_> = (0..8)
            .map(|k| dihedral_inverse(&Biased.upscale(&dihedral(&img, k)).unwrap(), k))
            .collect();
        for i in 0..ens.len() {
            let lo = aligned.iter().map(|a| a.data()[i]).fold(f32::INFINITY, f32::min);
            let hi = aligned.iter().map(|a| a.data()[i]).fold(f32::NEG_INFINITY, f32::max);
            assert!(lo <= ens.data()[i] && ens.data()[i] <= hi);
        }
        assert_ne!(ens, Biased.upscale(&img).unwrap());
    }

    #[test]
    fn anisotropic_upscaler_rejected() {
        struct Rows;
        impl Upscaler for Rows {
            fn factors(&self) -> (usize, usize) {
                (2, 1)
            }
            fn upscale(&self, img: &Tensor<f32>) -> Result<Tensor<f32>> {
                Ok(img.clone())
            }
        }
        assert!(self_ensemble(&Rows, &sample(2, 2)).is_err());
    }
}
