//! Sub-pixel rearrangements between channel stacks and upscaled planes.
//!
//! All functions take `N x C x H x W` batches (or `C x H x W` single maps)
//! and return a single-channel result of the same rank.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Axis along which a one-axis shuffle enlarges the plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShuffleAxis {
    Rows,
    Cols,
}

fn split_dims(shape: &[usize], op: &'static str) -> Result<(usize, usize, usize, usize)> {
    match *shape {
        [c, h, w] => Ok((1, c, h, w)),
        [n, c, h, w] => Ok((n, c, h, w)),
        _ => Err(Error::invalid(format!("{op} expects C x H x W or N x C x H x W, got {shape:?}"))),
    }
}

fn with_rank<T: Scalar>(like: &[usize], n: usize, h: usize, w: usize, data: Vec<T>) -> Result<Tensor<T>> {
    if like.len() == 3 {
        Tensor::new(&[1, h, w], data)
    } else {
        Tensor::new(&[n, 1, h, w], data)
    }
}

fn check_channels(c: usize, want: usize, op: &'static str) -> Result<()> {
    if c != want {
        return Err(Error::invalid(format!("{op} needs {want} channels, got {c}")));
    }
    Ok(())
}

fn check_scale(r: usize) -> Result<()> {
    if r == 0 {
        return Err(Error::invalid("scale factor must be at least 1"));
    }
    Ok(())
}

/// `out(Y, X) = maps((Y mod r) * r + (X mod r), Y / r, X / r)`.
pub fn pixel_shuffle_2d<T: Scalar>(maps: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    check_scale(r)?;
    let (n, c, h, w) = split_dims(maps.shape(), "pixel_shuffle_2d")?;
    check_channels(c, r * r, "pixel_shuffle_2d")?;
    let (oh, ow) = (h * r, w * r);
    let src = maps.data();
    let mut out = Vec::with_capacity(n * oh * ow);
    for b in 0..n {
        let base = b * c * h * w;
        for y in 0..oh {
            for x in 0..ow {
                let ch = (y % r) * r + x % r;
                out.push(src[base + (ch * h + y / r) * w + x / r]);
            }
        }
    }
    with_rank(maps.shape(), n, oh, ow, out)
}

/// Inverse of [`pixel_shuffle_2d`]: `1 x (h r) x (w r)` planes back to `r^2 x h x w`.
pub fn pixel_unshuffle_2d<T: Scalar>(image: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    check_scale(r)?;
    let (n, c, oh, ow) = split_dims(image.shape(), "pixel_unshuffle_2d")?;
    check_channels(c, 1, "pixel_unshuffle_2d")?;
    if oh % r != 0 || ow % r != 0 {
        return Err(Error::invalid(format!("{oh}x{ow} is not divisible by {r}")));
    }
    let (h, w, cc) = (oh / r, ow / r, r * r);
    let src = image.data();
    let mut out = vec![T::zero(); n * cc * h * w];
    for b in 0..n {
        for y in 0..oh {
            for x in 0..ow {
                let ch = (y % r) * r + x % r;
                out[((b * cc + ch) * h + y / r) * w + x / r] = src[(b * oh + y) * ow + x];
            }
        }
    }
    if image.rank() == 3 {
        Tensor::new(&[cc, h, w], out)
    } else {
        Tensor::new(&[n, cc, h, w], out)
    }
}

/// Rows: `out(Y, x) = maps(Y mod r, Y / r, x)`. Cols: `out(y, X) = maps(X mod r, y, X / r)`.
pub fn pixel_shuffle_1d<T: Scalar>(maps: &Tensor<T>, r: usize, axis: ShuffleAxis) -> Result<Tensor<T>> {
    check_scale(r)?;
    let (n, c, h, w) = split_dims(maps.shape(), "pixel_shuffle_1d")?;
    check_channels(c, r, "pixel_shuffle_1d")?;
    let (oh, ow) = match axis {
        ShuffleAxis::Rows => (h * r, w),
        ShuffleAxis::Cols => (h, w * r),
    };
    let src = maps.data();
    let mut out = Vec::with_capacity(n * oh * ow);
    for b in 0..n {
        let base = b * c * h * w;
        for y in 0..oh {
            for x in 0..ow {
                let idx = match axis {
                    ShuffleAxis::Rows => ((y % r) * h + y / r) * w + x,
                    ShuffleAxis::Cols => ((x % r) * h + y) * w + x / r,
                };
                out.push(src[base + idx]);
            }
        }
    }
    with_rank(maps.shape(), n, oh, ow, out)
}

/// Inverse of [`pixel_shuffle_1d`].
pub fn pixel_unshuffle_1d<T: Scalar>(image: &Tensor<T>, r: usize, axis: ShuffleAxis) -> Result<Tensor<T>> {
    check_scale(r)?;
    let (n, c, oh, ow) = split_dims(image.shape(), "pixel_unshuffle_1d")?;
    check_channels(c, 1, "pixel_unshuffle_1d")?;
    let (h, w) = match axis {
        ShuffleAxis::Rows if oh % r == 0 => (oh / r, ow),
        ShuffleAxis::Cols if ow % r == 0 => (oh, ow / r),
        _ => return Err(Error::invalid(format!("{oh}x{ow} is not divisible by {r} along {axis:?}"))),
    };
    let src = image.data();
    let mut out = vec![T::zero(); n * r * h * w];
    for b in 0..n {
        for y in 0..oh {
            for x in 0..ow {
                let idx = match axis {
                    ShuffleAxis::Rows => ((y % r) * h + y / r) * w + x,
                    ShuffleAxis::Cols => ((x % r) * h + y) * w + x / r,
                };
                out[b * r * h * w + idx] = src[(b * oh + y) * ow + x];
            }
        }
    }
    if image.rank() == 3 {
        Tensor::new(&[r, h, w], out)
    } else {
        Tensor::new(&[n, r, h, w], out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_axis_single_cell() {
        let maps = Tensor::<f64>::new(&[4, 1, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let out = pixel_shuffle_2d(&maps, 2).unwrap();
        assert_eq!(out.shape(), &[1, 2, 2]);
        assert_eq!(out.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn one_axis_single_cell() {
        let maps = Tensor::<f64>::new(&[2, 1, 1], vec![1.0, 2.0]).unwrap();
        let rows = pixel_shuffle_1d(&maps, 2, ShuffleAxis::Rows).unwrap();
        assert_eq!((rows.shape(), rows.data()), (&[1usize, 2, 1][..], &[1.0, 2.0][..]));
        let cols = pixel_shuffle_1d(&maps, 2, ShuffleAxis::Cols).unwrap();
        assert_eq!((cols.shape(), cols.data()), (&[1usize, 1, 2][..], &[1.0, 2.0][..]));
    }

    #[test]
    fn one_axis_shape() {
        let maps = Tensor::<f32>::zeros(&[2, 3, 5]);
        assert_eq!(pixel_shuffle_1d(&maps, 2, ShuffleAxis::Rows).unwrap().shape(), &[1, 6, 5]);
        assert_eq!(pixel_shuffle_1d(&maps, 2, ShuffleAxis::Cols).unwrap().shape(), &[1, 3, 10]);
    }

    #[test]
    fn scale_one_is_identity() {
        let maps = Tensor::<f64>::from_fn(&[2, 1, 3, 4], |i| i as f64);
        assert_eq!(pixel_shuffle_2d(&maps, 1).unwrap(), maps);
        assert_eq!(pixel_shuffle_1d(&maps, 1, ShuffleAxis::Rows).unwrap(), maps);
        assert_eq!(pixel_shuffle_1d(&maps, 1, ShuffleAxis::Cols).unwrap(), maps);
    }

    #[test]
    fn wrong_channel_count_rejected() {
        let maps = Tensor::<f32>::zeros(&[3, 2, 2]);
        assert!(pixel_shuffle_2d(&maps, 2).is_err());
        assert!(pixel_shuffle_1d(&maps, 2, ShuffleAxis::Rows).is_err());
    }
}
