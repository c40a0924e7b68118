use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sampled 2D Gaussian on the `{-1, 0, 1}^2` grid, normalized to sum 1.
/// Row-major over `(dy, dx)`.
pub fn gaussian_kernel_3x3(sigma: f64) -> Result<[f64; 9]> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("blur sigma must be positive, got {sigma}")));
    }
    let mut k = [0.0; 9];
    for dy in -1i32..=1 {
        for dx in -1i32..=1 {
            k[((dy + 1) * 3 + dx + 1) as usize] =
                (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
        }
    }
    let z: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= z);
    Ok(k)
}

/// 3x3 Gaussian blur of an `H x W` image with replicated borders.
pub fn gaussian_blur_3x3<T: Scalar>(image: &Tensor<T>, sigma: f64) -> Result<Tensor<T>> {
    if image.rank() != 2 {
        return Err(Error::invalid(format!("blur expects H x W, got {:?}", image.shape())));
    }
    let kernel = gaussian_kernel_3x3(sigma)?.map(T::from_f64_lossy);
    let (h, w) = image.plane_dims();
    let src = image.data();
    let clampi = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let out = Tensor::from_fn(&[h, w], |i| {
        let (y, x) = ((i / w) as isize, (i % w) as isize);
        let mut acc = T::zero();
        for dy in -1..=1 {
            let row = clampi(y + dy, h) * w;
            for dx in -1..=1 {
                acc += kernel[((dy + 1) * 3 + dx + 1) as usize] * src[row + clampi(x + dx, w)];
            }
        }
        acc
    });
    Ok(out)
}
