use super::Tensor;
use crate::error::Result;
use crate::scalar::Scalar;

pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| v.max(T::zero()))
}

/// Passes `upstream` where the forward input was strictly positive.
pub fn relu_backward<T: Scalar>(input: &Tensor<T>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    input.ensure_same_shape(upstream, "relu backward")?;
    let data = input
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(input.shape(), data)
}

pub fn add<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    a.ensure_same_shape(b, "add")?;
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x + y).collect();
    Tensor::new(a.shape(), data)
}

/// Gradient of `a + b` for both operands: the upstream gradient, unchanged.
pub fn add_backward<T: Scalar>(upstream: &Tensor<T>) -> (Tensor<T>, Tensor<T>) {
    (upstream.clone(), upstream.clone())
}

pub(crate) fn add_assign<T: Scalar>(acc: &mut Tensor<T>, other: &Tensor<T>) -> Result<()> {
    acc.ensure_same_shape(other, "add")?;
    acc.data_mut()
        .iter_mut()
        .zip(other.data())
        .for_each(|(a, &b)| *a += b);
    Ok(())
}

/// Mean absolute error and its subgradient `sign(pred - target) / len`, with `sign(0) = 0`.
pub fn l1_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    pred.ensure_same_shape(target, "l1 loss")?;
    let n = T::from_usize(pred.len()).unwrap();
    let mut total = T::zero();
    let grad = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p - t;
            total += d.abs();
            if d > T::zero() {
                T::one() / n
            } else if d < T::zero() {
                -T::one() / n
            } else {
                T::zero()
            }
        })
        .collect();
    Ok((total / n, Tensor::new(pred.shape(), grad)?))
}
