use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Moment estimates for one parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub first_moment: Tensor<T>,
    pub second_moment: Tensor<T>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(shape: &[usize], learning_rate: f64) -> Self {
        Self {
            first_moment: Tensor::zeros(shape),
            second_moment: Tensor::zeros(shape),
            step_count: 0,
            beta1: BETA1,
            beta2: BETA2,
            epsilon: EPSILON,
            learning_rate,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step<T: Scalar>(params: &mut Tensor<T>, grads: &Tensor<T>, state: &mut AdamState<T>) -> Result<()> {
    params.ensure_same_shape(grads, "adam step")?;
    params.ensure_same_shape(&state.first_moment, "adam state")?;
    if !grads.is_finite() {
        return Err(Error::NonFinite("adam gradient".into()));
    }
    if !(state.learning_rate > 0.0) {
        return Err(Error::invalid(format!("learning rate {} must be positive", state.learning_rate)));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let b1 = T::from_f64_lossy(state.beta1);
    let b2 = T::from_f64_lossy(state.beta2);
    let c1 = T::from_f64_lossy(1.0 / (1.0 - state.beta1.powi(t)));
    let c2 = T::from_f64_lossy(1.0 / (1.0 - state.beta2.powi(t)));
    let lr = T::from_f64_lossy(state.learning_rate);
    let eps = T::from_f64_lossy(state.epsilon);
    let one = T::one();

    let m = state.first_moment.data_mut();
    let v = state.second_moment.data_mut();
    for (((p, &g), m), v) in params.data_mut().iter_mut().zip(grads.data()).zip(m).zip(v) {
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        let m_hat = *m * c1;
        let v_hat = *v * c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = Tensor::<f64>::from_fn(&[4], |i| i as f64);
        let before = p.clone();
        let mut st = AdamState::new(&[4], 1e-3);
        adam_step(&mut p, &Tensor::zeros(&[4]), &mut st).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.first_moment.max_abs(), 0.0);
        assert_eq!(st.second_moment.max_abs(), 0.0);
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = g and v_hat = g^2, so the step is lr * g / (|g| + eps).
        for g in [1e-3, 0.5, 40.0] {
            let mut p = Tensor::<f64>::zeros(&[3]);
            let mut st = AdamState::new(&[3], 0.01);
            adam_step(&mut p, &Tensor::full(&[3], g), &mut st).unwrap();
            let expect = 0.01 * g / (g + EPSILON);
            for &v in p.data() {
                assert!((v + expect).abs() < 1e-15);
                assert!((v.abs() - 0.01).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn rejects_non_finite_gradient() {
        let mut p = Tensor::<f32>::zeros(&[2]);
        let mut st = AdamState::new(&[2], 0.1);
        let g = Tensor::new(&[2], vec![1.0, f32::NAN]).unwrap();
        assert!(matches!(adam_step(&mut p, &g, &mut st), Err(Error::NonFinite(_))));
        assert_eq!(st.step_count, 0);
    }

    fn run_abs(steps: usize, lr_at: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut x = Tensor::<f64>::zeros(&[1]);
        let mut st = AdamState::new(&[1], 0.1);
        let mut path = Vec::with_capacity(steps);
        for step in 0..steps {
            st.learning_rate = lr_at(step);
            let d = x.data()[0] - 3.0;
            let g = if d > 0.0 { 1.0 } else if d < 0.0 { -1.0 } else { 0.0 };
            adam_step(&mut x, &Tensor::full(&[1], g), &mut st).unwrap();
            path.push(x.data()[0]);
        }
        path
    }

    #[test]
    fn minimizes_absolute_distance() {
        // At a fixed lr of 0.1 the sign gradient of |x - 3| never shrinks, so
        // Adam settles into a limit cycle around 3 (amplitude ~0.041 from a
        // reference simulation). Dropping lr tenfold halfway, as the trainer
        // does, tightens it below 1e-2.
        let fixed = run_abs(500, |_| 0.1);
        assert!(fixed[400..].iter().all(|x| (x - 3.0).abs() < 0.05));
        let stepped = run_abs(500, |s| if s < 250 { 0.1 } else { 0.01 });
        assert!((stepped[499] - 3.0).abs() < 1e-2, "{}", stepped[499]);
        assert!(stepped[400..].iter().all(|x| (x - 3.0).abs() < 1e-2));
    }
}
