//! Dense tensors and the handful of differentiable ops the network needs.

mod adam;
mod blur;
mod conv;
mod dense;
mod ops;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use blur::{gaussian_blur_3x3, gaussian_kernel_3x3};
pub use conv::{
    conv2d_backward, conv2d_backward_params, conv2d_forward, count_parameters, ConvGrads, ConvLayer, KERNEL,
};
pub use dense::Tensor;
pub use ops::{add, add_backward, l1_loss, relu, relu_backward};
pub(crate) use ops::add_assign;
