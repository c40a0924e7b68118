pub mod error;
pub mod io;
pub mod metrics;
pub mod net;
pub mod scalar;
pub mod pipeline;
pub mod tensor;

pub use error::{Error, Result};
pub use net::{build_network, AxisMode, ShuffleAxis, SrNet, SrNetConfig};
pub use pipeline::{Axes, TrainConfig, Volume};
pub use scalar::Scalar;
pub use tensor::{ConvLayer, Tensor};

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type SrNet32 = SrNet<f32>;
pub type SrNet64 = SrNet<f64>;
