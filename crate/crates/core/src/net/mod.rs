//! The super-resolution network and its checkpoint format.

pub mod checkpoint;
mod model;
mod shuffle;

pub use model::{
    build_network, loss_full, loss_standard, AxisMode, ForwardTrace, Gradients, SrNet, SrNetConfig, SUPPORTED_SCALES,
};
pub use shuffle::{pixel_shuffle_1d, pixel_shuffle_2d, pixel_unshuffle_1d, pixel_unshuffle_2d, ShuffleAxis};
