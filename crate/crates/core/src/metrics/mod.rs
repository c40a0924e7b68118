//! Interpolation baselines and image quality metrics.

mod evaluate;
mod ifc;
mod quality;
mod resize;

pub use evaluate::{
    evaluate, summary_table, Cnn, EvalMode, EvalOptions, Identity, Interpolation, MetricReport, MetricRow,
    Reconstructor, DEGRADATION,
};
pub use ifc::{ifc, IFC_LEVELS, IFC_MIN_EXTENT};
pub use quality::{mse, psnr, ssim, ssim_with_range, SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW};
pub use resize::{resize, resize_to, resize_volume, ResizeMethod};
