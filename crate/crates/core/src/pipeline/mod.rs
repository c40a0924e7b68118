//! Volumes, degradation, patch datasets, training and inference.

mod config;
mod degrade;
mod ensemble;
mod infer;
mod patches;
mod train;
mod volume;

pub use config::TrainConfig;
pub use degrade::degrade_volume;
pub use ensemble::{dihedral, dihedral_inverse, pixelwise_median, self_ensemble, ENSEMBLE_SIZE};
pub use infer::{
    receptive_margin_hr, super_resolve_2d, super_resolve_3d, super_resolve_depth, super_resolve_slices,
    super_resolve_tiled, InferenceOptions, Upscaler,
};
pub use patches::{augment, extract_patches, PatchPair, PatchSource, PlaneKind};
pub use train::{history_csv, train_stage, EpochStats, NetOptimizer, TrainOutcome};
pub use volume::{Axes, IntensityMapping, Volume};
