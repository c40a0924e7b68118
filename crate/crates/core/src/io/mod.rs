//! Volume files, dataset manifests, phantoms and comparison figures.

mod compare;
mod manifest;
mod phantom;
mod volume_file;

pub use compare::{compose_comparison, export_comparison};
pub use manifest::{DatasetManifest, ManifestEntry, Split};
pub use phantom::{generate_phantom, PhantomKind, PHANTOM_MIN_EXTENT};
pub use volume_file::{
    load_png_stack, load_raw, load_volume, save_png_stack, save_raw, save_slice_png, save_volume, RawSidecar, StackSidecar,
    VolumeFormat, FORMAT_VERSION, STACK_SIDECAR,
};
