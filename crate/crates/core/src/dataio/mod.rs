//! Datasets: image-folder loading, synthetic domain pairs, and batching.

mod batch;
mod dataset;
mod folder;
mod image;
mod synthetic;

pub use batch::{epoch_batches, iterate_batches, BatchStream};
pub use dataset::{Dataset, Sample, SampleId};
pub use folder::{export_image_folder, load_image_folder, save_png};
pub use image::Image;
pub(crate) use image::clamp01;
pub use synthetic::{
    apply_shift, make_synthetic_domain_pair, make_synthetic_domain_pair_sized, render_source, shift_dataset,
    ShiftKind, ShiftSpec, DEFAULT_IMAGE_SIZE, SHAPE_NAMES,
};
