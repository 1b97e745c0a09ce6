//! Sticker synthesis, the masked-mixup intervention, and sticker-task labels.

mod glyphs;
mod intervention;
mod render;
mod task;

pub use glyphs::{Bitmap, GlyphSet, ALPHABET_SIZE};
pub use intervention::{apply_intervention, compute_mask, Mask};
pub use render::{
    render_bitmap, render_sticker, sticker_side, Placement, SpecSampler, StickerImage, StickerSpec, TEXTURE_COUNT,
};
pub use task::{
    assign_class_label, assign_location_label, assign_rotation_label, build_sticker_dataset, sticker_one,
    StickerConfig, StickerRecord, StickerTask,
};
