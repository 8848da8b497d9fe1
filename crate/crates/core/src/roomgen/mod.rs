//! Anchor room generation and conditional uniform wall augmentation.

pub mod anchor;
pub mod augment;
pub mod dataset;

pub use anchor::{generate_anchor, SizeRange};
pub use augment::{augment, translate_wall, AugmentationRecord};
pub use dataset::{
    build_dataset, generate_rooms, manifest_for, mix_seed, Dataset, DatasetParams, GeneratedRoom,
    Manifest, ManifestEntry, Split,
};
