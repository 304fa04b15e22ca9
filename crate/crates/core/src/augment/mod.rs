//! Seeded training-time augmentation: global similarity transforms and
//! scan mixing along azimuth and inclination.

mod global;
mod mix;
mod policy;

pub use global::{random_global_aug, sample_transform, GlobalAugConfig};
pub use mix::{frustummix, lasermix, polarmix_scene, BandCount, MixAxis, MixPartition, MixResult, PointSource};
pub use policy::{apply_policy, AugmentPolicy, MixOperator};
