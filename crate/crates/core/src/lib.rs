//! Sparse 3D convolution dataflows and a desk-scale LiDAR segmentation
//! pipeline.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: point clouds, frame conversions, similarity transforms.
//! - [`ingest`]: SemanticKITTI-style scan/label files, label remapping and a
//!   deterministic synthetic scene generator.
//! - [`raster`]: voxelization (cartesian, cylindrical, polar BEV), voxel
//!   feature encoding, range images and devoxelization.
//! - [`sparse`]: sparse tensors, kernel maps and four interchangeable
//!   convolution dataflows, a dense reference, the backward pass and an
//!   autotuner.
//! - [`segmentor`]: a tiny sparse U-Net segmentor with an AdamW training loop.
//! - [`augment`] and [`tta`]: mixing augmentations and test-time augmentation.
//! - [`metrics`]: point-level confusion matrices, mIoU and mAcc.
//! - [`bench`]: the benchmark/train/eval harness behind the `lidarseg` binary.
//!
//! Runnable examples live in `examples/`; `cargo run --example <name>`.

pub mod augment;
pub mod bench;
pub mod error;
pub mod geometry;
pub mod ingest;
pub mod metrics;
pub mod raster;
pub mod segmentor;
pub mod sparse;
pub mod tta;

pub use error::{Error, Result};
pub use geometry::{PointCloud, SimilarityTransform};

/// Class identifier carried by labels.
pub type ClassId = u16;

/// Reserved label for points excluded from training and scoring.
pub const IGNORE: ClassId = ClassId::MAX;
