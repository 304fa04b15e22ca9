//! A tiny sparse U-Net segmentor.
//!
//! ```text
//! voxelize -> voxel-local features -> linear stem -> residual blocks
//!   -> [stride-2 down -> residual blocks] x (levels - 1)
//!   -> [transposed up -> concat skip -> linear fuse] x (levels - 1)
//!   -> linear head -> devoxelize
//! ```
//!
//! Residual blocks are `relu(x + conv(relu(conv(x) + b1)) + b2)` with
//! 3x3x3 submanifold convolutions. Downsampling is a 2x2x2 stride-2
//! convolution; upsampling runs the same kernel map transposed so every
//! decoder level lands exactly on its encoder's cached coordinates.

mod checkpoint;
mod config;
mod loss;
mod network;
mod train;

pub use checkpoint::{CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{AdamWConfig, SegmentorConfig, VOXEL_INPUT_FEATURES};
pub use loss::{argmax_labels, cross_entropy, softmax_rows, LossValue};
pub use network::{ParamEntry, Plan, Segmentor};
pub use train::{TrainReport, TrainState};
