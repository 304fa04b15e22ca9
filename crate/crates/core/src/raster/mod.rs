//! Point clouds to voxels and range images, and voxel values back to points.

mod range;
mod voxel;

pub use range::{project_range, RangeImage, RANGE_CHANNELS};
pub use voxel::{
    devoxelize_labels, devoxelize_rows, encode_voxel_features, occupancy, voxelize, OutOfBounds, PointToCellMap,
    VoxelMode, Voxelization, VoxelizationConfig, VOXEL_FEATURES,
};
