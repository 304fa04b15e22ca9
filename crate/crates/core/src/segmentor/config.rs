use serde::{Deserialize, Serialize};

use crate::raster::VoxelizationConfig;
use crate::sparse::{Dataflow, ExecMode};
use crate::{Error, Result};

/// Per-voxel network input: offset of the mean point from the cell centre
/// in cell units, and mean intensity.
pub const VOXEL_INPUT_FEATURES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentorConfig {
    pub voxel: VoxelizationConfig,
    /// Channel width per level; the length is the number of levels.
    pub widths: Vec<usize>,
    /// Residual blocks per level.
    pub depths: Vec<usize>,
    pub num_classes: usize,
    pub optimizer: AdamWConfig,
    pub seed: u64,
    pub dataflow: Dataflow,
    pub exec: ExecMode,
}

impl Default for SegmentorConfig {
    fn default() -> Self {
        Self {
            voxel: VoxelizationConfig::cartesian([-16.0, -16.0, -4.0], [16.0, 16.0, 8.0], 0.4),
            widths: vec![8, 16],
            depths: vec![1, 1],
            num_classes: 3,
            optimizer: AdamWConfig::default(),
            seed: 0,
            dataflow: Dataflow::GatherScatter,
            exec: ExecMode::Serial,
        }
    }
}

impl SegmentorConfig {
    pub fn levels(&self) -> usize {
        self.widths.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.voxel.validate()?;
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::Config(
                "widths must be a non-empty list of positive values".into(),
            ));
        }
        if self.depths.len() != self.widths.len() || self.depths.contains(&0) {
            return Err(Error::Config(
                "depths must give a positive block count per level".into(),
            ));
        }
        if self.num_classes < 2 {
            return Err(Error::Config("at least two classes are required".into()));
        }
        let o = &self.optimizer;
        let ok = o.lr >= 0.0
            && (0.0..1.0).contains(&o.beta1)
            && (0.0..1.0).contains(&o.beta2)
            && o.eps > 0.0
            && o.weight_decay >= 0.0;
        if !ok {
            return Err(Error::Config(format!("invalid optimizer settings {o:?}")));
        }
        Ok(())
    }

    /// True when two configs describe the same parameter layout.
    pub fn same_architecture(&self, other: &SegmentorConfig) -> bool {
        self.voxel == other.voxel
            && self.widths == other.widths
            && self.depths == other.depths
            && self.num_classes == other.num_classes
    }
}
