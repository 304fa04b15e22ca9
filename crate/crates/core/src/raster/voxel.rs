//! Voxelization with half-open cells `[lower + k * size, lower + (k + 1) * size)`.
//!
//! | mode          | binned axes          |
//! |---------------|----------------------|
//! | `cartesian`   | x, y, z              |
//! | `cylindrical` | rho, azimuth, z      |
//! | `polar-bev`   | rho, azimuth         |

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::{azimuth, Point3, PointCloud};
use crate::sparse::tensor::CoordKey;
use crate::sparse::{Coords, Element};
use crate::{ClassId, Error, Result, IGNORE};

/// Width of the default voxel feature: mean `(x, y, z, intensity)`.
pub const VOXEL_FEATURES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VoxelMode {
    Cartesian,
    Cylindrical,
    PolarBev,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutOfBounds {
    #[default]
    Drop,
    Clamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoxelizationConfig {
    pub mode: VoxelMode,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub cell_size: Vec<f64>,
    #[serde(default)]
    pub out_of_bounds: OutOfBounds,
}

impl VoxelizationConfig {
    /// Axis-aligned cube of cells around the sensor.
    pub fn cartesian(lower: [f64; 3], upper: [f64; 3], cell: f64) -> Self {
        Self {
            mode: VoxelMode::Cartesian,
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            cell_size: vec![cell; 3],
            out_of_bounds: OutOfBounds::Drop,
        }
    }

    pub fn cylindrical(max_rho: f64, z: (f64, f64), cells: [f64; 3]) -> Self {
        Self {
            mode: VoxelMode::Cylindrical,
            lower: vec![0.0, -PI, z.0],
            upper: vec![max_rho, PI, z.1],
            cell_size: cells.to_vec(),
            out_of_bounds: OutOfBounds::Drop,
        }
    }

    pub fn polar_bev(max_rho: f64, cells: [f64; 2]) -> Self {
        Self {
            mode: VoxelMode::PolarBev,
            lower: vec![0.0, -PI],
            upper: vec![max_rho, PI],
            cell_size: cells.to_vec(),
            out_of_bounds: OutOfBounds::Drop,
        }
    }

    pub fn axes(&self) -> usize {
        match self.mode {
            VoxelMode::Cartesian | VoxelMode::Cylindrical => 3,
            VoxelMode::PolarBev => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.axes();
        if self.lower.len() != n || self.upper.len() != n || self.cell_size.len() != n {
            return Err(Error::Config(format!(
                "{:?} voxelization needs {n} bounds and cell sizes",
                self.mode
            )));
        }
        for a in 0..n {
            let (lo, hi, size) = (self.lower[a], self.upper[a], self.cell_size[a]);
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::Config(format!("axis {a}: upper must exceed lower")));
            }
            if !(size > 0.0 && size.is_finite()) {
                return Err(Error::Config(format!("axis {a}: cell size must be positive")));
            }
            if ((hi - lo) / size).ceil() > i32::MAX as f64 {
                return Err(Error::Config(format!("axis {a}: grid does not fit in i32")));
            }
        }
        Ok(())
    }

    /// Cell count per axis.
    pub fn grid_shape(&self) -> Vec<usize> {
        (0..self.axes())
            .map(|a| ((self.upper[a] - self.lower[a]) / self.cell_size[a]).ceil() as usize)
            .collect()
    }

    pub fn total_cells(&self) -> f64 {
        self.grid_shape().iter().map(|&n| n as f64).product()
    }

    fn axis_values(&self, p: &Point3) -> [f64; 3] {
        match self.mode {
            VoxelMode::Cartesian => *p,
            VoxelMode::Cylindrical => [p[0].hypot(p[1]), azimuth(p[0], p[1]), p[2]],
            VoxelMode::PolarBev => [p[0].hypot(p[1]), azimuth(p[0], p[1]), 0.0],
        }
    }

    /// Cell index of a point, or `None` when dropped.
    pub fn cell_of(&self, p: &Point3) -> Option<[i32; 3]> {
        let values = self.axis_values(p);
        let shape = self.grid_shape();
        let mut cell = [0i32; 3];
        for a in 0..self.axes() {
            let idx = ((values[a] - self.lower[a]) / self.cell_size[a]).floor();
            let inside = values[a] >= self.lower[a] && values[a] < self.upper[a];
            cell[a] = match self.out_of_bounds {
                OutOfBounds::Drop if !inside => return None,
                // Rounding can push a value just below `upper` into index n.
                _ => idx.clamp(0.0, shape[a] as f64 - 1.0) as i32,
            };
        }
        Some(cell)
    }

    /// Cartesian position of a cell centre (z = 0 for polar BEV).
    pub fn cell_center(&self, cell: &[i32]) -> Point3 {
        let c = |a: usize| self.lower[a] + (cell[a] as f64 + 0.5) * self.cell_size[a];
        match self.mode {
            VoxelMode::Cartesian => [c(0), c(1), c(2)],
            VoxelMode::Cylindrical => {
                let (rho, phi) = (c(0), c(1));
                [rho * phi.cos(), rho * phi.sin(), c(2)]
            }
            VoxelMode::PolarBev => {
                let (rho, phi) = (c(0), c(1));
                [rho * phi.cos(), rho * phi.sin(), 0.0]
            }
        }
    }
}

/// Point-to-voxel assignment in both directions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointToCellMap {
    point_voxel: Vec<Option<u32>>,
    members: Vec<Vec<u32>>,
}

impl PointToCellMap {
    pub fn new(point_voxel: Vec<Option<u32>>, members: Vec<Vec<u32>>) -> Result<Self> {
        let map = Self { point_voxel, members };
        map.check()?;
        Ok(map)
    }

    fn check(&self) -> Result<()> {
        let mut seen = 0usize;
        for (v, list) in self.members.iter().enumerate() {
            for &p in list {
                if self.point_voxel.get(p as usize) != Some(&Some(v as u32)) {
                    return Err(Error::InconsistentMap(format!(
                        "point {p} listed in voxel {v} but assigned elsewhere"
                    )));
                }
                seen += 1;
            }
        }
        let assigned = self.point_voxel.iter().filter(|v| v.is_some()).count();
        if seen != assigned {
            return Err(Error::InconsistentMap(format!(
                "{assigned} assigned points but {seen} member entries"
            )));
        }
        Ok(())
    }

    pub fn point_count(&self) -> usize {
        self.point_voxel.len()
    }

    pub fn voxel_count(&self) -> usize {
        self.members.len()
    }

    pub fn voxel_of(&self, point: usize) -> Option<usize> {
        self.point_voxel[point].map(|v| v as usize)
    }

    pub fn members(&self, voxel: usize) -> &[u32] {
        &self.members[voxel]
    }

    pub fn dropped(&self) -> usize {
        self.point_voxel.iter().filter(|v| v.is_none()).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Voxelization {
    pub coords: Coords,
    pub map: PointToCellMap,
}

pub fn voxelize(cloud: &PointCloud, cfg: &VoxelizationConfig) -> Result<Voxelization> {
    cfg.validate()?;
    let axes = cfg.axes();
    let cells: Vec<Option<CoordKey>> = cloud
        .positions()
        .iter()
        .map(|p| cfg.cell_of(p).map(|c| CoordKey::from_slice(&c[..axes])))
        .collect();
    let mut keys: Vec<CoordKey> = cells.iter().flatten().copied().collect();
    keys.sort_unstable();
    keys.dedup();
    let index: HashMap<CoordKey, u32> = keys.iter().enumerate().map(|(i, k)| (*k, i as u32)).collect();
    let mut members = vec![Vec::new(); keys.len()];
    let point_voxel: Vec<Option<u32>> = cells
        .iter()
        .enumerate()
        .map(|(p, cell)| {
            cell.map(|k| {
                let v = index[&k];
                members[v as usize].push(p as u32);
                v
            })
        })
        .collect();
    Ok(Voxelization {
        coords: Coords::from_keys(axes, &keys),
        map: PointToCellMap { point_voxel, members },
    })
}

/// Occupied voxels divided by the number of grid cells.
pub fn occupancy(vox: &Voxelization, cfg: &VoxelizationConfig) -> f64 {
    vox.coords.len() as f64 / cfg.total_cells()
}

/// Mean `(x, y, z, intensity)` of each voxel's member points.
pub fn encode_voxel_features(cloud: &PointCloud, map: &PointToCellMap) -> Result<Vec<f64>> {
    if map.point_count() != cloud.len() {
        return Err(Error::InconsistentMap(format!(
            "map covers {} points, cloud has {}",
            map.point_count(),
            cloud.len()
        )));
    }
    let mut out = Vec::with_capacity(map.voxel_count() * VOXEL_FEATURES);
    for list in &map.members {
        let mut acc = [0.0f64; VOXEL_FEATURES];
        for &p in list {
            let pos = cloud.positions()[p as usize];
            acc[0] += pos[0];
            acc[1] += pos[1];
            acc[2] += pos[2];
            acc[3] += cloud.intensity()[p as usize];
        }
        let n = list.len().max(1) as f64;
        out.extend(acc.iter().map(|v| v / n));
    }
    Ok(out)
}

pub fn devoxelize_labels(values: &[ClassId], map: &PointToCellMap) -> Result<Vec<ClassId>> {
    if values.len() != map.voxel_count() {
        return Err(Error::InconsistentMap(format!(
            "{} voxel values for {} voxels",
            values.len(),
            map.voxel_count()
        )));
    }
    Ok(map
        .point_voxel
        .iter()
        .map(|v| v.map_or(IGNORE, |v| values[v as usize]))
        .collect())
}

/// Copies each voxel's row of `width` values to its member points; dropped
/// points get zeros.
pub fn devoxelize_rows<T: Element>(values: &[T], width: usize, map: &PointToCellMap) -> Result<Vec<T>> {
    if values.len() != map.voxel_count() * width {
        return Err(Error::InconsistentMap(format!(
            "{} values for {} voxels of width {width}",
            values.len(),
            map.voxel_count()
        )));
    }
    let mut out = vec![T::default(); map.point_count() * width];
    for (p, v) in map.point_voxel.iter().enumerate() {
        if let Some(v) = v {
            let v = *v as usize;
            out[p * width..(p + 1) * width].copy_from_slice(&values[v * width..(v + 1) * width]);
        }
    }
    Ok(out)
}
