//! SemanticKITTI binary formats.
//!
//! Scans are packed little-endian `f32` quadruples `(x, y, z, intensity)`.
//! Labels are little-endian `u32` words: semantic class in the low 16 bits,
//! instance id in the high 16 bits.

use std::fs;
use std::path::{Path, PathBuf};

use crate::geometry::PointCloud;
use crate::{Error, Result};

pub fn read_scan(bytes: &[u8]) -> Result<PointCloud> {
    if !bytes.len().is_multiple_of(16) {
        return Err(Error::MalformedScan { len: bytes.len() });
    }
    let n = bytes.len() / 16;
    let mut positions = Vec::with_capacity(n);
    let mut intensity = Vec::with_capacity(n);
    for rec in bytes.chunks_exact(16) {
        let f = |i: usize| f32::from_le_bytes(rec[i * 4..i * 4 + 4].try_into().unwrap());
        let vals = [f(0), f(1), f(2), f(3)];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value in scan record {}",
                positions.len()
            )));
        }
        positions.push([vals[0] as f64, vals[1] as f64, vals[2] as f64]);
        intensity.push(vals[3] as f64);
    }
    PointCloud::new(positions, intensity, None)
}

/// Inverse of [`read_scan`]; values are rounded to `f32`.
pub fn write_scan(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * 16);
    for (p, i) in cloud.positions().iter().zip(cloud.intensity()) {
        for v in [p[0], p[1], p[2], *i] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn read_labels(bytes: &[u8]) -> Result<(Vec<u16>, Vec<u16>)> {
    if !bytes.len().is_multiple_of(4) {
        return Err(Error::MalformedLabels { len: bytes.len() });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|w| {
            let word = u32::from_le_bytes(w.try_into().unwrap());
            ((word & 0xFFFF) as u16, (word >> 16) as u16)
        })
        .unzip())
}

pub fn write_labels(semantic: &[u16], instance: &[u16]) -> Result<Vec<u8>> {
    if semantic.len() != instance.len() {
        return Err(Error::InvalidInput(format!(
            "{} semantic vs {} instance labels",
            semantic.len(),
            instance.len()
        )));
    }
    Ok(semantic
        .iter()
        .zip(instance)
        .flat_map(|(&s, &i)| ((i as u32) << 16 | s as u32).to_le_bytes())
        .collect())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_scan_file(path: impl AsRef<Path>) -> Result<PointCloud> {
    read_scan(&read_file(path.as_ref())?)
}

pub fn read_labels_file(path: impl AsRef<Path>) -> Result<(Vec<u16>, Vec<u16>)> {
    read_labels(&read_file(path.as_ref())?)
}

pub fn write_scan_file(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_scan(cloud)).map_err(|e| Error::io(path, e))
}

pub fn write_labels_file(path: impl AsRef<Path>, semantic: &[u16], instance: &[u16]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_labels(semantic, instance)?).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanPaths {
    pub scan: PathBuf,
    pub labels: Option<PathBuf>,
}

/// Lists `<root>/sequences/<seq>/velodyne/*.bin` in name order, pairing each
/// scan with `labels/<stem>.label` when that file exists.
pub fn list_sequence(root: impl AsRef<Path>, sequence: &str) -> Result<Vec<ScanPaths>> {
    let seq_dir = root.as_ref().join("sequences").join(sequence);
    let velodyne = seq_dir.join("velodyne");
    let entries = fs::read_dir(&velodyne).map_err(|e| Error::io(&velodyne, e))?;
    let mut scans: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "bin"))
        .collect();
    scans.sort();
    Ok(scans
        .into_iter()
        .map(|scan| {
            let stem = scan.file_stem().unwrap_or_default().to_owned();
            let label = seq_dir.join("labels").join(stem).with_extension("label");
            ScanPaths {
                labels: label.exists().then_some(label),
                scan,
            }
        })
        .collect())
}
