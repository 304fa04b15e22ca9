use crate::geometry::PointCloud;
use crate::ingest::{list_sequence, read_labels_file, read_scan_file, synth_scene, LabelRemap, SYNTH_CLASS_NAMES};
use crate::{Error, Result};

use super::config::{DatasetConfig, RunConfig};

#[derive(Debug, Clone)]
pub struct Scenes {
    pub train: Vec<PointCloud>,
    pub eval: Vec<PointCloud>,
    pub class_names: Vec<String>,
}

fn kitti_split(
    root: &std::path::Path,
    sequences: &[String],
    remap: &LabelRemap,
    cap: Option<usize>,
) -> Result<Vec<PointCloud>> {
    let mut out = Vec::new();
    for seq in sequences {
        let mut paths = list_sequence(root, seq)?;
        if let Some(cap) = cap {
            paths.truncate(cap);
        }
        for p in paths {
            let cloud = read_scan_file(&p.scan)?;
            let cloud = match &p.labels {
                Some(l) => {
                    let (semantic, _) = read_labels_file(l)?;
                    cloud.with_labels(remap.remap(&semantic)?)?
                }
                None => cloud,
            };
            out.push(cloud);
        }
    }
    Ok(out)
}

pub fn load_scenes(cfg: &RunConfig) -> Result<Scenes> {
    match &cfg.dataset {
        DatasetConfig::Synthetic {
            scene,
            train_scenes,
            eval_scenes,
        } => {
            let make = |i: usize| synth_scene(&scene.with_seed(scene.seed + i as u64));
            Ok(Scenes {
                train: (0..*train_scenes).map(make).collect::<Result<_>>()?,
                eval: (*train_scenes..train_scenes + eval_scenes)
                    .map(make)
                    .collect::<Result<_>>()?,
                class_names: SYNTH_CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
            })
        }
        DatasetConfig::Kitti {
            root,
            remap,
            train_sequences,
            eval_sequences,
            max_scans,
        } => {
            let remap = LabelRemap::load(remap)?;
            if remap.num_classes() != cfg.segmentor.num_classes {
                return Err(Error::Config(format!(
                    "remap defines {} classes, segmentor expects {}",
                    remap.num_classes(),
                    cfg.segmentor.num_classes
                )));
            }
            Ok(Scenes {
                train: kitti_split(root, train_sequences, &remap, *max_scans)?,
                eval: kitti_split(root, eval_sequences, &remap, *max_scans)?,
                class_names: remap.class_names().to_vec(),
            })
        }
    }
}
