//! Scan/label file formats, label remapping and synthetic scenes.

mod kitti;
mod remap;
mod synth;

pub use kitti::{
    list_sequence, read_labels, read_labels_file, read_scan, read_scan_file, write_labels, write_labels_file,
    write_scan, write_scan_file, ScanPaths,
};
pub use remap::LabelRemap;
pub use synth::{synth_scene, SynthSceneConfig, BOX, GROUND, POLE, SYNTH_CLASS_NAMES};
