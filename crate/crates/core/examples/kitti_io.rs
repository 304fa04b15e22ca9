//! Writes a synthetic scan in the SemanticKITTI layout, reads it back, and
//! remaps raw label ids to evaluation classes.
//!
//!     cargo run --example kitti_io

use lidarseg::ingest::{
    list_sequence, read_labels_file, read_scan_file, synth_scene, write_labels_file, write_scan_file, LabelRemap,
    SynthSceneConfig,
};

fn main() -> lidarseg::Result<()> {
    let root = std::env::temp_dir().join("lidarseg-kitti-example");
    let seq = root.join("sequences/00");
    for sub in ["velodyne", "labels"] {
        std::fs::create_dir_all(seq.join(sub)).map_err(|e| lidarseg::Error::InvalidInput(e.to_string()))?;
    }

    // Synthetic classes 0/1/2 stored as raw ids 40 (road), 50 (building)
    // and 80 (pole); every tenth point gets the unlabeled id 0.
    let scene = synth_scene(&SynthSceneConfig::default())?;
    let raw_ids = [40u16, 50, 80];
    let semantic: Vec<u16> = scene
        .labels()
        .unwrap()
        .iter()
        .enumerate()
        .map(|(i, &l)| if i % 10 == 0 { 0 } else { raw_ids[l as usize] })
        .collect();
    let instance: Vec<u16> = (0..scene.len()).map(|i| (i / 100) as u16).collect();
    write_scan_file(seq.join("velodyne/000000.bin"), &scene)?;
    write_labels_file(seq.join("labels/000000.label"), &semantic, &instance)?;

    for entry in list_sequence(&root, "00")? {
        let cloud = read_scan_file(&entry.scan)?;
        let (sem, inst) = read_labels_file(entry.labels.as_ref().unwrap())?;
        println!(
            "{}: {} points, {} label words",
            entry.scan.display(),
            cloud.len(),
            sem.len()
        );
        assert_eq!(inst, instance);

        let remap = LabelRemap::load(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/configs/semantic-kitti-remap.toml"
        ))?;
        let classes = remap.remap(&sem)?;
        let mut counts = vec![0usize; remap.num_classes()];
        let mut ignored = 0;
        for c in classes {
            match counts.get_mut(c as usize) {
                Some(n) => *n += 1,
                None => ignored += 1,
            }
        }
        for (name, n) in remap.class_names().iter().zip(&counts).filter(|(_, n)| **n > 0) {
            println!("  {name:<12} {n}");
        }
        println!("  ignored      {ignored}");
    }
    Ok(())
}
