//! Voxelizes a synthetic scan in cartesian, cylindrical and polar BEV
//! grids, reports occupancy, and projects it to a range image.
//!
//!     cargo run --release --example voxelize_and_project

use lidarseg::ingest::{synth_scene, SynthSceneConfig};
use lidarseg::raster::{devoxelize_labels, occupancy, project_range, voxelize, VoxelizationConfig};
use lidarseg::IGNORE;

fn main() -> lidarseg::Result<()> {
    let scene = synth_scene(&SynthSceneConfig::default())?;
    let grids = [
        (
            "cartesian 0.2 m",
            VoxelizationConfig::cartesian([-16.0, -16.0, -4.0], [16.0, 16.0, 8.0], 0.2),
        ),
        (
            "cylindrical",
            VoxelizationConfig::cylindrical(24.0, (-4.0, 8.0), [0.25, 0.02, 0.2]),
        ),
        ("polar BEV", VoxelizationConfig::polar_bev(24.0, [0.25, 0.02])),
    ];
    for (name, cfg) in &grids {
        let vox = voxelize(&scene, cfg)?;
        println!(
            "{name:<16} grid {:?}: {} voxels, occupancy {:.3}%, {} points dropped",
            cfg.grid_shape(),
            vox.coords.len(),
            100.0 * occupancy(&vox, cfg),
            vox.map.dropped()
        );
    }

    // Majority label per voxel, scattered back to points.
    let (_, cfg) = &grids[0];
    let vox = voxelize(&scene, cfg)?;
    let labels = scene.labels().unwrap();
    let voxel_labels: Vec<u16> = (0..vox.map.voxel_count())
        .map(|v| {
            let mut counts = [0usize; 3];
            for &p in vox.map.members(v) {
                counts[labels[p as usize] as usize] += 1;
            }
            (0..3).max_by_key(|&c| counts[c]).unwrap() as u16
        })
        .collect();
    let back = devoxelize_labels(&voxel_labels, &vox.map)?;
    let agree = back.iter().zip(labels).filter(|(a, b)| a == b && **a != IGNORE).count();
    println!("voxel majority labels agree with {agree}/{} points", scene.len());

    let image = project_range(&scene, 32, 512, 3f64.to_radians(), -25f64.to_radians())?;
    println!(
        "range image {}x{}: {} pixels filled by {} points",
        image.height,
        image.width,
        image.filled(),
        scene.len()
    );
    Ok(())
}
