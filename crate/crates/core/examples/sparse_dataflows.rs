//! Runs one submanifold convolution on a voxelized synthetic scan through
//! all four dataflows, checks them against each other, and lets the
//! autotuner pick one.
//!
//!     cargo run --release --example sparse_dataflows

use lidarseg::ingest::{synth_scene, SynthSceneConfig};
use lidarseg::raster::{voxelize, VoxelizationConfig};
use lidarseg::sparse::{
    autotune, build_kernel_map, conv, relative_error, ConvSpec, ConvWeights, Dataflow, ExecMode, SparseTensor,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> lidarseg::Result<()> {
    let scene = synth_scene(&SynthSceneConfig::default())?;
    let grid = VoxelizationConfig::cartesian([-16.0, -16.0, -4.0], [16.0, 16.0, 8.0], 0.2);
    let vox = voxelize(&scene, &grid)?;

    let (c_in, c_out) = (16, 16);
    let spec = ConvSpec::submanifold(3, 3, c_in, c_out);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let features = (0..vox.coords.len() * c_in)
        .map(|_| rng.gen_range(-1.0f32..1.0))
        .collect();
    let x = SparseTensor::new(vox.coords.clone(), features, c_in, 1)?;
    let w = ConvWeights::for_spec(
        &spec,
        (0..spec.kernel_volume() * c_in * c_out)
            .map(|_| rng.gen_range(-0.1f32..0.1))
            .collect(),
    )?;
    let map = build_kernel_map(&vox.coords, &vox.coords, &spec)?;
    println!(
        "{} points -> {} voxels, {} map pairs",
        scene.len(),
        x.len(),
        map.total_pairs()
    );

    let (reference, _) = conv(&x, &w, &map, Dataflow::GatherScatter, ExecMode::Serial)?;
    for flow in Dataflow::ALL {
        let (y, stats) = conv(&x, &w, &map, flow, ExecMode::Parallel)?;
        let err = relative_error(&y.features_f64(), &reference.features_f64());
        print!(
            "{:<18} rel err {err:.1e}  MACs {:>9}  padded {:>9}  weight groups {:>3}",
            flow.name(),
            stats.macs,
            stats.padded_macs,
            stats.weight_groups
        );
        if let Some(unsorted) = stats.unsorted_padded_macs {
            print!("  (row order would issue {unsorted})");
        }
        println!();
    }

    let tuned = autotune(&x, &w, &map, &[], 5, ExecMode::Serial)?;
    for entry in &tuned.table {
        println!(
            "{:<18} median {:>8.3} ms",
            entry.dataflow.name(),
            entry.median.as_secs_f64() * 1e3
        );
    }
    println!("autotuner picks {}", tuned.chosen);
    Ok(())
}
