//! Test-time augmentation: enables the flip, rotation, scale and
//! translation sets one at a time and reports accuracy and cost.
//!
//!     cargo run --release --example tta_inference

use lidarseg::bench::evaluate;
use lidarseg::ingest::{synth_scene, SynthSceneConfig};
use lidarseg::metrics::miou;
use lidarseg::segmentor::{Segmentor, SegmentorConfig, TrainState};
use lidarseg::sparse::ExecMode;
use lidarseg::tta::{enumerate_variants, TtaConfig};
use lidarseg::{PointCloud, Result};

fn main() -> Result<()> {
    let base = SynthSceneConfig::default();
    let train: Vec<PointCloud> = (0..4).map(|i| synth_scene(&base.with_seed(i))).collect::<Result<_>>()?;
    let held_out: Vec<PointCloud> = (4..6).map(|i| synth_scene(&base.with_seed(i))).collect::<Result<_>>()?;

    let mut state = TrainState::new(Segmentor::<f32>::new(SegmentorConfig::default())?);
    for step in 0..100 {
        state.train_step(&train[step % train.len()..][..1])?;
    }
    let model = state.model;

    for level in 0..=4 {
        let tta = TtaConfig::progressive(level);
        let variants = enumerate_variants(&tta)?;
        let (cm, elapsed, n) = evaluate(&model, &held_out, (level > 0).then_some(&tta), ExecMode::Parallel)?;
        assert_eq!(n, variants.len());
        println!(
            "level {level}: {n:>3} variants  mIoU {:.4}  {:>8.1} ms",
            miou(&cm)?.mean,
            elapsed.as_secs_f64() * 1e3
        );
    }
    Ok(())
}
