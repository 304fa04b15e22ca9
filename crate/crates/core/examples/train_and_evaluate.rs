//! Trains the tiny segmentor on synthetic scans, saves a checkpoint, and
//! scores it on held-out scans against the majority-class baseline.
//!
//!     cargo run --release --example train_and_evaluate

use lidarseg::ingest::{synth_scene, SynthSceneConfig, SYNTH_CLASS_NAMES};
use lidarseg::metrics::{macc, miou, ConfusionMatrix};
use lidarseg::segmentor::{Segmentor, SegmentorConfig, TrainState};
use lidarseg::{PointCloud, Result};

fn score(model: &Segmentor, scenes: &[PointCloud]) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(model.num_classes());
    for s in scenes {
        cm.accumulate(&model.predict(s)?, s.labels().unwrap())?;
    }
    Ok(cm)
}

fn main() -> Result<()> {
    let base = SynthSceneConfig::default();
    let train: Vec<PointCloud> = (0..4).map(|i| synth_scene(&base.with_seed(i))).collect::<Result<_>>()?;
    let held_out: Vec<PointCloud> = (4..6).map(|i| synth_scene(&base.with_seed(i))).collect::<Result<_>>()?;

    let cfg = SegmentorConfig::default();
    let mut state = TrainState::new(Segmentor::<f32>::new(cfg)?);
    println!("{} parameters", state.model.params().len());
    let plans = train.iter().map(|s| state.model.plan(s)).collect::<Result<Vec<_>>>()?;
    for step in 0..200 {
        let i = step % train.len();
        let loss = state.train_step_planned(&[(&plans[i], train[i].labels().unwrap())])?;
        if step % 25 == 0 || step == 199 {
            println!("step {step:>3}  loss {loss:.4}");
        }
    }

    let path = std::env::temp_dir().join("lidarseg-example.ckpt");
    state.model.save(&path)?;
    let model = Segmentor::<f32>::load(&path)?;

    let cm = score(&model, &held_out)?;
    let iou = miou(&cm)?;
    for (c, v) in iou.per_class.iter().enumerate() {
        println!(
            "{:<8} IoU {}",
            SYNTH_CLASS_NAMES[c],
            v.map_or("undefined".into(), |v| format!("{v:.3}"))
        );
    }
    let mut majority = ConfusionMatrix::new(3);
    for s in &held_out {
        majority.accumulate(&vec![0; s.len()], s.labels().unwrap())?;
    }
    println!(
        "mIoU {:.3}, mAcc {:.3}; always-ground baseline mIoU {:.3}",
        iou.mean,
        macc(&cm)?.mean,
        miou(&majority)?.mean
    );
    Ok(())
}
