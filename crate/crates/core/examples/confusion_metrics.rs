//! Confusion matrices, per-class IoU and accuracy, and how ignored and
//! absent classes are handled.
//!
//!     cargo run --example confusion_metrics

use lidarseg::metrics::{macc, miou, ConfusionMatrix};
use lidarseg::IGNORE;

fn main() -> lidarseg::Result<()> {
    let mut cm = ConfusionMatrix::new(2);
    cm.accumulate(&[0, 1, 1], &[0, 0, 1])?;
    println!(
        "gt [0, 0, 1], pred [0, 1, 1]: mIoU {}, mAcc {}",
        miou(&cm)?.mean,
        macc(&cm)?.mean
    );

    // IGNORE ground truth is skipped; class 2 never occurs, so it is left
    // out of the means.
    let mut cm = ConfusionMatrix::new(3);
    cm.accumulate(&[0, 0, 1, 2, 1], &[0, IGNORE, 1, IGNORE, 0])?;
    let iou = miou(&cm)?;
    println!("per-class IoU {:?}, mean {:.3}", iou.per_class, iou.mean);

    // Matrices from separate scans merge by addition.
    let mut other = ConfusionMatrix::new(3);
    other.accumulate(&[2, 2], &[2, 1])?;
    cm.merge(&other)?;
    println!("merged: {} scored points, mIoU {:.3}", cm.total(), miou(&cm)?.mean);

    let mut empty = ConfusionMatrix::new(3);
    empty.accumulate(&[0, 1], &[IGNORE, IGNORE])?;
    match miou(&empty) {
        Err(e) => println!("all ground truth ignored: {e}"),
        Ok(s) => println!("unexpected score {}", s.mean),
    }
    Ok(())
}
