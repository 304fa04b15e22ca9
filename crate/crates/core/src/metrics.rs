//! Point-level confusion matrix, IoU and accuracy.

use crate::{ClassId, Error, Result, IGNORE};

/// Rows are ground truth, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

/// Per-class scores (`None` where undefined) and their mean over defined classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassScores {
    pub per_class: Vec<Option<f64>>,
    pub mean: f64,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn accumulate(&mut self, pred: &[ClassId], gt: &[ClassId]) -> Result<()> {
        if pred.len() != gt.len() {
            return Err(Error::InvalidInput(format!(
                "{} predictions for {} labels",
                pred.len(),
                gt.len()
            )));
        }
        let c = self.classes;
        let check = |v: ClassId, what: &str| {
            if (v as usize) < c {
                Ok(v as usize)
            } else {
                Err(Error::InvalidInput(format!("{what} class {v} outside 0..{c}")))
            }
        };
        for (&p, &g) in pred.iter().zip(gt) {
            if g == IGNORE {
                continue;
            }
            let (g, p) = (check(g, "ground-truth")?, check(p, "predicted")?);
            self.counts[g * c + p] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::InvalidInput("merging matrices of different class counts".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    fn true_positives(&self, c: usize) -> u64 {
        self.get(c, c)
    }

    fn row_sum(&self, c: usize) -> u64 {
        (0..self.classes).map(|p| self.get(c, p)).sum()
    }

    fn col_sum(&self, c: usize) -> u64 {
        (0..self.classes).map(|g| self.get(g, c)).sum()
    }

    /// Intersection over union per class; classes absent from both
    /// predictions and ground truth are undefined.
    pub fn iou(&self) -> Result<ClassScores> {
        let per_class = (0..self.classes)
            .map(|c| {
                let tp = self.true_positives(c);
                let denom = self.row_sum(c) + self.col_sum(c) - tp;
                (denom > 0).then(|| tp as f64 / denom as f64)
            })
            .collect();
        scores(per_class, "mIoU")
    }

    /// Per-class recall; classes with no ground-truth points are undefined.
    pub fn accuracy(&self) -> Result<ClassScores> {
        let per_class = (0..self.classes)
            .map(|c| {
                let row = self.row_sum(c);
                (row > 0).then(|| self.true_positives(c) as f64 / row as f64)
            })
            .collect();
        scores(per_class, "mAcc")
    }
}

fn scores(per_class: Vec<Option<f64>>, name: &str) -> Result<ClassScores> {
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::UndefinedMetric(format!("{name}: no class has scored points")));
    }
    let mean = defined.iter().sum::<f64>() / defined.len() as f64;
    Ok(ClassScores { per_class, mean })
}

pub fn miou(cm: &ConfusionMatrix) -> Result<ClassScores> {
    cm.iou()
}

pub fn macc(cm: &ConfusionMatrix) -> Result<ClassScores> {
    cm.accuracy()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cm_of(classes: usize, pred: &[ClassId], gt: &[ClassId]) -> ConfusionMatrix {
        let mut cm = ConfusionMatrix::new(classes);
        cm.accumulate(pred, gt).unwrap();
        cm
    }

    #[test]
    fn hand_example() {
        let cm = cm_of(2, &[0, 1, 1], &[0, 0, 1]);
        assert_eq!((cm.get(0, 0), cm.get(0, 1), cm.get(1, 0), cm.get(1, 1)), (1, 1, 0, 1));
        let iou = miou(&cm).unwrap();
        assert_eq!(iou.per_class, vec![Some(0.5), Some(0.5)]);
        assert_eq!(iou.mean, 0.5);
        let acc = macc(&cm).unwrap();
        assert_eq!(acc.per_class, vec![Some(0.5), Some(1.0)]);
        assert_eq!(acc.mean, 0.75);
    }

    #[test]
    fn perfect_and_degenerate() {
        let cm = cm_of(3, &[0, 2, 2, 0], &[0, 2, 2, 0]);
        assert_eq!(cm.get(0, 0), 2);
        assert_eq!(cm.get(2, 2), 2);
        let iou = miou(&cm).unwrap();
        assert_eq!(iou.per_class, vec![Some(1.0), None, Some(1.0)]);
        assert_eq!(iou.mean, 1.0);
        assert_eq!(macc(&cm).unwrap().mean, 1.0);

        let single = cm_of(4, &[1, 1], &[1, 1]);
        let acc = macc(&single).unwrap();
        assert_eq!(acc.per_class.iter().flatten().count(), 1);
        assert_eq!(acc.mean, 1.0);

        let ignored = cm_of(2, &[0, 1], &[IGNORE, IGNORE]);
        assert_eq!(ignored, ConfusionMatrix::new(2));
        assert!(matches!(miou(&ignored), Err(Error::UndefinedMetric(_))));
        assert!(matches!(macc(&ignored), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn rejects_bad_input() {
        let mut cm = ConfusionMatrix::new(2);
        assert!(cm.accumulate(&[0], &[0, 1]).is_err());
        assert!(cm.accumulate(&[2], &[0]).is_err());
        assert!(cm.accumulate(&[IGNORE], &[0]).is_err());
        assert!(cm.accumulate(&[0], &[5]).is_err());
    }

    proptest! {
        #[test]
        fn order_independent_and_bounded(
            pairs in prop::collection::vec((0u16..4, prop_oneof![0u16..4, Just(IGNORE)]), 1..60),
            rot in 0usize..60,
        ) {
            let (pred, gt): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
            let a = cm_of(4, &pred, &gt);
            let mut rotated = pairs.clone();
            let k = rot % rotated.len();
            rotated.rotate_left(k);
            rotated.reverse();
            let (p2, g2): (Vec<_>, Vec<_>) = rotated.into_iter().unzip();
            prop_assert_eq!(&a, &cm_of(4, &p2, &g2));
            prop_assert_eq!(a.total() as usize, gt.iter().filter(|&&g| g != IGNORE).count());
            if let (Ok(iou), Ok(acc)) = (miou(&a), macc(&a)) {
                for (i, c) in iou.per_class.iter().zip(&acc.per_class) {
                    if let (Some(i), Some(c)) = (i, c) {
                        prop_assert!((0.0..=1.0).contains(i));
                        prop_assert!(i <= c);
                    }
                }
            }
        }
    }
}
