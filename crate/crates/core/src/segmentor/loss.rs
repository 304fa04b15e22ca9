use crate::sparse::Element;
use crate::{ClassId, Error, Result, IGNORE};

/// Mean softmax cross-entropy over scored points.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub loss: f64,
    /// Points with a label other than `IGNORE`. Zero means the loss is 0 by
    /// convention.
    pub scored: usize,
}

/// Row-wise softmax in `f64`.
pub fn softmax_rows<T: Element>(logits: &[T], classes: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.chunks_exact(classes) {
        let max = row.iter().map(|v| v.to_f64()).fold(f64::NEG_INFINITY, f64::max);
        let start = out.len();
        let mut sum = 0.0;
        for v in row {
            let e = (v.to_f64() - max).exp();
            sum += e;
            out.push(e);
        }
        out[start..].iter_mut().for_each(|e| *e /= sum);
    }
    out
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn check_shape(len: usize, classes: usize, labels: &[ClassId]) -> Result<()> {
    if classes == 0 || len != labels.len() * classes {
        return Err(Error::InvalidInput(format!(
            "{len} logits for {} points of {classes} classes",
            labels.len()
        )));
    }
    Ok(())
}

fn checked_label(l: ClassId, classes: usize) -> Result<usize> {
    if (l as usize) < classes {
        Ok(l as usize)
    } else {
        Err(Error::UnknownClass(l as u32))
    }
}

/// Cross-entropy of per-point logits against labels; `IGNORE` points do not
/// contribute.
pub fn cross_entropy<T: Element>(logits: &[T], classes: usize, labels: &[ClassId]) -> Result<LossValue> {
    check_shape(logits.len(), classes, labels)?;
    let mut total = 0.0;
    let mut scored = 0;
    let mut row = vec![0.0; classes];
    for (z, &l) in logits.chunks_exact(classes).zip(labels) {
        if l == IGNORE {
            continue;
        }
        let l = checked_label(l, classes)?;
        row.iter_mut().zip(z).for_each(|(r, v)| *r = v.to_f64());
        total += log_sum_exp(&row) - row[l];
        scored += 1;
    }
    Ok(LossValue {
        loss: if scored == 0 { 0.0 } else { total / scored as f64 },
        scored,
    })
}

/// Summed (not averaged) cross-entropy of voxel logits against the labels of
/// their member points, and the gradient of that sum.
pub(crate) fn voxel_cross_entropy_sum<T: Element>(
    voxel_logits: &[T],
    classes: usize,
    members: impl Iterator<Item = Vec<ClassId>>,
) -> Result<(f64, usize, Vec<f64>)> {
    let mut grad = vec![0.0; voxel_logits.len()];
    let mut total = 0.0;
    let mut scored = 0;
    let mut hist = vec![0usize; classes];
    for ((z, g), labels) in voxel_logits
        .chunks_exact(classes)
        .zip(grad.chunks_exact_mut(classes))
        .zip(members)
    {
        hist.iter_mut().for_each(|h| *h = 0);
        let mut n = 0;
        for l in labels {
            if l != IGNORE {
                hist[checked_label(l, classes)?] += 1;
                n += 1;
            }
        }
        if n == 0 {
            continue;
        }
        let row: Vec<f64> = z.iter().map(|v| v.to_f64()).collect();
        let lse = log_sum_exp(&row);
        for c in 0..classes {
            total += hist[c] as f64 * (lse - row[c]);
            g[c] = n as f64 * (row[c] - lse).exp() - hist[c] as f64;
        }
        scored += n;
    }
    Ok((total, scored, grad))
}

/// Argmax per row; ties go to the lowest class index.
pub fn argmax_labels<T: Element>(logits: &[T], classes: usize) -> Vec<ClassId> {
    logits
        .chunks_exact(classes)
        .map(|row| {
            let mut best = 0;
            for (c, v) in row.iter().enumerate().skip(1) {
                if v.to_f64() > row[best].to_f64() {
                    best = c;
                }
            }
            best as ClassId
        })
        .collect()
}
