//! Test-time augmentation over flip x rotation x scale x translation
//! variants with softmax-probability averaging.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{apply_transform, PointCloud, SimilarityTransform};
use crate::segmentor::{argmax_labels, softmax_rows, Segmentor};
use crate::sparse::{Element, ExecMode};
use crate::{ClassId, Error, Result};

/// Anything producing per-point logits.
pub trait PointModel: Sync {
    fn num_classes(&self) -> usize;
    /// `points x classes` logits.
    fn logits(&self, cloud: &PointCloud) -> Result<Vec<f64>>;
}

impl<T: Element> PointModel for Segmentor<T> {
    fn num_classes(&self) -> usize {
        Segmentor::num_classes(self)
    }

    fn logits(&self, cloud: &PointCloud) -> Result<Vec<f64>> {
        Ok(self.forward(cloud)?.into_iter().map(Element::to_f64).collect())
    }
}

/// Each enabled set multiplies the variant count: flips by 4, the others
/// by 3. The first entry of every set must be the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TtaConfig {
    pub flip: bool,
    pub rotate: bool,
    pub scale: bool,
    pub translate: bool,
    pub rotations: [f64; 3],
    pub scales: [f64; 3],
    pub translations: [[f64; 3]; 3],
}

impl Default for TtaConfig {
    fn default() -> Self {
        use std::f64::consts::FRAC_PI_4;
        Self {
            flip: false,
            rotate: false,
            scale: false,
            translate: false,
            rotations: [0.0, -FRAC_PI_4, FRAC_PI_4],
            scales: [1.0, 0.95, 1.05],
            translations: [[0.0; 3], [-0.1, -0.1, 0.0], [0.1, 0.1, 0.0]],
        }
    }
}

impl TtaConfig {
    pub fn all() -> Self {
        Self {
            flip: true,
            rotate: true,
            scale: true,
            translate: true,
            ..Self::default()
        }
    }

    /// The first `n` sets enabled, in the order flip, rotate, scale, translate.
    pub fn progressive(n: usize) -> Self {
        Self {
            flip: n >= 1,
            rotate: n >= 2,
            scale: n >= 3,
            translate: n >= 4,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rotations[0] != 0.0 || self.scales[0] != 1.0 || self.translations[0] != [0.0; 3] {
            return Err(Error::Config(
                "the first entry of each TTA set must be the identity".into(),
            ));
        }
        if self.scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Config("TTA scales must be positive".into()));
        }
        Ok(())
    }

    pub fn variant_count(&self) -> usize {
        let n = |on: bool, k: usize| if on { k } else { 1 };
        n(self.flip, 4) * n(self.rotate, 3) * n(self.scale, 3) * n(self.translate, 3)
    }
}

/// Cartesian product of the enabled sets; flips vary slowest, translations
/// fastest.
pub fn enumerate_variants(cfg: &TtaConfig) -> Result<Vec<SimilarityTransform>> {
    cfg.validate()?;
    let flips: &[(bool, bool)] = if cfg.flip {
        &[(false, false), (true, false), (false, true), (true, true)]
    } else {
        &[(false, false)]
    };
    let take = |on: bool, n: usize| if on { n } else { 1 };
    let mut out = Vec::with_capacity(cfg.variant_count());
    for &(flip_x, flip_y) in flips {
        for &yaw in &cfg.rotations[..take(cfg.rotate, 3)] {
            for &scale in &cfg.scales[..take(cfg.scale, 3)] {
                for &translation in &cfg.translations[..take(cfg.translate, 3)] {
                    out.push(SimilarityTransform {
                        yaw,
                        scale,
                        flip_x,
                        flip_y,
                        translation,
                    });
                }
            }
        }
    }
    Ok(out)
}

fn variant_probabilities(cloud: &PointCloud, model: &dyn PointModel, t: &SimilarityTransform) -> Result<Vec<f64>> {
    let logits = model.logits(&apply_transform(cloud, t)?)?;
    if logits.len() != cloud.len() * model.num_classes() {
        return Err(Error::InvalidInput(format!(
            "model returned {} logits for {} points",
            logits.len(),
            cloud.len()
        )));
    }
    Ok(softmax_rows(&logits, model.num_classes()))
}

/// Per-point class probabilities averaged over `variants`, reduced in
/// variant order.
pub fn average_probabilities(
    cloud: &PointCloud,
    model: &dyn PointModel,
    variants: &[SimilarityTransform],
    mode: ExecMode,
) -> Result<Vec<f64>> {
    let run = |(i, t): (usize, &SimilarityTransform)| {
        variant_probabilities(cloud, model, t).map_err(|e| Error::Variant {
            variant: i,
            source: Box::new(e),
        })
    };
    let per_variant: Vec<Vec<f64>> = match mode {
        ExecMode::Serial => variants.iter().enumerate().map(run).collect::<Result<_>>()?,
        ExecMode::Parallel => variants.par_iter().enumerate().map(run).collect::<Result<_>>()?,
    };
    let mut sum = vec![0.0; cloud.len() * model.num_classes()];
    for probs in &per_variant {
        sum.iter_mut().zip(probs).for_each(|(s, p)| *s += p);
    }
    let n = variants.len().max(1) as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Ok(sum)
}

pub fn tta_predict(cloud: &PointCloud, model: &dyn PointModel, cfg: &TtaConfig) -> Result<Vec<ClassId>> {
    let variants = enumerate_variants(cfg)?;
    let probs = average_probabilities(cloud, model, &variants, ExecMode::Serial)?;
    Ok(argmax_labels(&probs, model.num_classes()))
}
