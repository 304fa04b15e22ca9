use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{apply_transform, PointCloud, SimilarityTransform};
use crate::{Error, Result};

/// Sampling ranges for a random similarity transform. Yaw is drawn from
/// `[yaw.0, yaw.1)`, scale from `[scale.0, scale.1]`, each translation
/// component from `[-t, t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlobalAugConfig {
    pub yaw: (f64, f64),
    pub scale: (f64, f64),
    pub flip_x_prob: f64,
    pub flip_y_prob: f64,
    pub translation: [f64; 3],
}

impl Default for GlobalAugConfig {
    fn default() -> Self {
        Self {
            yaw: (-PI, PI),
            scale: (0.95, 1.05),
            flip_x_prob: 0.5,
            flip_y_prob: 0.5,
            translation: [0.1, 0.1, 0.1],
        }
    }
}

impl GlobalAugConfig {
    pub fn identity() -> Self {
        Self {
            yaw: (0.0, 0.0),
            scale: (1.0, 1.0),
            flip_x_prob: 0.0,
            flip_y_prob: 0.0,
            translation: [0.0; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 <= r.1;
        if !ordered(self.yaw) || !ordered(self.scale) || self.scale.0 <= 0.0 {
            return Err(Error::Config(format!("invalid yaw/scale ranges in {self:?}")));
        }
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.flip_x_prob) || !prob(self.flip_y_prob) {
            return Err(Error::Config("flip probabilities must lie in [0, 1]".into()));
        }
        if self.translation.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Config("translation bounds must be non-negative".into()));
        }
        Ok(())
    }
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64, inclusive: bool) -> f64 {
    if lo == hi {
        lo
    } else if inclusive {
        rng.gen_range(lo..=hi)
    } else {
        rng.gen_range(lo..hi)
    }
}

pub fn sample_transform(cfg: &GlobalAugConfig, rng: &mut impl Rng) -> Result<SimilarityTransform> {
    cfg.validate()?;
    let yaw = uniform(rng, cfg.yaw.0, cfg.yaw.1, false);
    let scale = uniform(rng, cfg.scale.0, cfg.scale.1, true);
    let flip_x = rng.gen_bool(cfg.flip_x_prob);
    let flip_y = rng.gen_bool(cfg.flip_y_prob);
    let translation = cfg.translation.map(|t| uniform(rng, -t, t, true));
    Ok(SimilarityTransform {
        yaw,
        scale,
        flip_x,
        flip_y,
        translation,
    })
}

/// Applies a transform sampled under `seed`; returns it alongside the cloud.
pub fn random_global_aug(
    cloud: &PointCloud,
    cfg: &GlobalAugConfig,
    seed: u64,
) -> Result<(PointCloud, SimilarityTransform)> {
    let t = sample_transform(cfg, &mut ChaCha8Rng::seed_from_u64(seed))?;
    Ok((apply_transform(cloud, &t)?, t))
}
