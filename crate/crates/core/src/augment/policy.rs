use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::global::{random_global_aug, GlobalAugConfig};
use super::mix::{frustummix, lasermix, polarmix_scene, BandCount, MixAxis};
use crate::geometry::PointCloud;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MixOperator {
    Lasermix {
        axis: MixAxis,
        bands: BandCount,
    },
    /// Sector start is uniform in `[-pi, pi)`, width uniform in `width`.
    Polarmix {
        width: (f64, f64),
    },
    Frustummix {
        axis: MixAxis,
        regions: BandCount,
    },
}

/// With probability `mix_prob`, one operator from `mix` (chosen uniformly)
/// mixes the pair; then each output gets an independent global transform
/// if `global` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentPolicy {
    pub mix: Vec<MixOperator>,
    pub mix_prob: f64,
    pub global: Option<GlobalAugConfig>,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self {
            mix: vec![
                MixOperator::Lasermix {
                    axis: MixAxis::Inclination,
                    bands: BandCount::Choice(vec![2, 3, 4, 5, 6]),
                },
                MixOperator::Polarmix { width: (PI / 4.0, PI) },
            ],
            mix_prob: 1.0,
            global: Some(GlobalAugConfig::default()),
        }
    }
}

impl AugmentPolicy {
    pub fn none() -> Self {
        Self {
            mix: Vec::new(),
            mix_prob: 0.0,
            global: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mix_prob) {
            return Err(Error::Config("mix_prob must lie in [0, 1]".into()));
        }
        for op in &self.mix {
            if let MixOperator::Polarmix { width } = op {
                if !(width.0 > 0.0 && width.0 <= width.1 && width.1 < 2.0 * PI) {
                    return Err(Error::InvalidSector(width.1));
                }
            }
        }
        if let Some(g) = &self.global {
            g.validate()?;
        }
        Ok(())
    }
}

/// Augments a pair of labelled scans under `seed`.
pub fn apply_policy(
    a: &PointCloud,
    b: &PointCloud,
    policy: &AugmentPolicy,
    seed: u64,
) -> Result<(PointCloud, PointCloud)> {
    policy.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mix_seed: u64 = rng.gen();
    let (mut x, mut y) = (a.clone(), b.clone());
    if !policy.mix.is_empty() && rng.gen_bool(policy.mix_prob) {
        let op = &policy.mix[rng.gen_range(0..policy.mix.len())];
        let r = match op {
            MixOperator::Lasermix { axis, bands } => lasermix(a, b, *axis, bands, mix_seed)?,
            MixOperator::Frustummix { axis, regions } => frustummix(a, b, *axis, regions, mix_seed)?,
            MixOperator::Polarmix { width } => {
                let start = rng.gen_range(-PI..PI);
                let w = if width.0 == width.1 {
                    width.0
                } else {
                    rng.gen_range(width.0..=width.1)
                };
                polarmix_scene(a, b, start, w)?
            }
        };
        (x, y) = (r.mixed_a, r.mixed_b);
    }
    if let Some(g) = &policy.global {
        x = random_global_aug(&x, g, rng.gen())?.0;
        y = random_global_aug(&y, g, rng.gen())?.0;
    }
    Ok((x, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scans() -> (PointCloud, PointCloud) {
        let a = PointCloud::new(vec![[1.0, 0.0, 0.2], [-1.0, 0.5, -0.3]], vec![0.2; 2], Some(vec![0, 1])).unwrap();
        let b = PointCloud::new(vec![[0.0, 1.0, 0.0], [0.3, -2.0, 0.4]], vec![0.7; 2], Some(vec![2, 2])).unwrap();
        (a, b)
    }

    #[test]
    fn none_policy_is_identity() {
        let (a, b) = scans();
        assert_eq!(apply_policy(&a, &b, &AugmentPolicy::none(), 5).unwrap(), (a, b));
    }

    #[test]
    fn seeded_and_conserving() {
        let (a, b) = scans();
        let p = AugmentPolicy::default();
        let r1 = apply_policy(&a, &b, &p, 42).unwrap();
        assert_eq!(r1, apply_policy(&a, &b, &p, 42).unwrap());
        assert_eq!(r1.0.len() + r1.1.len(), 4);
        let mut labels: Vec<_> =
            r1.0.labels()
                .unwrap()
                .iter()
                .chain(r1.1.labels().unwrap())
                .copied()
                .collect();
        labels.sort_unstable();
        assert_eq!(labels, vec![0, 1, 2, 2]);
    }

    #[test]
    fn parses_from_toml() {
        let p: AugmentPolicy = toml::from_str(
            r#"
            mix_prob = 0.5
            mix = [
              { op = "lasermix", axis = "inclination", bands = [2, 3] },
              { op = "frustummix", axis = "azimuth", regions = 4 },
              { op = "polarmix", width = [0.5, 1.5] },
            ]
            [global]
            scale = [0.9, 1.1]
            "#,
        )
        .unwrap();
        assert_eq!(p.mix.len(), 3);
        assert_eq!(p.global.unwrap().scale, (0.9, 1.1));
        assert!(p.mix.contains(&MixOperator::Frustummix {
            axis: MixAxis::Azimuth,
            regions: BandCount::Fixed(4)
        }));
    }
}
