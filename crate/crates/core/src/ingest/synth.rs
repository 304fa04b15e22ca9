//! Deterministic labeled scenes built from parametric surfaces.
//!
//! Every primitive is sampled on a `beams x points_per_beam` jittered grid,
//! so a scene holds exactly
//! `(ground_patches + boxes + poles) * beams * points_per_beam` points.
//! The sensor sits at the origin, 1.73 m above flat ground.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Point3, PointCloud};
use crate::{ClassId, Error, Result};

pub const GROUND: ClassId = 0;
pub const BOX: ClassId = 1;
pub const POLE: ClassId = 2;
pub const SYNTH_CLASS_NAMES: [&str; 3] = ["ground", "box", "pole"];

const GROUND_Z: f64 = -1.73;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSceneConfig {
    pub ground_patches: usize,
    pub boxes: usize,
    pub poles: usize,
    pub beams: usize,
    pub points_per_beam: usize,
    /// Half-width of the square scene footprint, meters.
    pub extent: f64,
    pub seed: u64,
}

impl Default for SynthSceneConfig {
    fn default() -> Self {
        Self {
            ground_patches: 3,
            boxes: 4,
            poles: 4,
            beams: 16,
            points_per_beam: 24,
            extent: 15.0,
            seed: 0,
        }
    }
}

impl SynthSceneConfig {
    pub fn total_points(&self) -> usize {
        (self.ground_patches + self.boxes + self.poles) * self.beams * self.points_per_beam
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

struct Builder {
    rng: ChaCha8Rng,
    positions: Vec<Point3>,
    intensity: Vec<f64>,
    labels: Vec<ClassId>,
}

impl Builder {
    fn push(&mut self, p: Point3, base_intensity: f64, label: ClassId) {
        let i = (base_intensity + self.rng.gen_range(-0.15..0.15)).clamp(0.0, 1.0);
        self.positions.push(p);
        self.intensity.push(i);
        self.labels.push(label);
    }

    fn jitter(&mut self) -> f64 {
        self.rng.gen_range(0.0..1.0)
    }
}

pub fn synth_scene(cfg: &SynthSceneConfig) -> Result<PointCloud> {
    if !(cfg.extent > 0.0 && cfg.extent.is_finite()) {
        return Err(Error::Config(format!(
            "scene extent must be positive, got {}",
            cfg.extent
        )));
    }
    let total = cfg.total_points();
    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        positions: Vec::with_capacity(total),
        intensity: Vec::with_capacity(total),
        labels: Vec::with_capacity(total),
    };
    let (rows, cols) = (cfg.beams, cfg.points_per_beam);
    let place = 0.8 * cfg.extent;

    for _ in 0..cfg.ground_patches {
        let cx = b.rng.gen_range(-place..=place);
        let cy = b.rng.gen_range(-place..=place);
        let side = b.rng.gen_range(0.3..0.5) * cfg.extent;
        for r in 0..rows {
            for c in 0..cols {
                let u = (r as f64 + b.jitter()) / rows as f64 - 0.5;
                let v = (c as f64 + b.jitter()) / cols as f64 - 0.5;
                let z = GROUND_Z + b.rng.gen_range(-0.03..0.03);
                b.push([cx + u * side, cy + v * side, z], 0.3, GROUND);
            }
        }
    }

    for _ in 0..cfg.boxes {
        let cx = b.rng.gen_range(-place..=place);
        let cy = b.rng.gen_range(-place..=place);
        let width = b.rng.gen_range(1.5..4.0);
        let depth = b.rng.gen_range(1.5..4.0);
        let height = b.rng.gen_range(1.4..2.5);
        let yaw: f64 = b.rng.gen_range(-PI..PI);
        let (s, co) = yaw.sin_cos();
        let perimeter = 2.0 * (width + depth);
        for r in 0..rows {
            let z = GROUND_Z + height * (r as f64 + b.jitter()) / rows as f64;
            for c in 0..cols {
                let t = perimeter * (c as f64 + b.jitter()) / cols as f64;
                let (lx, ly) = if t < width {
                    (t - width / 2.0, -depth / 2.0)
                } else if t < width + depth {
                    (width / 2.0, t - width - depth / 2.0)
                } else if t < 2.0 * width + depth {
                    (width / 2.0 - (t - width - depth), depth / 2.0)
                } else {
                    (-width / 2.0, depth / 2.0 - (t - 2.0 * width - depth))
                };
                b.push([cx + co * lx - s * ly, cy + s * lx + co * ly, z], 0.45, BOX);
            }
        }
    }

    for _ in 0..cfg.poles {
        let cx = b.rng.gen_range(-place..=place);
        let cy = b.rng.gen_range(-place..=place);
        let radius = b.rng.gen_range(0.1..0.2);
        let height = b.rng.gen_range(3.0..6.0);
        for r in 0..rows {
            let z = GROUND_Z + height * (r as f64 + b.jitter()) / rows as f64;
            for c in 0..cols {
                let a = 2.0 * PI * (c as f64 + b.jitter()) / cols as f64;
                b.push([cx + radius * a.cos(), cy + radius * a.sin(), z], 0.6, POLE);
            }
        }
    }

    PointCloud::new(b.positions, b.intensity, Some(b.labels))
}
