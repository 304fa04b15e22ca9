use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{azimuth, to_spherical, PointCloud};
use crate::{Error, Result};

const TAU: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixAxis {
    Inclination,
    Azimuth,
}

/// Number of angular bands: fixed, or drawn uniformly from a set under the
/// mixing seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BandCount {
    Fixed(usize),
    Choice(Vec<usize>),
}

impl BandCount {
    fn resolve(&self, seed: u64) -> Result<usize> {
        let n = match self {
            BandCount::Fixed(n) => *n,
            BandCount::Choice(set) => *set
                .choose(&mut ChaCha8Rng::seed_from_u64(seed))
                .ok_or_else(|| Error::InvalidInput("empty band-count set".into()))?,
        };
        if n < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 bands, got {n}")));
        }
        Ok(n)
    }
}

/// How the two scans were split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MixPartition {
    /// Equal-angle bands over `[lower, upper]`; `mixed_a` takes the even
    /// bands of `a` and the odd bands of `b`.
    Bands {
        axis: MixAxis,
        bands: usize,
        lower: f64,
        upper: f64,
    },
    /// Azimuth sector `[start, start + width)` modulo 2 pi; `mixed_a` is
    /// `a` outside the sector plus `b` inside it.
    Sector { start: f64, width: f64 },
}

/// Origin of an output point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PointSource {
    A(u32),
    B(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixResult {
    pub mixed_a: PointCloud,
    pub mixed_b: PointCloud,
    pub partition: MixPartition,
    pub sources_a: Vec<PointSource>,
    pub sources_b: Vec<PointSource>,
}

fn require_labels(a: &PointCloud, b: &PointCloud) -> Result<()> {
    if a.labels().is_none() || b.labels().is_none() {
        return Err(Error::MissingLabels);
    }
    Ok(())
}

/// Splits both clouds by a per-point predicate: `take_a(i)` keeps point
/// `i` of `a` in `mixed_a`, `take_b(i)` moves point `i` of `b` into it.
fn swap(
    a: &PointCloud,
    b: &PointCloud,
    partition: MixPartition,
    take_a: impl Fn(usize) -> bool,
    take_b: impl Fn(usize) -> bool,
) -> MixResult {
    let (a_keep, a_give): (Vec<usize>, Vec<usize>) = (0..a.len()).partition(|&i| take_a(i));
    let (b_give, b_keep): (Vec<usize>, Vec<usize>) = (0..b.len()).partition(|&i| take_b(i));
    let tag = |ids: &[usize], f: fn(u32) -> PointSource| ids.iter().map(|&i| f(i as u32)).collect::<Vec<_>>();
    let mut sources_a = tag(&a_keep, PointSource::A);
    sources_a.extend(tag(&b_give, PointSource::B));
    let mut sources_b = tag(&a_give, PointSource::A);
    sources_b.extend(tag(&b_keep, PointSource::B));
    MixResult {
        mixed_a: a.select(&a_keep).concat(&b.select(&b_give)),
        mixed_b: a.select(&a_give).concat(&b.select(&b_keep)),
        partition,
        sources_a,
        sources_b,
    }
}

fn angles(cloud: &PointCloud, axis: MixAxis) -> Result<Vec<f64>> {
    cloud
        .positions()
        .iter()
        .map(|p| match axis {
            MixAxis::Azimuth => Ok(azimuth(p[0], p[1])),
            MixAxis::Inclination => Ok(to_spherical(*p)?.inclination),
        })
        .collect()
}

fn band_mix(a: &PointCloud, b: &PointCloud, axis: MixAxis, bands: usize) -> Result<MixResult> {
    require_labels(a, b)?;
    let (ta, tb) = (angles(a, axis)?, angles(b, axis)?);
    let (lower, upper) = match axis {
        MixAxis::Azimuth => (-PI, PI),
        MixAxis::Inclination => {
            let all = ta.iter().chain(&tb);
            let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
            let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
            if lo.is_finite() {
                (lo, hi)
            } else {
                (0.0, 0.0)
            }
        }
    };
    let span = upper - lower;
    let band = |t: f64| -> usize {
        if span <= 0.0 {
            return 0;
        }
        (((t - lower) / span * bands as f64).floor() as usize).min(bands - 1)
    };
    let partition = MixPartition::Bands {
        axis,
        bands,
        lower,
        upper,
    };
    Ok(swap(
        a,
        b,
        partition,
        |i| band(ta[i]) % 2 == 0,
        |i| band(tb[i]) % 2 == 1,
    ))
}

/// Mixes two labelled scans along equal-angle bands. Inclination bands
/// span the joint inclination range of both scans; azimuth bands span
/// `[-pi, pi)`. Band boundaries belong to the higher band.
pub fn lasermix(a: &PointCloud, b: &PointCloud, axis: MixAxis, bands: &BandCount, seed: u64) -> Result<MixResult> {
    band_mix(a, b, axis, bands.resolve(seed)?)
}

/// Frustum-region mixing. Regions are equal raw-angle intervals, so with a
/// fixed count this partitions exactly like [`lasermix`]; a
/// [`BandCount::Choice`] draws the count per call.
pub fn frustummix(a: &PointCloud, b: &PointCloud, axis: MixAxis, regions: &BandCount, seed: u64) -> Result<MixResult> {
    band_mix(a, b, axis, regions.resolve(seed)?)
}

/// Swaps an azimuth sector between two scans.
pub fn polarmix_scene(a: &PointCloud, b: &PointCloud, start: f64, width: f64) -> Result<MixResult> {
    if !(width > 0.0 && width < TAU) || !start.is_finite() {
        return Err(Error::InvalidSector(width));
    }
    require_labels(a, b)?;
    let inside = |p: &[f64; 3]| (azimuth(p[0], p[1]) - start).rem_euclid(TAU) < width;
    let partition = MixPartition::Sector { start, width };
    let (pa, pb) = (a.positions(), b.positions());
    Ok(swap(a, b, partition, |i| !inside(&pa[i]), |i| inside(&pb[i])))
}
