//! Point clouds, frame conversions and yaw-only similarity transforms.
//!
//! Azimuth lives in the half-open interval `[-pi, pi)`: an `atan2` result of
//! exactly `pi` is mapped to `-pi`. Points on the vertical axis (and the
//! origin) get azimuth 0, the origin also gets inclination 0.

use std::f64::consts::PI;

use crate::{ClassId, Error, Result};

pub type Point3 = [f64; 3];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    positions: Vec<Point3>,
    intensity: Vec<f64>,
    labels: Option<Vec<ClassId>>,
}

impl PointCloud {
    pub fn new(positions: Vec<Point3>, intensity: Vec<f64>, labels: Option<Vec<ClassId>>) -> Result<Self> {
        if intensity.len() != positions.len() {
            return Err(Error::InvalidInput(format!(
                "{} positions but {} intensities",
                positions.len(),
                intensity.len()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != positions.len() {
                return Err(Error::InvalidInput(format!(
                    "{} positions but {} labels",
                    positions.len(),
                    l.len()
                )));
            }
        }
        if let Some(k) = positions.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidInput(format!("point {k} is not finite")));
        }
        Ok(Self {
            positions,
            intensity,
            labels,
        })
    }

    pub fn empty(labeled: bool) -> Self {
        Self {
            positions: Vec::new(),
            intensity: Vec::new(),
            labels: labeled.then(Vec::new),
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }

    pub fn labels(&self) -> Option<&[ClassId]> {
        self.labels.as_deref()
    }

    pub fn with_labels(mut self, labels: Vec<ClassId>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::InvalidInput(format!(
                "{} positions but {} labels",
                self.len(),
                labels.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn without_labels(mut self) -> Self {
        self.labels = None;
        self
    }

    /// Keeps the points whose indices are listed, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            positions: indices.iter().map(|&i| self.positions[i]).collect(),
            intensity: indices.iter().map(|&i| self.intensity[i]).collect(),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Concatenates two clouds. The result is labeled only if both are.
    pub fn concat(&self, other: &PointCloud) -> Self {
        let mut positions = self.positions.clone();
        positions.extend_from_slice(&other.positions);
        let mut intensity = self.intensity.clone();
        intensity.extend_from_slice(&other.intensity);
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        Self {
            positions,
            intensity,
            labels,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalCoord {
    pub range: f64,
    pub azimuth: f64,
    pub inclination: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylindricalCoord {
    pub rho: f64,
    pub azimuth: f64,
    pub z: f64,
}

fn check_finite(p: &Point3) -> Result<()> {
    if p.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("non-finite point {p:?}")))
    }
}

/// Horizontal angle in `[-pi, pi)`, 0 on the vertical axis.
pub fn azimuth(x: f64, y: f64) -> f64 {
    if x == 0.0 && y == 0.0 {
        return 0.0;
    }
    let a = y.atan2(x);
    if a >= PI {
        -PI
    } else {
        a
    }
}

pub fn to_spherical(p: Point3) -> Result<SphericalCoord> {
    check_finite(&p)?;
    let [x, y, z] = p;
    let horizontal = x.hypot(y);
    let range = horizontal.hypot(z);
    if range == 0.0 {
        return Ok(SphericalCoord {
            range: 0.0,
            azimuth: 0.0,
            inclination: 0.0,
        });
    }
    Ok(SphericalCoord {
        range,
        azimuth: azimuth(x, y),
        inclination: z.atan2(horizontal),
    })
}

pub fn from_spherical(s: SphericalCoord) -> Point3 {
    let horizontal = s.range * s.inclination.cos();
    [
        horizontal * s.azimuth.cos(),
        horizontal * s.azimuth.sin(),
        s.range * s.inclination.sin(),
    ]
}

pub fn to_cylindrical(p: Point3) -> Result<CylindricalCoord> {
    check_finite(&p)?;
    let [x, y, z] = p;
    Ok(CylindricalCoord {
        rho: x.hypot(y),
        azimuth: azimuth(x, y),
        z,
    })
}

/// Flip, then yaw rotation, then uniform scale, then translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub yaw: f64,
    pub scale: f64,
    pub flip_x: bool,
    pub flip_y: bool,
    pub translation: [f64; 3],
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl SimilarityTransform {
    pub const IDENTITY: Self = Self {
        yaw: 0.0,
        scale: 1.0,
        flip_x: false,
        flip_y: false,
        translation: [0.0; 3],
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "scale must be positive, got {}",
                self.scale
            )));
        }
        if !self.yaw.is_finite() || self.translation.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("non-finite transform".into()));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    /// A single-axis flip is a reflection; it reverses the rotation sense.
    fn reflects(&self) -> bool {
        self.flip_x != self.flip_y
    }

    pub fn apply_point(&self, p: Point3) -> Point3 {
        if self.is_identity() {
            return p;
        }
        let [mut x, mut y, z] = p;
        if self.flip_x {
            x = -x;
        }
        if self.flip_y {
            y = -y;
        }
        let (s, c) = self.yaw.sin_cos();
        let (rx, ry) = (c * x - s * y, s * x + c * y);
        [
            self.scale * rx + self.translation[0],
            self.scale * ry + self.translation[1],
            self.scale * z + self.translation[2],
        ]
    }

    /// `self.then(next)` applies `self` first and `next` second.
    pub fn then(&self, next: &SimilarityTransform) -> SimilarityTransform {
        let sign = if next.reflects() { -1.0 } else { 1.0 };
        let mut linear_only = *next;
        linear_only.translation = [0.0; 3];
        let moved = linear_only.apply_point(self.translation);
        SimilarityTransform {
            yaw: next.yaw + sign * self.yaw,
            scale: self.scale * next.scale,
            flip_x: self.flip_x != next.flip_x,
            flip_y: self.flip_y != next.flip_y,
            translation: [
                moved[0] + next.translation[0],
                moved[1] + next.translation[1],
                moved[2] + next.translation[2],
            ],
        }
    }

    pub fn inverse(&self) -> SimilarityTransform {
        let sign = if self.reflects() { -1.0 } else { 1.0 };
        let mut inv = SimilarityTransform {
            yaw: -sign * self.yaw,
            scale: 1.0 / self.scale,
            flip_x: self.flip_x,
            flip_y: self.flip_y,
            translation: [0.0; 3],
        };
        let t = inv.apply_point(self.translation);
        inv.translation = [-t[0], -t[1], -t[2]];
        inv
    }
}

pub fn apply_transform(cloud: &PointCloud, t: &SimilarityTransform) -> Result<PointCloud> {
    t.validate()?;
    Ok(PointCloud {
        positions: cloud.positions.iter().map(|&p| t.apply_point(p)).collect(),
        intensity: cloud.intensity.clone(),
        labels: cloud.labels.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Point3, b: Point3, tol: f64) -> bool {
        let scale = b.iter().map(|v| v.abs()).fold(1.0, f64::max);
        a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= tol * scale)
    }

    #[test]
    fn spherical_examples() {
        let s = to_spherical([1.0, 0.0, 0.0]).unwrap();
        assert_eq!((s.range, s.azimuth, s.inclination), (1.0, 0.0, 0.0));
        let s = to_spherical([0.0, 0.0, 1.0]).unwrap();
        assert_eq!((s.range, s.azimuth), (1.0, 0.0));
        assert!((s.inclination - PI / 2.0).abs() < 1e-15);
        let s = to_spherical([1.0, 1.0, 2f64.sqrt()]).unwrap();
        assert!((s.range - 2.0).abs() < 1e-15);
        assert!((s.azimuth - PI / 4.0).abs() < 1e-15);
        assert!((s.inclination - PI / 4.0).abs() < 1e-15);
        let s = to_spherical([0.0; 3]).unwrap();
        assert_eq!((s.range, s.azimuth, s.inclination), (0.0, 0.0, 0.0));
        assert!(to_spherical([f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn cylindrical_examples() {
        let c = to_cylindrical([3.0, 4.0, 5.0]).unwrap();
        assert_eq!((c.rho, c.azimuth, c.z), (5.0, 4f64.atan2(3.0), 5.0));
        let c = to_cylindrical([0.0, 0.0, 2.0]).unwrap();
        assert_eq!((c.rho, c.azimuth, c.z), (0.0, 0.0, 2.0));
        // pi is outside [-pi, pi)
        let c = to_cylindrical([-1.0, 0.0, 0.0]).unwrap();
        assert_eq!(c.azimuth, -PI);
        assert!(to_cylindrical([0.0, f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn transform_examples() {
        let cloud = PointCloud::new(vec![[1.0, 2.0, 3.0]], vec![0.5], Some(vec![4])).unwrap();
        assert_eq!(apply_transform(&cloud, &SimilarityTransform::IDENTITY).unwrap(), cloud);

        let quarter = SimilarityTransform {
            yaw: PI / 2.0,
            ..SimilarityTransform::IDENTITY
        };
        let p = quarter.apply_point([1.0, 0.0, 0.0]);
        assert!(close(p, [0.0, 1.0, 0.0], 1e-12));

        let flip_then_half = SimilarityTransform {
            yaw: PI,
            flip_x: true,
            ..SimilarityTransform::IDENTITY
        };
        let p = flip_then_half.apply_point([1.0, 2.0, 0.0]);
        assert!(close(p, [1.0, -2.0, 0.0], 1e-12));

        let bad = SimilarityTransform {
            scale: 0.0,
            ..SimilarityTransform::IDENTITY
        };
        assert!(apply_transform(&cloud, &bad).is_err());
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(PointCloud::new(vec![[0.0; 3]], vec![], None).is_err());
        assert!(PointCloud::new(vec![[0.0; 3]], vec![0.0], Some(vec![])).is_err());
        assert!(PointCloud::new(vec![[f64::NAN, 0.0, 0.0]], vec![0.0], None).is_err());
    }

    fn arb_transform() -> impl Strategy<Value = SimilarityTransform> {
        (
            -10.0..10.0f64,
            0.1..5.0f64,
            any::<bool>(),
            any::<bool>(),
            prop::array::uniform3(-50.0..50.0f64),
        )
            .prop_map(|(yaw, scale, flip_x, flip_y, translation)| SimilarityTransform {
                yaw,
                scale,
                flip_x,
                flip_y,
                translation,
            })
    }

    proptest! {
        #[test]
        fn inverse_round_trip(t in arb_transform(), p in prop::array::uniform3(-100.0..100.0f64)) {
            let back = t.inverse().apply_point(t.apply_point(p));
            prop_assert!(close(back, p, 1e-9), "{back:?} vs {p:?}");
        }

        #[test]
        fn composition_matches_sequential(a in arb_transform(), b in arb_transform(), p in prop::array::uniform3(-100.0..100.0f64)) {
            let seq = b.apply_point(a.apply_point(p));
            let composed = a.then(&b).apply_point(p);
            prop_assert!(close(composed, seq, 1e-9));
        }

        #[test]
        fn composition_associative(a in arb_transform(), b in arb_transform(), c in arb_transform(), p in prop::array::uniform3(-100.0..100.0f64)) {
            let left = a.then(&b).then(&c).apply_point(p);
            let right = a.then(&b.then(&c)).apply_point(p);
            prop_assert!(close(left, right, 1e-9));
        }

        #[test]
        fn spherical_round_trip(r in 1e-3..500.0f64, az in -PI..PI, inc in -1.5..1.5f64) {
            let s = SphericalCoord { range: r, azimuth: az, inclination: inc };
            let back = to_spherical(from_spherical(s)).unwrap();
            prop_assert!((back.range - r).abs() <= 1e-9 * r);
            prop_assert!((back.azimuth - az).abs() <= 1e-9);
            prop_assert!((back.inclination - inc).abs() <= 1e-9);
        }

        #[test]
        fn cartesian_round_trip(p in prop::array::uniform3(-100.0..100.0f64)) {
            prop_assume!(p[0].hypot(p[1]).hypot(p[2]) > 1e-6);
            let back = from_spherical(to_spherical(p).unwrap());
            prop_assert!(close(back, p, 1e-9));
        }
    }
}
