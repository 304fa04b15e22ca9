use std::f64::consts::PI;

use crate::geometry::{to_spherical, PointCloud};
use crate::{Error, Result};

/// Per-pixel channels: range, x, y, z, intensity.
pub const RANGE_CHANNELS: usize = 5;

/// Spherical projection of a cloud. Points outside the vertical field of
/// view are clamped to the first or last row, so every point has a pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeImage {
    pub height: usize,
    pub width: usize,
    /// Nearest point per pixel, row-major.
    pub pixel_point: Vec<Option<u32>>,
    /// `height * width * RANGE_CHANNELS` values; zeros for empty pixels.
    pub channels: Vec<f64>,
    /// `(row, col)` of every point.
    pub point_pixel: Vec<(u32, u32)>,
}

impl RangeImage {
    pub fn point_at(&self, row: usize, col: usize) -> Option<usize> {
        self.pixel_point[row * self.width + col].map(|p| p as usize)
    }

    pub fn pixel_channels(&self, row: usize, col: usize) -> &[f64] {
        let i = (row * self.width + col) * RANGE_CHANNELS;
        &self.channels[i..i + RANGE_CHANNELS]
    }

    pub fn filled(&self) -> usize {
        self.pixel_point.iter().filter(|p| p.is_some()).count()
    }
}

pub fn project_range(
    cloud: &PointCloud,
    height: usize,
    width: usize,
    fov_up: f64,
    fov_down: f64,
) -> Result<RangeImage> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidInput("range image needs H, W >= 1".into()));
    }
    if !fov_up.is_finite() || !fov_down.is_finite() || fov_up <= fov_down {
        return Err(Error::InvalidInput(format!(
            "fov_up {fov_up} must exceed fov_down {fov_down}"
        )));
    }
    let fov = fov_up - fov_down;
    let mut pixel_point: Vec<Option<u32>> = vec![None; height * width];
    let mut best_range = vec![f64::INFINITY; height * width];
    let mut point_pixel = Vec::with_capacity(cloud.len());
    for (i, p) in cloud.positions().iter().enumerate() {
        let s = to_spherical(*p)?;
        let row = ((1.0 - (s.inclination - fov_down) / fov) * height as f64).floor();
        let col = ((s.azimuth + PI) / (2.0 * PI) * width as f64).floor();
        let row = row.clamp(0.0, (height - 1) as f64) as usize;
        let col = col.clamp(0.0, (width - 1) as f64) as usize;
        let px = row * width + col;
        if s.range < best_range[px] {
            best_range[px] = s.range;
            pixel_point[px] = Some(i as u32);
        }
        point_pixel.push((row as u32, col as u32));
    }
    let mut channels = vec![0.0; height * width * RANGE_CHANNELS];
    for (px, p) in pixel_point.iter().enumerate() {
        if let Some(p) = p {
            let [x, y, z] = cloud.positions()[*p as usize];
            let c = &mut channels[px * RANGE_CHANNELS..(px + 1) * RANGE_CHANNELS];
            c.copy_from_slice(&[best_range[px], x, y, z, cloud.intensity()[*p as usize]]);
        }
    }
    Ok(RangeImage {
        height,
        width,
        pixel_point,
        channels,
        point_pixel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const UP: f64 = 3.0 * PI / 180.0;
    const DOWN: f64 = -25.0 * PI / 180.0;

    fn cloud(points: &[[f64; 3]]) -> PointCloud {
        PointCloud::new(points.to_vec(), vec![0.5; points.len()], None).unwrap()
    }

    #[test]
    fn single_point() {
        let img = project_range(&cloud(&[[10.0, 0.0, -1.0]]), 16, 32, UP, DOWN).unwrap();
        assert_eq!(img.filled(), 1);
        let (r, c) = img.point_pixel[0];
        assert_eq!(img.point_at(r as usize, c as usize), Some(0));
        // Azimuth 0 lands in the middle column.
        assert_eq!(c, 16);
        let ch = img.pixel_channels(r as usize, c as usize);
        assert!((ch[0] - 101f64.sqrt()).abs() < 1e-12);
        assert_eq!(&ch[1..], &[10.0, 0.0, -1.0, 0.5]);
    }

    #[test]
    fn nearest_wins() {
        let img = project_range(&cloud(&[[5.0, 0.0, 0.0], [3.0, 0.0, 0.0]]), 8, 8, UP, DOWN).unwrap();
        assert_eq!(img.point_pixel[0], img.point_pixel[1]);
        let (r, c) = img.point_pixel[0];
        assert_eq!(img.point_at(r as usize, c as usize), Some(1));
        assert_eq!(img.pixel_channels(r as usize, c as usize)[0], 3.0);
    }

    #[test]
    fn above_fov_clamps_to_top_row() {
        let theta: f64 = UP + 0.2;
        let row = ((1.0 - (theta - DOWN) / (UP - DOWN)) * 16.0).floor();
        assert!(row < 0.0);
        let p = [theta.cos(), 0.0, theta.sin()];
        let img = project_range(&cloud(&[p, [1.0, 0.0, -5.0]]), 16, 32, UP, DOWN).unwrap();
        assert_eq!(img.point_pixel[0].0, 0);
        assert_eq!(img.point_pixel[1].0, 15);
    }

    #[test]
    fn column_seam() {
        let img = project_range(&cloud(&[[-1.0, 0.0, 0.0], [-1.0, 1e-9, 0.0]]), 4, 8, UP, DOWN).unwrap();
        assert_eq!(img.point_pixel[0].1, 0);
        assert_eq!(img.point_pixel[1].1, 7);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(project_range(&cloud(&[]), 0, 8, UP, DOWN).is_err());
        assert!(project_range(&cloud(&[]), 8, 8, DOWN, UP).is_err());
    }
}
