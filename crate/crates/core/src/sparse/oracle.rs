//! Dense reference convolution, evaluated with nested loops in `f64`:
//! `out[i] = sum_d in[stride * i + d] * W_d`, with cells outside the grid
//! reading as zero. Only used to check the sparse dataflows.

use super::offsets::enumerate_offsets;
use super::tensor::{ConvWeights, Element, SparseTensor};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrid {
    origin: Vec<i32>,
    dims: Vec<usize>,
    channels: usize,
    data: Vec<f64>,
}

impl DenseGrid {
    pub fn zeros(origin: Vec<i32>, dims: Vec<usize>, channels: usize) -> Result<Self> {
        if origin.len() != dims.len() || dims.is_empty() {
            return Err(Error::InvalidSpec("origin and dims must share a positive rank".into()));
        }
        let cells: usize = dims.iter().product();
        Ok(Self {
            origin,
            dims,
            channels,
            data: vec![0.0; cells * channels],
        })
    }

    pub fn origin(&self) -> &[i32] {
        &self.origin
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn cell_count(&self) -> usize {
        self.dims.iter().product()
    }

    fn index(&self, c: &[i32]) -> Option<usize> {
        let mut idx = 0usize;
        for ((&v, &o), &n) in c.iter().zip(&self.origin).zip(&self.dims) {
            let rel = v as i64 - o as i64;
            if rel < 0 || rel >= n as i64 {
                return None;
            }
            idx = idx * n + rel as usize;
        }
        Some(idx)
    }

    pub fn get(&self, c: &[i32]) -> Option<&[f64]> {
        self.index(c)
            .map(|i| &self.data[i * self.channels..(i + 1) * self.channels])
    }

    pub fn get_mut(&mut self, c: &[i32]) -> Option<&mut [f64]> {
        let ch = self.channels;
        self.index(c).map(move |i| &mut self.data[i * ch..(i + 1) * ch])
    }

    fn cell_coord(&self, mut flat: usize) -> Vec<i32> {
        let mut c = vec![0; self.dims.len()];
        for axis in (0..self.dims.len()).rev() {
            c[axis] = self.origin[axis] + (flat % self.dims[axis]) as i32;
            flat /= self.dims[axis];
        }
        c
    }

    /// Scatters a sparse tensor into a grid; every coordinate must fit.
    pub fn from_sparse<T: Element>(x: &SparseTensor<T>, origin: Vec<i32>, dims: Vec<usize>) -> Result<Self> {
        let mut grid = Self::zeros(origin, dims, x.channels())?;
        for (i, c) in x.coords().iter().enumerate() {
            let dst = grid
                .get_mut(c)
                .ok_or_else(|| Error::InvalidInput(format!("coordinate {c:?} outside grid")))?;
            for (d, v) in dst.iter_mut().zip(x.row(i)) {
                *d = v.to_f64();
            }
        }
        Ok(grid)
    }

    /// Smallest grid covering all coordinates of `x`.
    pub fn bounding<T: Element>(x: &SparseTensor<T>) -> Result<Self> {
        let dim = x.coords().dim();
        if x.is_empty() {
            return Self::from_sparse(x, vec![0; dim], vec![1; dim]);
        }
        let mut lo = vec![i32::MAX; dim];
        let mut hi = vec![i32::MIN; dim];
        for c in x.coords().iter() {
            for a in 0..dim {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        let dims = lo.iter().zip(&hi).map(|(l, h)| (h - l + 1) as usize).collect();
        Self::from_sparse(x, lo, dims)
    }
}

pub fn conv_dense_oracle(
    input: &DenseGrid,
    weights: &ConvWeights<f64>,
    kernel_size: u32,
    stride: u32,
) -> Result<DenseGrid> {
    let dim = input.dims.len();
    let offsets = enumerate_offsets(kernel_size as i64, dim)?;
    if weights.kernel_volume() != offsets.len() || weights.c_in() != input.channels {
        return Err(Error::InvalidSpec("weights do not match the grid".into()));
    }
    if stride == 0 {
        return Err(Error::InvalidSpec("stride must be positive".into()));
    }
    let s = stride as i64;
    let (d_lo, d_hi) = if offsets.is_centered() {
        (-((kernel_size as i64 - 1) / 2), (kernel_size as i64 - 1) / 2)
    } else {
        (0, kernel_size as i64 - 1)
    };
    let mut origin = Vec::with_capacity(dim);
    let mut dims = Vec::with_capacity(dim);
    for a in 0..dim {
        let first = input.origin[a] as i64;
        let last = first + input.dims[a] as i64 - 1;
        let lo = -((d_hi - first).div_euclid(s));
        let hi = (last - d_lo).div_euclid(s);
        origin.push(lo as i32);
        dims.push((hi - lo + 1).max(1) as usize);
    }
    let c_out = weights.c_out();
    let c_in = weights.c_in();
    let mut out = DenseGrid::zeros(origin, dims, c_out)?;
    let mut probe = vec![0i32; dim];
    for cell in 0..out.cell_count() {
        let i = out.cell_coord(cell);
        let mut acc = vec![0.0f64; c_out];
        for k in 0..offsets.len() {
            let d = offsets.offset(k);
            for a in 0..dim {
                probe[a] = stride as i32 * i[a] + d[a];
            }
            if let Some(xv) = input.get(&probe) {
                let wk = weights.offset_matrix(k);
                for ci in 0..c_in {
                    for co in 0..c_out {
                        acc[co] += xv[ci] * wk[ci * c_out + co];
                    }
                }
            }
        }
        out.data[cell * c_out..(cell + 1) * c_out].copy_from_slice(&acc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Coords;

    #[test]
    fn unit_kernel_identity() {
        let c = Coords::new(2, vec![0, 0, 0, 2, 1, 1]).unwrap();
        let x = SparseTensor::new(c, vec![1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0], 2, 1).unwrap();
        let grid = DenseGrid::bounding(&x).unwrap();
        let w = ConvWeights::new(1, 2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let out = conv_dense_oracle(&grid, &w, 1, 1).unwrap();
        assert_eq!(out, grid);
    }

    #[test]
    fn one_dimensional_hand_convolution() {
        // input [0, 1, 0] at cells 0..3, kernel [a, b, c] on offsets -1, 0, 1.
        let (a, b, c) = (2.0, 3.0, 5.0);
        let mut grid = DenseGrid::zeros(vec![0], vec![3], 1).unwrap();
        grid.get_mut(&[1]).unwrap()[0] = 1.0;
        let w = ConvWeights::new(3, 1, 1, vec![a, b, c]).unwrap();
        let out = conv_dense_oracle(&grid, &w, 3, 1).unwrap();
        assert_eq!(out.get(&[1]).unwrap(), &[b]);
        // out[0] reads in[1] through offset +1, out[2] through offset -1.
        assert_eq!(out.get(&[0]).unwrap(), &[c]);
        assert_eq!(out.get(&[2]).unwrap(), &[a]);
    }

    #[test]
    fn linearity() {
        let mut grid = DenseGrid::zeros(vec![0, 0], vec![4, 4], 2).unwrap();
        for (i, v) in grid.data.iter_mut().enumerate() {
            *v = (i as f64 * 0.37).sin();
        }
        let w = ConvWeights::new(9, 2, 3, (0..54).map(|i| (i as f64 * 0.11).cos()).collect()).unwrap();
        let alpha = -2.75;
        let mut scaled = grid.clone();
        scaled.data.iter_mut().for_each(|v| *v *= alpha);
        let base = conv_dense_oracle(&grid, &w, 3, 1).unwrap();
        let lhs = conv_dense_oracle(&scaled, &w, 3, 1).unwrap();
        for (l, b) in lhs.data.iter().zip(&base.data) {
            assert!((l - alpha * b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn strided_output_range_covers_reachable_cells() {
        let mut grid = DenseGrid::zeros(vec![-3], vec![6], 1).unwrap();
        grid.data.iter_mut().for_each(|v| *v = 1.0);
        let w = ConvWeights::new(2, 1, 1, vec![1.0, 1.0]).unwrap();
        let out = conv_dense_oracle(&grid, &w, 2, 2).unwrap();
        // inputs -3..=2 reach outputs floor(c/2): -2..=1
        assert_eq!(out.origin(), &[-2]);
        assert_eq!(out.dims(), &[4]);
        assert_eq!(out.get(&[-2]).unwrap(), &[1.0]);
        assert_eq!(out.get(&[0]).unwrap(), &[2.0]);
    }
}
