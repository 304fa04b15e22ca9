use std::fmt::Debug;

use crate::{Error, Result};

/// Highest spatial dimension supported by coordinate keys.
pub const MAX_DIM: usize = 4;

/// Feature storage type. Arithmetic inside the engine is always done in
/// `f64`; results are rounded to `Self` when stored.
pub trait Element: Copy + Default + Debug + PartialEq + Send + Sync + 'static {
    fn to_f64(self) -> f64;
    fn from_f64(v: f64) -> Self;
}

impl Element for f32 {
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

impl Element for f64 {
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) struct CoordKey(pub [i32; MAX_DIM]);

impl CoordKey {
    pub fn from_slice(c: &[i32]) -> Self {
        let mut k = [0; MAX_DIM];
        k[..c.len()].copy_from_slice(c);
        CoordKey(k)
    }
}

/// Row-major list of integer cell coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Coords {
    dim: usize,
    data: Vec<i32>,
}

impl Coords {
    pub fn new(dim: usize, data: Vec<i32>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidSpec(format!("dimension {dim} outside 1..={MAX_DIM}")));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidTensor(format!(
                "{} values is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(dim, Vec::new())
    }

    pub fn from_rows<'a>(dim: usize, rows: impl IntoIterator<Item = &'a [i32]>) -> Result<Self> {
        let mut data = Vec::new();
        for r in rows {
            if r.len() != dim {
                return Err(Error::InvalidTensor(format!(
                    "row of length {} in {dim}-d coords",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[i32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, i32> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[i32] {
        &self.data
    }

    pub(crate) fn key(&self, i: usize) -> CoordKey {
        CoordKey::from_slice(self.row(i))
    }

    pub fn is_sorted_unique(&self) -> bool {
        self.iter().zip(self.iter().skip(1)).all(|(a, b)| a < b)
    }

    /// Sorts rows lexicographically and removes duplicates.
    pub fn sorted_unique(&self) -> Self {
        let mut keys: Vec<CoordKey> = (0..self.len()).map(|i| self.key(i)).collect();
        keys.sort_unstable();
        keys.dedup();
        Self::from_keys(self.dim, &keys)
    }

    pub(crate) fn from_keys(dim: usize, keys: &[CoordKey]) -> Self {
        let mut data = Vec::with_capacity(keys.len() * dim);
        for k in keys {
            data.extend_from_slice(&k.0[..dim]);
        }
        Self { dim, data }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseTensor<T = f32> {
    coords: Coords,
    features: Vec<T>,
    channels: usize,
    stride: u32,
}

impl<T: Element> SparseTensor<T> {
    pub fn new(coords: Coords, features: Vec<T>, channels: usize, stride: u32) -> Result<Self> {
        if !coords.is_sorted_unique() {
            return Err(Error::InvalidTensor(
                "coordinates must be sorted and free of duplicates".into(),
            ));
        }
        if features.len() != coords.len() * channels {
            return Err(Error::InvalidTensor(format!(
                "{} feature values for {} rows of {channels} channels",
                features.len(),
                coords.len()
            )));
        }
        if stride == 0 {
            return Err(Error::InvalidTensor("stride must be positive".into()));
        }
        Ok(Self {
            coords,
            features,
            channels,
            stride,
        })
    }

    pub fn zeros(coords: Coords, channels: usize, stride: u32) -> Result<Self> {
        let n = coords.len() * channels;
        Self::new(coords, vec![T::default(); n], channels, stride)
    }

    pub fn coords(&self) -> &Coords {
        &self.coords
    }

    pub fn features(&self) -> &[T] {
        &self.features
    }

    pub fn features_mut(&mut self) -> &mut [T] {
        &mut self.features
    }

    pub fn into_features(self) -> Vec<T> {
        self.features
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn stride(&self) -> u32 {
        self.stride
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.features[i * self.channels..(i + 1) * self.channels]
    }

    pub fn features_f64(&self) -> Vec<f64> {
        self.features.iter().map(|v| v.to_f64()).collect()
    }

    pub fn map_features<U: Element>(&self, f: impl Fn(T) -> U) -> SparseTensor<U> {
        SparseTensor {
            coords: self.coords.clone(),
            features: self.features.iter().map(|&v| f(v)).collect(),
            channels: self.channels,
            stride: self.stride,
        }
    }
}

/// Geometry and channel widths of one convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub kernel_size: u32,
    pub dim: usize,
    pub stride: u32,
    pub c_in: usize,
    pub c_out: usize,
    /// Output coordinates equal input coordinates.
    pub submanifold: bool,
}

impl ConvSpec {
    pub fn submanifold(kernel_size: u32, dim: usize, c_in: usize, c_out: usize) -> Self {
        Self {
            kernel_size,
            dim,
            stride: 1,
            c_in,
            c_out,
            submanifold: true,
        }
    }

    pub fn generalized(kernel_size: u32, dim: usize, stride: u32, c_in: usize, c_out: usize) -> Self {
        Self {
            kernel_size,
            dim,
            stride,
            c_in,
            c_out,
            submanifold: false,
        }
    }

    pub fn kernel_volume(&self) -> usize {
        (self.kernel_size as usize).pow(self.dim as u32)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_size == 0 {
            return Err(Error::InvalidSpec("kernel size must be positive".into()));
        }
        if self.dim == 0 || self.dim > MAX_DIM {
            return Err(Error::InvalidSpec(format!(
                "dimension {} outside 1..={MAX_DIM}",
                self.dim
            )));
        }
        if self.stride == 0 {
            return Err(Error::InvalidSpec("stride must be positive".into()));
        }
        if self.submanifold && (self.stride != 1 || self.kernel_size.is_multiple_of(2)) {
            return Err(Error::InvalidSpec(
                "submanifold convolution needs stride 1 and an odd kernel".into(),
            ));
        }
        if self.c_in == 0 || self.c_out == 0 {
            return Err(Error::InvalidSpec("channel widths must be positive".into()));
        }
        Ok(())
    }
}

/// One `c_in x c_out` matrix per kernel offset, stored `[offset][c_in][c_out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights<T = f32> {
    kernel_volume: usize,
    c_in: usize,
    c_out: usize,
    data: Vec<T>,
}

impl<T: Element> ConvWeights<T> {
    pub fn new(kernel_volume: usize, c_in: usize, c_out: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != kernel_volume * c_in * c_out {
            return Err(Error::InvalidSpec(format!(
                "{} weights for {kernel_volume} x {c_in} x {c_out}",
                data.len()
            )));
        }
        Ok(Self {
            kernel_volume,
            c_in,
            c_out,
            data,
        })
    }

    pub fn zeros(kernel_volume: usize, c_in: usize, c_out: usize) -> Self {
        Self {
            kernel_volume,
            c_in,
            c_out,
            data: vec![T::default(); kernel_volume * c_in * c_out],
        }
    }

    pub fn for_spec(spec: &ConvSpec, data: Vec<T>) -> Result<Self> {
        Self::new(spec.kernel_volume(), spec.c_in, spec.c_out, data)
    }

    pub fn kernel_volume(&self) -> usize {
        self.kernel_volume
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn offset_matrix(&self, k: usize) -> &[T] {
        let n = self.c_in * self.c_out;
        &self.data[k * n..(k + 1) * n]
    }

    pub fn to_f64(&self) -> ConvWeights<f64> {
        ConvWeights {
            kernel_volume: self.kernel_volume,
            c_in: self.c_in,
            c_out: self.c_out,
            data: self.data.iter().map(|v| v.to_f64()).collect(),
        }
    }
}
