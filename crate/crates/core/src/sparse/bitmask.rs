use std::cmp::Ordering;

use super::kernel_map::KernelMap;
use crate::{Error, Result};

/// One `kernel_volume`-bit mask per output row; bit `b` is set iff the
/// neighbour at offset `b` exists. Masks are stored as little-endian `u64`
/// words so they compare as unsigned integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborBitmasks {
    bits: usize,
    words: usize,
    data: Vec<u64>,
}

impl NeighborBitmasks {
    pub fn zeros(count: usize, bits: usize) -> Self {
        let words = bits.div_ceil(64).max(1);
        Self {
            bits,
            words,
            data: vec![0; count * words],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.words
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn mask(&self, i: usize) -> &[u64] {
        &self.data[i * self.words..(i + 1) * self.words]
    }

    pub fn set(&mut self, i: usize, bit: usize) {
        self.data[i * self.words + bit / 64] |= 1u64 << (bit % 64);
    }

    pub fn is_set(&self, i: usize, bit: usize) -> bool {
        self.mask(i)[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn popcount(&self, i: usize) -> u32 {
        self.mask(i).iter().map(|w| w.count_ones()).sum()
    }

    /// Numeric comparison of two masks.
    pub fn compare(&self, a: usize, b: usize) -> Ordering {
        let (ma, mb) = (self.mask(a), self.mask(b));
        for w in (0..self.words).rev() {
            match ma[w].cmp(&mb[w]) {
                Ordering::Equal => continue,
                other => return other,
            }
        }
        Ordering::Equal
    }

    /// Bitwise OR of the masks of `rows`.
    pub fn union(&self, rows: impl IntoIterator<Item = usize>) -> Vec<u64> {
        let mut acc = vec![0u64; self.words];
        for r in rows {
            for (a, m) in acc.iter_mut().zip(self.mask(r)) {
                *a |= m;
            }
        }
        acc
    }

    /// Output rows ordered by mask value, largest first; ties keep row order.
    pub fn sorted_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.compare(b, a).then(a.cmp(&b)));
        order
    }
}

pub(crate) fn mask_bits(mask: &[u64]) -> impl Iterator<Item = usize> + '_ {
    mask.iter()
        .enumerate()
        .flat_map(|(w, &word)| (0..64).filter(move |b| word >> b & 1 == 1).map(move |b| w * 64 + b))
}

pub fn build_bitmasks(map: &KernelMap, out_count: usize, kernel_size: u32, dim: usize) -> Result<NeighborBitmasks> {
    let bits = (kernel_size as usize).pow(dim as u32);
    if bits != map.offsets().len() || out_count != map.out_count() {
        return Err(Error::InconsistentMap(format!(
            "bitmask geometry {out_count} x {bits} does not match map {} x {}",
            map.out_count(),
            map.offsets().len()
        )));
    }
    let mut masks = NeighborBitmasks::zeros(out_count, bits);
    for (k, list) in map.all_pairs().iter().enumerate() {
        for p in list {
            masks.set(p.output as usize, k);
        }
    }
    Ok(masks)
}
