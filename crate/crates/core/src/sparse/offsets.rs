use super::tensor::Coords;
use crate::{Error, Result};

/// Kernel offsets in lexicographic order. Odd kernels are centred
/// (`-(K-1)/2 ..= (K-1)/2`), even kernels are non-negative (`0..K`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OffsetSet {
    kernel_size: u32,
    offsets: Coords,
}

impl OffsetSet {
    pub fn kernel_size(&self) -> u32 {
        self.kernel_size
    }

    pub fn dim(&self) -> usize {
        self.offsets.dim()
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn offset(&self, k: usize) -> &[i32] {
        self.offsets.row(k)
    }

    pub fn as_coords(&self) -> &Coords {
        &self.offsets
    }

    pub fn is_centered(&self) -> bool {
        self.kernel_size % 2 == 1
    }

    /// Index of `-offset(k)`; lexicographic order makes it the mirror index.
    pub fn negated_index(&self, k: usize) -> Option<usize> {
        self.is_centered().then(|| self.len() - 1 - k)
    }

    pub fn center_index(&self) -> Option<usize> {
        self.is_centered().then(|| self.len() / 2)
    }
}

pub fn enumerate_offsets(kernel_size: i64, dim: usize) -> Result<OffsetSet> {
    if kernel_size <= 0 {
        return Err(Error::InvalidSpec(format!(
            "kernel size must be positive, got {kernel_size}"
        )));
    }
    if dim == 0 {
        return Err(Error::InvalidSpec("dimension must be positive".into()));
    }
    let k = kernel_size as i32;
    let low = if k % 2 == 1 { -(k - 1) / 2 } else { 0 };
    let count = (k as usize).pow(dim as u32);
    let mut data = Vec::with_capacity(count * dim);
    for idx in 0..count {
        let mut rem = idx;
        let mut row = vec![0; dim];
        for axis in (0..dim).rev() {
            row[axis] = low + (rem % k as usize) as i32;
            rem /= k as usize;
        }
        data.extend(row);
    }
    Ok(OffsetSet {
        kernel_size: kernel_size as u32,
        offsets: Coords::new(dim, data)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let o = enumerate_offsets(1, 3).unwrap();
        assert_eq!(o.len(), 1);
        assert_eq!(o.offset(0), &[0, 0, 0]);

        let o = enumerate_offsets(3, 3).unwrap();
        assert_eq!(o.len(), 27);
        assert!(o.as_coords().as_flat().iter().all(|c| (-1..=1).contains(c)));
        assert_eq!(o.offset(13), &[0, 0, 0]);

        let o = enumerate_offsets(2, 3).unwrap();
        assert_eq!(o.len(), 8);
        assert!(o.as_coords().as_flat().iter().all(|c| (0..=1).contains(c)));

        assert!(enumerate_offsets(0, 3).is_err());
        assert!(enumerate_offsets(-1, 3).is_err());
    }

    #[test]
    fn lexicographic_unique_and_symmetric() {
        for k in 1..=5 {
            for dim in 1..=3 {
                let o = enumerate_offsets(k, dim).unwrap();
                assert_eq!(o.len(), (k as usize).pow(dim as u32));
                assert!(o.as_coords().is_sorted_unique());
                if let Some(center) = o.center_index() {
                    assert!(o.offset(center).iter().all(|&c| c == 0));
                    for i in 0..o.len() {
                        let neg: Vec<i32> = o.offset(i).iter().map(|c| -c).collect();
                        assert_eq!(o.offset(o.negated_index(i).unwrap()), &neg[..]);
                    }
                }
            }
        }
    }
}
