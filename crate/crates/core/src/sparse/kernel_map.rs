use std::collections::{HashMap, HashSet};

use super::offsets::{enumerate_offsets, OffsetSet};
use super::tensor::{ConvSpec, CoordKey, Coords};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MapPair {
    pub input: u32,
    pub output: u32,
}

/// Per-offset `(input row, output row)` pairs plus the output coordinates the
/// map was built against.
///
/// A pair is present at offset `d` iff `in[input] == stride * out[output] + d`.
/// A transposed map swaps the roles of the two sides; it drives the
/// coordinate-restoring upsampling in the segmentor.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMap {
    offsets: OffsetSet,
    stride: u32,
    transposed: bool,
    in_count: usize,
    out_coords: Coords,
    pairs: Vec<Vec<MapPair>>,
}

impl KernelMap {
    pub fn offsets(&self) -> &OffsetSet {
        &self.offsets
    }

    pub fn stride(&self) -> u32 {
        self.stride
    }

    pub fn is_transposed(&self) -> bool {
        self.transposed
    }

    pub fn in_count(&self) -> usize {
        self.in_count
    }

    pub fn out_count(&self) -> usize {
        self.out_coords.len()
    }

    pub fn out_coords(&self) -> &Coords {
        &self.out_coords
    }

    pub fn pairs(&self, k: usize) -> &[MapPair] {
        &self.pairs[k]
    }

    pub fn all_pairs(&self) -> &[Vec<MapPair>] {
        &self.pairs
    }

    pub fn total_pairs(&self) -> usize {
        self.pairs.iter().map(Vec::len).sum()
    }

    /// Tensor stride of the output given the input tensor stride.
    pub fn output_tensor_stride(&self, input_stride: u32) -> u32 {
        if self.transposed {
            (input_stride / self.stride).max(1)
        } else {
            input_stride * self.stride
        }
    }

    /// The map of the transposed convolution: outputs become inputs.
    /// `in_coords` are the coordinates this map was built from.
    pub fn transpose(&self, in_coords: &Coords) -> Result<KernelMap> {
        if in_coords.len() != self.in_count {
            return Err(Error::InconsistentMap(format!(
                "{} coords for a map with {} inputs",
                in_coords.len(),
                self.in_count
            )));
        }
        let pairs = self
            .pairs
            .iter()
            .map(|list| {
                let mut swapped: Vec<MapPair> = list
                    .iter()
                    .map(|p| MapPair {
                        input: p.output,
                        output: p.input,
                    })
                    .collect();
                swapped.sort_unstable_by_key(|p| (p.output, p.input));
                swapped
            })
            .collect();
        Ok(KernelMap {
            offsets: self.offsets.clone(),
            stride: self.stride,
            transposed: !self.transposed,
            in_count: self.out_count(),
            out_coords: in_coords.clone(),
            pairs,
        })
    }

    /// Per-output adjacency `(offset index, input row)` in offset order.
    pub fn output_adjacency(&self) -> (Vec<usize>, Vec<(u32, u32)>) {
        let mut counts = vec![0usize; self.out_count() + 1];
        for list in &self.pairs {
            for p in list {
                counts[p.output as usize + 1] += 1;
            }
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut cursor = counts.clone();
        let mut entries = vec![(0u32, 0u32); self.total_pairs()];
        for (k, list) in self.pairs.iter().enumerate() {
            for p in list {
                let slot = &mut cursor[p.output as usize];
                entries[*slot] = (k as u32, p.input);
                *slot += 1;
            }
        }
        (counts, entries)
    }

    /// Dense `out_count x kernel_volume` table of input rows (`u32::MAX` when
    /// absent).
    pub fn neighbor_table(&self) -> Vec<u32> {
        let kv = self.offsets.len();
        let mut table = vec![u32::MAX; self.out_count() * kv];
        for (k, list) in self.pairs.iter().enumerate() {
            for p in list {
                table[p.output as usize * kv + k] = p.input;
            }
        }
        table
    }
}

/// Output coordinates of a convolution.
///
/// Submanifold: the input coordinates. Otherwise every `c_out` with
/// `c_in - d == stride * c_out` for some input `c_in` and offset `d`,
/// deduplicated and sorted.
pub fn output_coords(in_coords: &Coords, spec: &ConvSpec) -> Result<Coords> {
    spec.validate()?;
    if in_coords.dim() != spec.dim {
        return Err(Error::InvalidSpec(format!(
            "{}-d coords for a {}-d convolution",
            in_coords.dim(),
            spec.dim
        )));
    }
    if spec.submanifold {
        return Ok(in_coords.sorted_unique());
    }
    let offsets = enumerate_offsets(spec.kernel_size as i64, spec.dim)?;
    let s = spec.stride as i32;
    let mut keys = HashSet::new();
    let mut candidate = [0i32; super::MAX_DIM];
    for c in in_coords.iter() {
        'offset: for k in 0..offsets.len() {
            let d = offsets.offset(k);
            for axis in 0..spec.dim {
                let diff = c[axis] - d[axis];
                if diff.rem_euclid(s) != 0 {
                    continue 'offset;
                }
                candidate[axis] = diff.div_euclid(s);
            }
            keys.insert(CoordKey(candidate));
        }
    }
    let mut keys: Vec<CoordKey> = keys.into_iter().collect();
    keys.sort_unstable();
    Ok(Coords::from_keys(spec.dim, &keys))
}

pub fn build_kernel_map(in_coords: &Coords, out_coords: &Coords, spec: &ConvSpec) -> Result<KernelMap> {
    spec.validate()?;
    if in_coords.dim() != spec.dim || out_coords.dim() != spec.dim {
        return Err(Error::InvalidSpec(format!(
            "coords of dimension {}/{} for a {}-d convolution",
            in_coords.dim(),
            out_coords.dim(),
            spec.dim
        )));
    }
    let mut lookup: HashMap<CoordKey, u32> = HashMap::with_capacity(in_coords.len());
    for i in 0..in_coords.len() {
        if lookup.insert(in_coords.key(i), i as u32).is_some() {
            return Err(Error::InvalidTensor(format!(
                "duplicate input coordinate {:?}",
                in_coords.row(i)
            )));
        }
    }
    let mut seen = HashSet::with_capacity(out_coords.len());
    for i in 0..out_coords.len() {
        if !seen.insert(out_coords.key(i)) {
            return Err(Error::InvalidTensor(format!(
                "duplicate output coordinate {:?}",
                out_coords.row(i)
            )));
        }
    }

    let offsets = enumerate_offsets(spec.kernel_size as i64, spec.dim)?;
    let s = spec.stride as i32;
    let mut pairs = vec![Vec::new(); offsets.len()];
    let mut query = [0i32; super::MAX_DIM];
    for out_row in 0..out_coords.len() {
        let base = out_coords.row(out_row);
        for (k, list) in pairs.iter_mut().enumerate() {
            let d = offsets.offset(k);
            for axis in 0..spec.dim {
                query[axis] = s * base[axis] + d[axis];
            }
            if let Some(&input) = lookup.get(&CoordKey(query)) {
                list.push(MapPair {
                    input,
                    output: out_row as u32,
                });
            }
        }
    }
    Ok(KernelMap {
        offsets,
        stride: spec.stride,
        transposed: false,
        in_count: in_coords.len(),
        out_coords: out_coords.clone(),
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn coords(rows: &[[i32; 3]]) -> Coords {
        Coords::from_rows(3, rows.iter().map(|r| &r[..])).unwrap()
    }

    #[test]
    fn submanifold_output_coords_are_input_coords() {
        let c = coords(&[[0, 0, 0], [1, 2, 3], [5, 5, 5]]);
        let out = output_coords(&c, &ConvSpec::submanifold(3, 3, 1, 1)).unwrap();
        assert_eq!(out, c);
    }

    #[test]
    fn strided_output_coords() {
        let spec = ConvSpec::generalized(2, 3, 2, 1, 1);
        let out = output_coords(&coords(&[[0, 0, 0]]), &spec).unwrap();
        assert_eq!(out, coords(&[[0, 0, 0]]));
        // (1,1,1) - d is even only for d = (1,1,1), landing on (0,0,0) again.
        let out = output_coords(&coords(&[[0, 0, 0], [1, 1, 1]]), &spec).unwrap();
        assert_eq!(out, coords(&[[0, 0, 0]]));
        // Negative coordinates floor towards -inf.
        let out = output_coords(&coords(&[[-1, -3, 2]]), &spec).unwrap();
        assert_eq!(out, coords(&[[-1, -2, 1]]));
    }

    #[test]
    fn unit_kernel_is_identity_pairing() {
        let c = coords(&[[0, 0, 0], [1, 0, 0], [4, 4, 4]]);
        let map = build_kernel_map(&c, &c, &ConvSpec::submanifold(1, 3, 1, 1)).unwrap();
        assert_eq!(map.offsets().len(), 1);
        let expect: Vec<MapPair> = (0..3).map(|i| MapPair { input: i, output: i }).collect();
        assert_eq!(map.pairs(0), &expect[..]);
    }

    #[test]
    fn two_neighbours_k3() {
        let c = coords(&[[0, 0, 0], [1, 0, 0]]);
        let map = build_kernel_map(&c, &c, &ConvSpec::submanifold(3, 3, 1, 1)).unwrap();
        assert_eq!(map.total_pairs(), 4);
        let plus_x = (0..27).find(|&k| map.offsets().offset(k) == [1, 0, 0]).unwrap();
        let minus_x = (0..27).find(|&k| map.offsets().offset(k) == [-1, 0, 0]).unwrap();
        assert_eq!(map.pairs(plus_x), &[MapPair { input: 1, output: 0 }]);
        assert_eq!(map.pairs(minus_x), &[MapPair { input: 0, output: 1 }]);
        assert_eq!(map.pairs(13).len(), 2);
    }

    #[test]
    fn duplicates_rejected() {
        let dup = coords(&[[0, 0, 0], [0, 0, 0]]);
        let ok = coords(&[[0, 0, 0]]);
        let spec = ConvSpec::submanifold(3, 3, 1, 1);
        assert!(matches!(
            build_kernel_map(&dup, &ok, &spec),
            Err(Error::InvalidTensor(_))
        ));
        assert!(matches!(
            build_kernel_map(&ok, &dup, &spec),
            Err(Error::InvalidTensor(_))
        ));
    }

    #[test]
    fn symmetric_offsets_have_equal_pair_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in [3, 5] {
            let rows: Vec<[i32; 3]> = (0..200)
                .map(|_| [rng.gen_range(0..10), rng.gen_range(0..10), rng.gen_range(0..10)])
                .collect();
            let c = coords(&rows).sorted_unique();
            let map = build_kernel_map(&c, &c, &ConvSpec::submanifold(k, 3, 1, 1)).unwrap();
            for i in 0..map.offsets().len() {
                let j = map.offsets().negated_index(i).unwrap();
                assert_eq!(map.pairs(i).len(), map.pairs(j).len());
            }
        }
    }

    #[test]
    fn pairs_are_ordered_and_transpose_round_trips() {
        let c = coords(&[[0, 0, 0], [1, 1, 1], [2, 3, 1], [3, 3, 3]]);
        let spec = ConvSpec::generalized(2, 3, 2, 1, 1);
        let out = output_coords(&c, &spec).unwrap();
        let map = build_kernel_map(&c, &out, &spec).unwrap();
        for list in map.all_pairs() {
            assert!(list
                .windows(2)
                .all(|w| (w[0].output, w[0].input) < (w[1].output, w[1].input)));
        }
        let t = map.transpose(&c).unwrap();
        assert!(t.is_transposed());
        assert_eq!(t.out_count(), c.len());
        assert_eq!(t.in_count(), out.len());
        assert_eq!(t.transpose(&out).unwrap(), map);
    }
}
