//! Four executions of one kernel map.
//!
//! | dataflow            | traversal                                     |
//! |---------------------|-----------------------------------------------|
//! | `gather-scatter`    | per offset: gather, dense multiply, scatter-add |
//! | `fetch-on-demand`   | per output: accumulate each neighbour directly |
//! | `grouped-symmetric` | offsets `d` and `-d` share one batched multiply |
//! | `implicit-sorted`   | outputs sorted by neighbour bitmask, grouped, padded |
//!
//! All products are accumulated in `f64` and rounded to the storage type
//! once per output element.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bitmask::{build_bitmasks, mask_bits};
use super::kernel_map::KernelMap;
use super::tensor::{ConvWeights, Element, SparseTensor};
use crate::{Error, Result};

pub const DEFAULT_GROUP_SIZE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dataflow {
    GatherScatter,
    FetchOnDemand,
    GroupedSymmetric,
    ImplicitSorted { group_size: usize },
}

impl Dataflow {
    /// Fixed ordering, also used to break autotuner ties.
    pub const ALL: [Dataflow; 4] = [
        Dataflow::GatherScatter,
        Dataflow::FetchOnDemand,
        Dataflow::GroupedSymmetric,
        Dataflow::ImplicitSorted {
            group_size: DEFAULT_GROUP_SIZE,
        },
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Dataflow::GatherScatter => "gather-scatter",
            Dataflow::FetchOnDemand => "fetch-on-demand",
            Dataflow::GroupedSymmetric => "grouped-symmetric",
            Dataflow::ImplicitSorted { .. } => "implicit-sorted",
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            Dataflow::GatherScatter => 0,
            Dataflow::FetchOnDemand => 1,
            Dataflow::GroupedSymmetric => 2,
            Dataflow::ImplicitSorted { .. } => 3,
        }
    }

    /// Whether the dataflow runs natively (without fallback) on `map`.
    pub fn applicable(&self, map: &KernelMap) -> bool {
        match self {
            Dataflow::GroupedSymmetric => symmetric_applicable(map),
            _ => true,
        }
    }
}

impl fmt::Display for Dataflow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dataflow::ImplicitSorted { group_size } if *group_size != DEFAULT_GROUP_SIZE => {
                write!(f, "implicit-sorted:{group_size}")
            }
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for Dataflow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let flow = match (name, arg) {
            ("gather-scatter", None) => Dataflow::GatherScatter,
            ("fetch-on-demand", None) => Dataflow::FetchOnDemand,
            ("grouped-symmetric", None) => Dataflow::GroupedSymmetric,
            ("implicit-sorted", arg) => {
                let group_size = match arg {
                    Some(a) => a
                        .parse()
                        .map_err(|_| Error::Config(format!("bad group size in {s:?}")))?,
                    None => DEFAULT_GROUP_SIZE,
                };
                Dataflow::ImplicitSorted { group_size }
            }
            _ => return Err(Error::Config(format!("unknown dataflow {s:?}"))),
        };
        Ok(flow)
    }
}

impl Serialize for Dataflow {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Dataflow {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExecMode {
    /// Single-threaded, bit-deterministic.
    #[default]
    Serial,
    /// Rayon data parallelism. Results stay bit-identical to `Serial`:
    /// partial products are merged in the serial order.
    Parallel,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvStats {
    /// Multiply-accumulates required by the map: `pairs * c_in * c_out`.
    pub macs: u64,
    /// Multiply-accumulates actually issued, including zero padding.
    pub padded_macs: u64,
    /// Padded MACs the implicit dataflow would issue without sorting.
    pub unsorted_padded_macs: Option<u64>,
    /// Feature values copied into gather buffers.
    pub gathered: u64,
    /// Partial-sum values written through scatter buffers.
    pub scattered: u64,
    /// Independent weight groups multiplied (offsets, offset pairs, or
    /// implicit groups).
    pub weight_groups: usize,
    /// The requested dataflow could not run and gather-scatter was used.
    pub fallback: bool,
}

fn check_inputs<T: Element>(x: &SparseTensor<T>, w: &ConvWeights<T>, map: &KernelMap) -> Result<()> {
    if x.channels() != w.c_in() {
        return Err(Error::InvalidSpec(format!(
            "input has {} channels, weights expect {}",
            x.channels(),
            w.c_in()
        )));
    }
    if w.kernel_volume() != map.offsets().len() {
        return Err(Error::InvalidSpec(format!(
            "{} weight matrices for {} kernel offsets",
            w.kernel_volume(),
            map.offsets().len()
        )));
    }
    if x.len() != map.in_count() {
        return Err(Error::InconsistentMap(format!(
            "tensor has {} rows, map expects {}",
            x.len(),
            map.in_count()
        )));
    }
    Ok(())
}

fn finish<T: Element>(x: &SparseTensor<T>, map: &KernelMap, c_out: usize, acc: Vec<f64>) -> Result<SparseTensor<T>> {
    SparseTensor::new(
        map.out_coords().clone(),
        acc.into_iter().map(T::from_f64).collect(),
        c_out,
        map.output_tensor_stride(x.stride()),
    )
}

/// `out[n x c_out] += a[n x c_in] * w[c_in x c_out]`.
#[inline]
fn gemm_acc(a: &[f64], w: &[f64], out: &mut [f64], c_in: usize, c_out: usize) {
    for (arow, orow) in a.chunks_exact(c_in).zip(out.chunks_exact_mut(c_out)) {
        for (ci, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let wrow = &w[ci * c_out..(ci + 1) * c_out];
            for (o, &wv) in orow.iter_mut().zip(wrow) {
                *o += av * wv;
            }
        }
    }
}

fn gather_rows<T: Element>(x: &SparseTensor<T>, rows: impl Iterator<Item = Option<u32>>, buf: &mut Vec<f64>) {
    let c = x.channels();
    buf.clear();
    for r in rows {
        match r {
            Some(r) => buf.extend(x.row(r as usize).iter().map(|v| v.to_f64())),
            None => buf.extend(std::iter::repeat_n(0.0, c)),
        }
    }
}

fn par_map<I, F, R>(items: Vec<I>, mode: ExecMode, f: F) -> Vec<R>
where
    I: Send,
    R: Send,
    F: Fn(I) -> R + Sync + Send,
{
    match mode {
        ExecMode::Serial => items.into_iter().map(f).collect(),
        ExecMode::Parallel => items.into_par_iter().map(f).collect(),
    }
}

pub fn conv_gather_scatter<T: Element>(
    x: &SparseTensor<T>,
    w: &ConvWeights<T>,
    map: &KernelMap,
) -> Result<(SparseTensor<T>, ConvStats)> {
    gather_scatter_impl(x, w, map, ExecMode::Serial)
}

fn gather_scatter_impl<T: Element>(
    x: &SparseTensor<T>,
    w: &ConvWeights<T>,
    map: &KernelMap,
    mode: ExecMode,
) -> Result<(SparseTensor<T>, ConvStats)> {
    check_inputs(x, w, map)?;
    let (c_in, c_out) = (w.c_in(), w.c_out());
    let w64 = w.to_f64();
    let products = par_map((0..map.offsets().len()).collect(), mode, |k| {
        let list = map.pairs(k);
        let mut buf = Vec::with_capacity(list.len() * c_in);
        gather_rows(x, list.iter().map(|p| Some(p.input)), &mut buf);
        let mut prod = vec![0.0; list.len() * c_out];
        gemm_acc(&buf, w64.offset_matrix(k), &mut prod, c_in, c_out);
        prod
    });
    let mut acc = vec![0.0; map.out_count() * c_out];
    let mut stats = ConvStats {
        weight_groups: map.offsets().len(),
        ..ConvStats::default()
    };
    for (k, prod) in products.iter().enumerate() {
        let list = map.pairs(k);
        for (p, row) in list.iter().zip(prod.chunks_exact(c_out)) {
            let dst = &mut acc[p.output as usize * c_out..(p.output as usize + 1) * c_out];
            for (d, v) in dst.iter_mut().zip(row) {
                *d += v;
            }
        }
        let n = list.len() as u64;
        stats.macs += n * (c_in * c_out) as u64;
        stats.gathered += n * c_in as u64;
        stats.scattered += n * c_out as u64;
    }
    stats.padded_macs = stats.macs;
    Ok((finish(x, map, c_out, acc)?, stats))
}

pub fn conv_fetch_on_demand<T: Element>(
    x: &SparseTensor<T>,
    w: &ConvWeights<T>,
    map: &KernelMap,
) -> Result<(SparseTensor<T>, ConvStats)> {
    fetch_on_demand_impl(x, w, map, ExecMode::Serial)
}

const FETCH_CHUNK: usize = 256;

fn fetch_on_demand_impl<T: Element>(
    x: &SparseTensor<T>,
    w: &ConvWeights<T>,
    map: &KernelMap,
    mode: ExecMode,
) -> Result<(SparseTensor<T>, ConvStats)> {
    check_inputs(x, w, map)?;
    let (c_in, c_out) = (w.c_in(), w.c_out());
    let w64 = w.to_f64();
    let (starts, entries) = map.output_adjacency();
    let out_count = map.out_count();
    let chunks: Vec<usize> = (0..out_count.div_ceil(FETCH_CHUNK)).collect();
    let parts = par_map(chunks, mode, |chunk| {
        let lo = chunk * FETCH_CHUNK;
        let hi = (lo + FETCH_CHUNK).min(out_count);
        let mut acc = vec![0.0; (hi - lo) * c_out];
        for out in lo..hi {
            let dst = &mut acc[(out - lo) * c_out..(out - lo + 1) * c_out];
            for &(k, input) in &entries[starts[out]..starts[out + 1]] {
                let wk = w64.offset_matrix(k as usize);
                for (ci, xv) in x.row(input as usize).iter().enumerate() {
                    let xv = xv.to_f64();
                    for (d, wv) in dst.iter_mut().zip(&wk[ci * c_out..(ci + 1) * c_out]) {
                        *d += xv * wv;
                    }
                }
            }
        }
        acc
    });
    let acc: Vec<f64> = parts.into_iter().flatten().collect();
    let macs = (entries.len() * c_in * c_out) as u64;
    let stats = ConvStats {
        macs,
        padded_macs: macs,
        weight_groups: map.offsets().len(),
        ..ConvStats::default()
    };
    Ok((finish(x, map, c_out, acc)?, stats))
}

fn symmetric_applicable(map: &KernelMap) -> bool {
    !map.is_transposed() && map.stride() == 1 && map.offsets().is_centered()
}

pub fn conv_grouped_symmetric<T: Element>(
    x: &SparseTensor<T>,
    w: &ConvWeights<T>,
    map: &KernelMap,
) -> Result<(SparseTensor<T>, ConvStats)> {
    grouped_symmetric_impl(x, w, map, ExecMode::Serial)
}

fn grouped_symmetric_impl<T: Element>(
    x: &SparseTensor<T>,
    w: &ConvWeights<T>,
    map: &KernelMap,
    mode: ExecMode,
) -> Result<(SparseTensor<T>, ConvStats)> {
    if !symmetric_applicable(map) {
        let (out, mut stats) = gather_scatter_impl(x, w, map, mode)?;
        stats.fallback = true;
        return Ok((out, stats));
    }
    check_inputs(x, w, map)?;
    let (c_in, c_out) = (w.c_in(), w.c_out());
    let w64 = w.to_f64();
    let offsets = map.offsets();
    let center = offsets.center_index().expect("centered kernel");
    // Group g < center pairs offset g with its negation; the centre is alone.
    let groups: Vec<Vec<usize>> = (0..center)
        .map(|k| vec![k, offsets.negated_index(k).expect("centered kernel")])
        .chain(std::iter::once(vec![center]))
        .collect();

    let products = par_map(groups.clone(), mode, |members| {
        // One shared row count per group; the shorter list is zero-padded.
        let rows = members.iter().map(|&k| map.pairs(k).len()).max().unwrap_or(0);
        let mut stacked = Vec::with_capacity(members.len() * rows * c_in);
        let mut buf = Vec::new();
        for &k in &members {
            let list = map.pairs(k);
            gather_rows(
                x,
                list.iter()
                    .map(|p| Some(p.input))
                    .chain(std::iter::repeat_n(None, rows - list.len())),
                &mut buf,
            );
            stacked.extend_from_slice(&buf);
        }
        let mut prod = vec![0.0; members.len() * rows * c_out];
        for (b, &k) in members.iter().enumerate() {
            gemm_acc(
                &stacked[b * rows * c_in..(b + 1) * rows * c_in],
                w64.offset_matrix(k),
                &mut prod[b * rows * c_out..(b + 1) * rows * c_out],
                c_in,
                c_out,
            );
        }
        (rows, prod)
    });

    let mut acc = vec![0.0; map.out_count() * c_out];
    let mut stats = ConvStats {
        weight_groups: groups.len(),
        ..ConvStats::default()
    };
    for (members, (rows, prod)) in groups.iter().zip(&products) {
        for (b, &k) in members.iter().enumerate() {
            let list = map.pairs(k);
            let block = &prod[b * rows * c_out..(b + 1) * rows * c_out];
            for (p, row) in list.iter().zip(block.chunks_exact(c_out)) {
                let dst = &mut acc[p.output as usize * c_out..(p.output as usize + 1) * c_out];
                for (d, v) in dst.iter_mut().zip(row) {
                    *d += v;
                }
            }
            stats.macs += (list.len() * c_in * c_out) as u64;
            stats.gathered += (rows * c_in) as u64;
            stats.scattered += (list.len() * c_out) as u64;
        }
        stats.padded_macs += (members.len() * rows * c_in * c_out) as u64;
    }
    Ok((finish(x, map, c_out, acc)?, stats))
}

fn padded_macs_for_order(masks: &super::NeighborBitmasks, order: &[usize], group_size: usize, per_mac: u64) -> u64 {
    order
        .chunks(group_size)
        .map(|g| {
            let union = masks.union(g.iter().copied());
            let bits: u64 = union.iter().map(|w| w.count_ones() as u64).sum();
            g.len() as u64 * bits * per_mac
        })
        .sum()
}

pub fn conv_implicit_sorted<T: Element>(
    x: &SparseTensor<T>,
    w: &ConvWeights<T>,
    map: &KernelMap,
    group_size: usize,
) -> Result<(SparseTensor<T>, ConvStats)> {
    implicit_sorted_impl(x, w, map, group_size, ExecMode::Serial)
}

fn implicit_sorted_impl<T: Element>(
    x: &SparseTensor<T>,
    w: &ConvWeights<T>,
    map: &KernelMap,
    group_size: usize,
    mode: ExecMode,
) -> Result<(SparseTensor<T>, ConvStats)> {
    if group_size < 1 {
        return Err(Error::InvalidSpec("group size must be at least 1".into()));
    }
    check_inputs(x, w, map)?;
    let (c_in, c_out) = (w.c_in(), w.c_out());
    let kv = map.offsets().len();
    let w64 = w.to_f64();
    let masks = build_bitmasks(map, map.out_count(), map.offsets().kernel_size(), map.offsets().dim())?;
    let table = map.neighbor_table();
    let order = masks.sorted_order();
    let groups: Vec<&[usize]> = order.chunks(group_size).collect();

    let tiles = par_map(groups.clone(), mode, |group| {
        let union = masks.union(group.iter().copied());
        let mut acc = vec![0.0; group.len() * c_out];
        let mut tile = Vec::with_capacity(group.len() * c_in);
        let mut issued = 0u64;
        for k in mask_bits(&union) {
            gather_rows(
                x,
                group.iter().map(|&out| {
                    let input = table[out * kv + k];
                    (input != u32::MAX).then_some(input)
                }),
                &mut tile,
            );
            gemm_acc(&tile, w64.offset_matrix(k), &mut acc, c_in, c_out);
            issued += (group.len() * c_in * c_out) as u64;
        }
        (acc, issued)
    });

    let mut acc = vec![0.0; map.out_count() * c_out];
    let mut stats = ConvStats {
        macs: (map.total_pairs() * c_in * c_out) as u64,
        weight_groups: groups.len(),
        ..ConvStats::default()
    };
    for (group, (tile, issued)) in groups.iter().zip(tiles) {
        for (&out, row) in group.iter().zip(tile.chunks_exact(c_out)) {
            acc[out * c_out..(out + 1) * c_out].copy_from_slice(row);
        }
        stats.padded_macs += issued;
    }
    let identity: Vec<usize> = (0..map.out_count()).collect();
    stats.unsorted_padded_macs = Some(padded_macs_for_order(
        &masks,
        &identity,
        group_size,
        (c_in * c_out) as u64,
    ));
    Ok((finish(x, map, c_out, acc)?, stats))
}

/// Runs `dataflow` on `map`.
pub fn conv<T: Element>(
    x: &SparseTensor<T>,
    w: &ConvWeights<T>,
    map: &KernelMap,
    dataflow: Dataflow,
    mode: ExecMode,
) -> Result<(SparseTensor<T>, ConvStats)> {
    match dataflow {
        Dataflow::GatherScatter => gather_scatter_impl(x, w, map, mode),
        Dataflow::FetchOnDemand => fetch_on_demand_impl(x, w, map, mode),
        Dataflow::GroupedSymmetric => grouped_symmetric_impl(x, w, map, mode),
        Dataflow::ImplicitSorted { group_size } => implicit_sorted_impl(x, w, map, group_size, mode),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{build_kernel_map, output_coords, ConvSpec, Coords};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(
        seed: u64,
        spec: ConvSpec,
        n: usize,
        grid: i32,
    ) -> (SparseTensor<f32>, ConvWeights<f32>, KernelMap) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::new();
        for _ in 0..n {
            for _ in 0..spec.dim {
                data.push(rng.gen_range(0..grid));
            }
        }
        let coords = Coords::new(spec.dim, data).unwrap().sorted_unique();
        let feats = (0..coords.len() * spec.c_in)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let x = SparseTensor::new(coords.clone(), feats, spec.c_in, 1).unwrap();
        let w = ConvWeights::for_spec(
            &spec,
            (0..spec.kernel_volume() * spec.c_in * spec.c_out)
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect(),
        )
        .unwrap();
        let out = output_coords(&coords, &spec).unwrap();
        let map = build_kernel_map(&coords, &out, &spec).unwrap();
        (x, w, map)
    }

    #[test]
    fn unit_kernel_identity_weights() {
        let spec = ConvSpec::submanifold(1, 3, 3, 3);
        let (x, _, map) = random_instance(1, spec, 20, 6);
        let mut eye = vec![0.0f32; 9];
        for i in 0..3 {
            eye[i * 3 + i] = 1.0;
        }
        let w = ConvWeights::for_spec(&spec, eye).unwrap();
        for flow in Dataflow::ALL {
            let (y, _) = conv(&x, &w, &map, flow, ExecMode::Serial).unwrap();
            assert_eq!(y.features(), x.features(), "{flow}");
        }
    }

    #[test]
    fn zero_features_give_zero_output() {
        let spec = ConvSpec::submanifold(3, 3, 2, 4);
        let (x, w, map) = random_instance(2, spec, 30, 5);
        let x = x.map_features(|_| 0.0f32);
        for flow in Dataflow::ALL {
            let (y, _) = conv(&x, &w, &map, flow, ExecMode::Serial).unwrap();
            assert!(y.features().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn empty_tensor() {
        let spec = ConvSpec::submanifold(3, 3, 2, 2);
        let c = Coords::empty(3).unwrap();
        let x = SparseTensor::<f32>::zeros(c.clone(), 2, 1).unwrap();
        let map = build_kernel_map(&c, &c, &spec).unwrap();
        let w = ConvWeights::zeros(27, 2, 2);
        for flow in Dataflow::ALL {
            let (y, _) = conv(&x, &w, &map, flow, ExecMode::Serial).unwrap();
            assert!(y.is_empty());
        }
    }

    #[test]
    fn dataflows_agree_and_parallel_is_bit_identical() {
        let cases = [
            ConvSpec::submanifold(3, 3, 4, 5),
            ConvSpec::submanifold(5, 3, 2, 3),
            ConvSpec::generalized(2, 3, 2, 3, 4),
            ConvSpec::generalized(3, 3, 2, 3, 2),
            ConvSpec::generalized(3, 3, 1, 2, 2),
        ];
        for (i, spec) in cases.into_iter().enumerate() {
            let (x, w, map) = random_instance(10 + i as u64, spec, 300, 10);
            let (reference, _) = conv_gather_scatter(&x, &w, &map).unwrap();
            for flow in Dataflow::ALL {
                let (serial, _) = conv(&x, &w, &map, flow, ExecMode::Serial).unwrap();
                let (parallel, _) = conv(&x, &w, &map, flow, ExecMode::Parallel).unwrap();
                assert_eq!(serial, parallel, "{flow} parallel differs");
                assert_eq!(serial.coords(), reference.coords());
                let err = crate::sparse::relative_error(&serial.features_f64(), &reference.features_f64());
                assert!(err <= 1e-6, "{flow} {spec:?} err {err}");
            }
        }
    }

    #[test]
    fn single_neighbor_output_is_exact() {
        let spec = ConvSpec::submanifold(3, 3, 2, 2);
        let c = Coords::new(3, vec![0, 0, 0]).unwrap();
        let x = SparseTensor::new(c.clone(), vec![0.3f32, -1.7], 2, 1).unwrap();
        let w = ConvWeights::for_spec(&spec, (0..27 * 4).map(|i| i as f32 * 0.01).collect()).unwrap();
        let map = build_kernel_map(&c, &c, &spec).unwrap();
        let (a, _) = conv_gather_scatter(&x, &w, &map).unwrap();
        let (b, _) = conv_fetch_on_demand(&x, &w, &map).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grouped_counts_and_fallback() {
        let spec = ConvSpec::submanifold(3, 3, 2, 2);
        let (x, w, map) = random_instance(4, spec, 50, 6);
        let (_, stats) = conv_grouped_symmetric(&x, &w, &map).unwrap();
        assert_eq!(stats.weight_groups, 14);
        assert!(!stats.fallback);
        assert_eq!(stats.padded_macs, stats.macs);

        let strided = ConvSpec::generalized(3, 3, 2, 2, 2);
        let (x, w, map) = random_instance(5, strided, 50, 6);
        let (y, stats) = conv_grouped_symmetric(&x, &w, &map).unwrap();
        assert!(stats.fallback);
        let (reference, _) = conv_gather_scatter(&x, &w, &map).unwrap();
        assert_eq!(y, reference);
    }

    #[test]
    fn implicit_padding_accounting() {
        // A full 4x4x4 block: interior and boundary masks differ.
        let spec = ConvSpec::submanifold(3, 3, 2, 3);
        let (x, w, map) = random_instance(6, spec, 200, 5);
        let (_, stats) = conv_implicit_sorted(&x, &w, &map, 8).unwrap();
        assert!(stats.padded_macs >= stats.macs);
        assert!(stats.padded_macs <= stats.unsorted_padded_macs.unwrap());
        assert!(matches!(
            conv_implicit_sorted(&x, &w, &map, 0),
            Err(Error::InvalidSpec(_))
        ));

        // Isolated points share the centre-only mask: no padding waste.
        let c = Coords::new(3, vec![0, 0, 0, 10, 0, 0, 20, 0, 0]).unwrap();
        let x = SparseTensor::new(c.clone(), vec![1.0f32; 6], 2, 1).unwrap();
        let map = build_kernel_map(&c, &c, &spec).unwrap();
        let (_, stats) = conv_implicit_sorted(&x, &w, &map, 32).unwrap();
        assert_eq!(stats.padded_macs, stats.macs);
    }

    #[test]
    fn sorting_can_lose_to_row_order() {
        // Masks {4}, {4, 8}, {0, 4}. Row order pairs the first two (2 bits x 2
        // rows + 1 x 1 = 6); descending order pairs {4, 8} with {0, 4}
        // (3 x 2 + 1 x 1 = 7).
        let c = Coords::new(2, vec![0, 0, 2, 0, 3, 1]).unwrap();
        let spec = ConvSpec::submanifold(3, 2, 1, 1);
        let map = build_kernel_map(&c, &c, &spec).unwrap();
        let x = SparseTensor::new(c, vec![1.0f64, 2.0, 3.0], 1, 1).unwrap();
        let w = ConvWeights::new(9, 1, 1, (1..=9).map(f64::from).collect()).unwrap();
        let (y, stats) = conv_implicit_sorted(&x, &w, &map, 2).unwrap();
        assert_eq!(stats.padded_macs, 7);
        assert_eq!(stats.unsorted_padded_macs, Some(6));
        assert_eq!(y, conv_gather_scatter(&x, &w, &map).unwrap().0);
    }

    #[test]
    fn channel_mismatch_is_invalid_spec() {
        let spec = ConvSpec::submanifold(3, 3, 2, 2);
        let (x, _, map) = random_instance(7, spec, 10, 4);
        let w = ConvWeights::<f32>::zeros(27, 3, 2);
        for flow in Dataflow::ALL {
            assert!(matches!(
                conv(&x, &w, &map, flow, ExecMode::Serial),
                Err(Error::InvalidSpec(_))
            ));
        }
    }

    #[test]
    fn dataflow_names_parse() {
        for flow in Dataflow::ALL {
            assert_eq!(flow.to_string().parse::<Dataflow>().unwrap(), flow);
        }
        assert_eq!(
            "implicit-sorted:8".parse::<Dataflow>().unwrap(),
            Dataflow::ImplicitSorted { group_size: 8 }
        );
        assert!("winograd".parse::<Dataflow>().is_err());
    }
}
