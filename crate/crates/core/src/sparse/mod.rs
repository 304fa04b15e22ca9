//! Sparse convolution engine.
//!
//! A convolution is fully determined by its [`KernelMap`]: for every kernel
//! offset the list of `(input row, output row)` pairs whose coordinates
//! satisfy `input = stride * output + offset`. The four dataflows in
//! [`dataflow`] execute the same map with different traversal orders and
//! grouping, and must agree with each other and with the dense reference in
//! [`oracle`].

pub mod autotune;
pub mod backward;
pub mod bitmask;
pub mod dataflow;
pub mod kernel_map;
pub mod offsets;
pub mod oracle;
pub mod tensor;

pub use autotune::{autotune, median, time_median, AutotuneReport, TimingEntry};
pub use backward::{conv_backward, conv_backward_raw};
pub use bitmask::{build_bitmasks, NeighborBitmasks};
pub use dataflow::{
    conv, conv_fetch_on_demand, conv_gather_scatter, conv_grouped_symmetric, conv_implicit_sorted, ConvStats, Dataflow,
    ExecMode,
};
pub use kernel_map::{build_kernel_map, output_coords, KernelMap, MapPair};
pub use offsets::{enumerate_offsets, OffsetSet};
pub use oracle::{conv_dense_oracle, DenseGrid};
pub use tensor::{ConvSpec, ConvWeights, Coords, Element, SparseTensor, MAX_DIM};

/// Largest elementwise deviation divided by the largest magnitude in the
/// reference. Two all-zero inputs compare as 0.
pub fn relative_error(actual: &[f64], reference: &[f64]) -> f64 {
    assert_eq!(actual.len(), reference.len());
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dev = actual
        .iter()
        .zip(reference)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if dev == 0.0 {
        0.0
    } else {
        dev / scale.max(f64::MIN_POSITIVE)
    }
}
