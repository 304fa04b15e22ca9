use std::time::{Duration, Instant};

use serde::Serialize;

use super::dataflow::{conv, Dataflow, ExecMode};
use super::kernel_map::KernelMap;
use super::tensor::{ConvWeights, Element, SparseTensor};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingEntry {
    pub dataflow: Dataflow,
    pub median: Duration,
    /// Timed runs in execution order, warm-up excluded.
    pub samples: Vec<Duration>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutotuneReport {
    pub chosen: Dataflow,
    pub table: Vec<TimingEntry>,
}

/// Median of the samples; even counts average the two middle values.
pub fn median(samples: &mut [Duration]) -> Duration {
    assert!(!samples.is_empty());
    samples.sort_unstable();
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        (samples[n / 2 - 1] + samples[n / 2]) / 2
    }
}

/// Times `f` once for warm-up and then `repeats` times; never returns zero.
pub fn time_median(repeats: usize, mut f: impl FnMut() -> Result<()>) -> Result<(Duration, Vec<Duration>)> {
    f()?;
    let mut samples = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        f()?;
        samples.push(start.elapsed().max(Duration::from_nanos(1)));
    }
    let raw = samples.clone();
    Ok((median(&mut samples), raw))
}

/// Times every candidate dataflow that runs natively on `map` and picks the
/// fastest median. Ties go to the earlier dataflow in [`Dataflow::ALL`]
/// order. An empty candidate list means all four.
pub fn autotune<T: Element>(
    x: &SparseTensor<T>,
    w: &ConvWeights<T>,
    map: &KernelMap,
    candidates: &[Dataflow],
    repeats: usize,
    mode: ExecMode,
) -> Result<AutotuneReport> {
    if repeats < 1 {
        return Err(Error::InvalidSpec("repeats must be at least 1".into()));
    }
    let mut flows: Vec<Dataflow> = if candidates.is_empty() {
        Dataflow::ALL.to_vec()
    } else {
        candidates.to_vec()
    };
    flows.retain(|f| f.applicable(map));
    flows.sort_by_key(Dataflow::rank);
    flows.dedup_by_key(|f| f.rank());
    if flows.is_empty() {
        return Err(Error::InvalidSpec("no applicable dataflow to tune".into()));
    }
    let mut table = Vec::with_capacity(flows.len());
    for flow in flows {
        let (median, samples) = time_median(repeats, || conv(x, w, map, flow, mode).map(|_| ()))?;
        table.push(TimingEntry {
            dataflow: flow,
            median,
            samples,
        });
    }
    let chosen = table
        .iter()
        .min_by(|a, b| a.median.cmp(&b.median).then(a.dataflow.rank().cmp(&b.dataflow.rank())))
        .expect("non-empty table")
        .dataflow;
    Ok(AutotuneReport { chosen, table })
}
