use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{DataflowSelection, RunConfig};
use super::dataset::{load_scenes, Scenes};
use super::report::{emit_report, header, num, Environment, Report, ReportFormat};
use crate::augment::{apply_policy, AugmentPolicy};
use crate::geometry::PointCloud;
use crate::ingest::{write_labels_file, write_scan_file};
use crate::metrics::{macc, miou, ConfusionMatrix};
use crate::raster::{occupancy, voxelize};
use crate::segmentor::{Plan, Segmentor, TrainReport, TrainState};
use crate::sparse::{
    autotune, build_kernel_map, conv, conv_gather_scatter, output_coords, relative_error, time_median, ConvSpec,
    ConvStats, ConvWeights, Dataflow, ExecMode, KernelMap, SparseTensor,
};
use crate::tta::{average_probabilities, enumerate_variants, TtaConfig};
use crate::{segmentor::argmax_labels, ClassId, Error, Result, IGNORE};

/// Largest relative deviation from gather-scatter tolerated before timing.
pub const GATE_TOLERANCE: f64 = 1e-5;

/// Runs one convolution; the benchmark times whatever this does.
pub trait ConvExecutor: Sync {
    fn execute(
        &self,
        x: &SparseTensor<f32>,
        w: &ConvWeights<f32>,
        map: &KernelMap,
        dataflow: Dataflow,
        mode: ExecMode,
    ) -> Result<(SparseTensor<f32>, ConvStats)>;
}

/// The library's own dataflows.
pub struct EngineExecutor;

impl ConvExecutor for EngineExecutor {
    fn execute(
        &self,
        x: &SparseTensor<f32>,
        w: &ConvWeights<f32>,
        map: &KernelMap,
        dataflow: Dataflow,
        mode: ExecMode,
    ) -> Result<(SparseTensor<f32>, ConvStats)> {
        conv(x, w, map, dataflow, mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchWorkload {
    pub points: usize,
    pub voxels: usize,
    pub occupancy: f64,
    pub kernel_size: u32,
    pub stride: u32,
    pub submanifold: bool,
    pub c_in: usize,
    pub c_out: usize,
    pub output_rows: usize,
    pub map_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub dataflow: String,
    pub median_s: f64,
    pub p10_s: f64,
    pub p90_s: f64,
    /// Full segmentor forward passes per second with this dataflow.
    pub scans_per_s: f64,
    pub max_rel_dev: f64,
    pub macs: u64,
    pub padded_macs: u64,
    pub unsorted_padded_macs: Option<u64>,
    /// Unsorted over sorted padded MACs, for the implicit dataflow.
    pub sorting_reduction: Option<f64>,
    pub gathered: u64,
    pub scattered: u64,
    pub weight_groups: usize,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub environment: Environment,
    pub workload: BenchWorkload,
    pub repeats: usize,
    pub rows: Vec<BenchRow>,
    pub autotune_choice: Option<String>,
    pub autotune_matches_minimum: Option<bool>,
    pub train_steps_per_s: Option<f64>,
}

impl Report for BenchReport {
    fn csv_header(&self) -> Vec<String> {
        header(&[
            "dataflow",
            "median_s",
            "p10_s",
            "p90_s",
            "scans_per_s",
            "max_rel_dev",
            "macs",
            "padded_macs",
            "unsorted_padded_macs",
            "sorting_reduction",
            "gathered",
            "scattered",
            "weight_groups",
            "fallback",
        ])
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.dataflow.clone(),
                    num(r.median_s),
                    num(r.p10_s),
                    num(r.p90_s),
                    num(r.scans_per_s),
                    num(r.max_rel_dev),
                    r.macs.to_string(),
                    r.padded_macs.to_string(),
                    r.unsorted_padded_macs.map(|v| v.to_string()).unwrap_or_default(),
                    num(r.sorting_reduction),
                    r.gathered.to_string(),
                    r.scattered.to_string(),
                    r.weight_groups.to_string(),
                    r.fallback.to_string(),
                ]
            })
            .collect()
    }
}

fn environment(cfg: &RunConfig) -> Environment {
    Environment::capture(cfg.threads, cfg.seed, cfg.digest())
}

/// Nearest-rank percentile in seconds.
fn percentile(samples: &[Duration], q: f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_unstable();
    let rank = ((q * s.len() as f64).ceil() as usize).clamp(1, s.len());
    s[rank - 1].as_secs_f64()
}

fn first_scene(scenes: &Scenes) -> Result<&PointCloud> {
    scenes
        .train
        .first()
        .ok_or_else(|| Error::Config("the dataset has no training scenes".into()))
}

/// Benchmarks convolution dataflows on a voxelized scene. Every selected
/// dataflow is first checked against gather-scatter; any deviation above
/// [`GATE_TOLERANCE`] aborts before anything is timed.
pub fn bench_dataflows_with(cfg: &RunConfig, executor: &dyn ConvExecutor) -> Result<BenchReport> {
    cfg.validate()?;
    let scenes = load_scenes(cfg)?;
    let scene = first_scene(&scenes)?;
    let b = &cfg.bench;
    let voxel_cfg = b.voxel.clone().unwrap_or_else(|| cfg.segmentor.voxel.clone());
    let vox = voxelize(scene, &voxel_cfg)?;
    let dim = vox.coords.dim();
    let spec = if b.submanifold {
        ConvSpec::submanifold(b.kernel_size, dim, b.c_in, b.c_out)
    } else {
        ConvSpec::generalized(b.kernel_size, dim, b.stride, b.c_in, b.c_out)
    };
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let features = (0..vox.coords.len() * b.c_in)
        .map(|_| rng.gen_range(-1.0f32..1.0))
        .collect();
    let x = SparseTensor::new(vox.coords.clone(), features, b.c_in, 1)?;
    let bound = (1.0 / (spec.kernel_volume() * b.c_in) as f64).sqrt() as f32;
    let weights = (0..spec.kernel_volume() * b.c_in * b.c_out)
        .map(|_| rng.gen_range(-bound..=bound))
        .collect();
    let w = ConvWeights::for_spec(&spec, weights)?;
    let out = output_coords(&vox.coords, &spec)?;
    let map = build_kernel_map(&vox.coords, &out, &spec)?;

    let flows: Vec<Dataflow> = match &b.dataflows {
        DataflowSelection::Auto => Dataflow::ALL.into_iter().filter(|f| f.applicable(&map)).collect(),
        DataflowSelection::List(l) => l.clone(),
    };
    if flows.is_empty() {
        return Err(Error::Config("no dataflow selected".into()));
    }

    let (reference, _) = conv_gather_scatter(&x, &w, &map)?;
    let reference_values = reference.features_f64();
    let mut checked = Vec::with_capacity(flows.len());
    for &flow in &flows {
        let (y, stats) = executor.execute(&x, &w, &map, flow, cfg.threads)?;
        let dev = if y.coords() == reference.coords() && y.channels() == reference.channels() {
            relative_error(&y.features_f64(), &reference_values)
        } else {
            f64::INFINITY
        };
        if dev.is_nan() || dev > GATE_TOLERANCE {
            return Err(Error::EquivalenceFailure {
                dataflow: flow.to_string(),
                reference: Dataflow::GatherScatter.to_string(),
                max_dev: dev,
            });
        }
        checked.push((flow, stats, dev));
    }

    let mut samples: Vec<(Duration, Vec<Duration>)> = Vec::new();
    let mut autotune_choice = None;
    let mut autotune_matches_minimum = None;
    if b.dataflows == DataflowSelection::Auto {
        let tuned = autotune(&x, &w, &map, &flows, b.repeats, cfg.threads)?;
        for &(flow, ..) in &checked {
            let entry = tuned
                .table
                .iter()
                .find(|e| e.dataflow == flow)
                .ok_or_else(|| Error::InvalidSpec(format!("autotuner skipped {flow}")))?;
            samples.push((entry.median, entry.samples.clone()));
        }
        let min = tuned.table.iter().map(|e| e.median).min();
        let chosen = tuned
            .table
            .iter()
            .find(|e| e.dataflow == tuned.chosen)
            .map(|e| e.median);
        autotune_matches_minimum = Some(chosen.is_some() && chosen == min);
        autotune_choice = Some(tuned.chosen.to_string());
    } else {
        for &(flow, ..) in &checked {
            samples.push(time_median(b.repeats, || {
                executor.execute(&x, &w, &map, flow, cfg.threads).map(|_| ())
            })?);
        }
    }

    let mut model = Segmentor::<f32>::new(cfg.segmentor_config())?;
    let mut rows = Vec::with_capacity(checked.len());
    for ((flow, stats, dev), (median, raw)) in checked.into_iter().zip(samples) {
        model.set_execution(flow, cfg.threads);
        let (forward, _) = time_median(b.repeats, || model.forward(scene).map(|_| ()))?;
        rows.push(BenchRow {
            dataflow: flow.to_string(),
            median_s: median.as_secs_f64(),
            p10_s: percentile(&raw, 0.1),
            p90_s: percentile(&raw, 0.9),
            scans_per_s: 1.0 / forward.as_secs_f64(),
            max_rel_dev: dev,
            macs: stats.macs,
            padded_macs: stats.padded_macs,
            unsorted_padded_macs: stats.unsorted_padded_macs,
            sorting_reduction: stats
                .unsorted_padded_macs
                .filter(|_| stats.padded_macs > 0)
                .map(|u| u as f64 / stats.padded_macs as f64),
            gathered: stats.gathered,
            scattered: stats.scattered,
            weight_groups: stats.weight_groups,
            fallback: stats.fallback,
        });
    }

    let train_steps_per_s = match scene.labels() {
        Some(_) if b.train_steps > 0 => {
            let mut state = TrainState::new(Segmentor::<f32>::new(cfg.segmentor_config())?);
            let batch = [scene.clone()];
            let start = Instant::now();
            for _ in 0..b.train_steps {
                state.train_step(&batch)?;
            }
            Some(b.train_steps as f64 / start.elapsed().as_secs_f64().max(1e-9))
        }
        _ => None,
    };

    Ok(BenchReport {
        environment: environment(cfg),
        workload: BenchWorkload {
            points: scene.len(),
            voxels: vox.coords.len(),
            occupancy: occupancy(&vox, &voxel_cfg),
            kernel_size: spec.kernel_size,
            stride: spec.stride,
            submanifold: spec.submanifold,
            c_in: spec.c_in,
            c_out: spec.c_out,
            output_rows: map.out_count(),
            map_pairs: map.total_pairs(),
        },
        repeats: b.repeats,
        rows,
        autotune_choice,
        autotune_matches_minimum,
        train_steps_per_s,
    })
}

/// `bench-dataflows`: writes `bench_dataflows.json` and `.csv`.
pub fn cmd_bench_dataflows(cfg: &RunConfig) -> Result<BenchReport> {
    let report = bench_dataflows_with(cfg, &EngineExecutor)?;
    write_pair(&report, cfg, "bench_dataflows")?;
    Ok(report)
}

fn write_pair<R: Report>(report: &R, cfg: &RunConfig, stem: &str) -> Result<()> {
    emit_report(report, ReportFormat::Json, &cfg.out_dir.join(format!("{stem}.json")))?;
    emit_report(report, ReportFormat::Csv, &cfg.out_dir.join(format!("{stem}.csv")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainRunReport {
    pub environment: Environment,
    pub steps: usize,
    pub batch_size: usize,
    pub augmented: bool,
    pub initial_loss: Option<f64>,
    pub final_loss: Option<f64>,
    pub iter_per_s: Option<f64>,
    /// Held-out mIoU of always predicting the most frequent training class.
    pub majority_baseline_miou: Option<f64>,
    pub checkpoint: PathBuf,
    #[serde(flatten)]
    pub train: TrainReport,
}

impl Report for TrainRunReport {
    fn csv_header(&self) -> Vec<String> {
        header(&["step", "loss", "seconds"])
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.train
            .losses
            .iter()
            .zip(&self.train.step_seconds)
            .enumerate()
            .map(|(i, (l, s))| vec![i.to_string(), num(*l), num(*s)])
            .collect()
    }
}

fn labels_of(cloud: &PointCloud) -> Result<&[ClassId]> {
    cloud.labels().ok_or(Error::MissingLabels)
}

/// Confusion matrix of a prediction function over labelled scenes.
fn confusion<F>(scenes: &[PointCloud], classes: usize, mut predict: F) -> Result<ConfusionMatrix>
where
    F: FnMut(&PointCloud) -> Result<Vec<ClassId>>,
{
    let mut cm = ConfusionMatrix::new(classes);
    for s in scenes {
        if let Some(gt) = s.labels() {
            cm.accumulate(&predict(s)?, gt)?;
        }
    }
    Ok(cm)
}

fn majority_class(scenes: &[PointCloud], classes: usize) -> Option<ClassId> {
    let mut counts = vec![0usize; classes];
    for l in scenes.iter().filter_map(|s| s.labels()).flatten() {
        if *l != IGNORE && (*l as usize) < classes {
            counts[*l as usize] += 1;
        }
    }
    let best = (0..classes).max_by_key(|&c| (counts[c], std::cmp::Reverse(c)))?;
    (counts[best] > 0).then_some(best as ClassId)
}

/// `train`: fits the segmentor, writes the checkpoint, `train_report.json`
/// and `train_losses.csv`.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainRunReport> {
    cfg.validate()?;
    let scenes = load_scenes(cfg)?;
    if scenes.train.is_empty() {
        return Err(Error::Config("the dataset has no training scenes".into()));
    }
    for s in &scenes.train {
        labels_of(s)?;
    }
    let mut state = TrainState::new(Segmentor::<f32>::new(cfg.segmentor_config())?);
    let cached: Vec<Plan> = match cfg.augment {
        None => scenes
            .train
            .iter()
            .map(|s| state.model.plan(s))
            .collect::<Result<_>>()?,
        Some(_) => Vec::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let n = scenes.train.len();
    let mut report = TrainReport::default();
    for step in 0..cfg.train.steps {
        let start = Instant::now();
        let picks: Vec<usize> = (0..cfg.train.batch_size)
            .map(|k| (step * cfg.train.batch_size + k) % n)
            .collect();
        let loss = match &cfg.augment {
            None => {
                let batch: Vec<(&Plan, &[ClassId])> = picks
                    .iter()
                    .map(|&i| Ok((&cached[i], labels_of(&scenes.train[i])?)))
                    .collect::<Result<_>>()?;
                state.train_step_planned(&batch)?
            }
            Some(policy) => {
                let mut clouds = Vec::with_capacity(picks.len());
                for &i in &picks {
                    let partner = rng.gen_range(0..n);
                    let (mixed, _) = apply_policy(&scenes.train[i], &scenes.train[partner], policy, rng.gen())?;
                    clouds.push(mixed);
                }
                state.train_step(&clouds)?
            }
        };
        report.losses.push(loss);
        report.step_seconds.push(start.elapsed().as_secs_f64().max(1e-9));
        log::debug!("step {step}: loss {loss:.5}");
    }
    let checkpoint = cfg.checkpoint_path();
    if let Some(dir) = checkpoint.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    state.model.save(&checkpoint)?;

    let classes = cfg.segmentor.num_classes;
    let cm = confusion(&scenes.eval, classes, |s| state.model.predict(s))?;
    report.final_miou = miou(&cm).ok().map(|s| s.mean);
    report.final_macc = macc(&cm).ok().map(|s| s.mean);
    let majority_baseline_miou = majority_class(&scenes.train, classes).and_then(|m| {
        confusion(&scenes.eval, classes, |s| Ok(vec![m; s.len()]))
            .ok()
            .and_then(|cm| miou(&cm).ok())
            .map(|s| s.mean)
    });
    let run = TrainRunReport {
        environment: environment(cfg),
        steps: cfg.train.steps,
        batch_size: cfg.train.batch_size,
        augmented: cfg.augment.is_some(),
        initial_loss: report.losses.first().copied(),
        final_loss: report.losses.last().copied(),
        iter_per_s: report.iter_per_sec(),
        majority_baseline_miou,
        checkpoint,
        train: report,
    };
    emit_report(&run, ReportFormat::Json, &cfg.out_dir.join("train_report.json"))?;
    emit_report(&run, ReportFormat::Csv, &cfg.out_dir.join("train_losses.csv"))?;
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalClassRow {
    pub class: usize,
    pub name: String,
    pub points: u64,
    pub iou: Option<f64>,
    pub acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub environment: Environment,
    pub checkpoint: PathBuf,
    pub scans: usize,
    pub points: usize,
    pub scored_points: u64,
    pub variants: usize,
    pub elapsed_s: f64,
    pub scans_per_s: f64,
    pub miou: Option<f64>,
    pub macc: Option<f64>,
    pub warning: Option<String>,
    pub per_class: Vec<EvalClassRow>,
}

impl Report for EvalReport {
    fn csv_header(&self) -> Vec<String> {
        header(&["class", "name", "points", "iou", "acc"])
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.per_class
            .iter()
            .map(|r| {
                vec![
                    r.class.to_string(),
                    r.name.clone(),
                    r.points.to_string(),
                    num(r.iou),
                    num(r.acc),
                ]
            })
            .collect()
    }
}

/// Predicts every scene (with TTA when `tta` is given) and scores the
/// labelled ones. Returns the matrix, the prediction wall-clock time and
/// the number of variants per scan.
pub fn evaluate(
    model: &Segmentor<f32>,
    scenes: &[PointCloud],
    tta: Option<&TtaConfig>,
    mode: ExecMode,
) -> Result<(ConfusionMatrix, Duration, usize)> {
    let variants = match tta {
        Some(t) => enumerate_variants(t)?,
        None => enumerate_variants(&TtaConfig::default())?,
    };
    let classes = model.num_classes();
    let start = Instant::now();
    let mut predictions = Vec::with_capacity(scenes.len());
    for s in scenes {
        let labels = match tta {
            Some(_) => argmax_labels(&average_probabilities(s, model, &variants, mode)?, classes),
            None => model.predict(s)?,
        };
        predictions.push(labels);
    }
    let elapsed = start.elapsed().max(Duration::from_nanos(1));
    let mut it = predictions.into_iter();
    let cm = confusion(scenes, classes, |_| Ok(it.next().expect("one prediction per scene")))?;
    Ok((cm, elapsed, variants.len()))
}

/// `eval`: scores a checkpoint on the held-out scenes; writes
/// `eval_report.json` and the per-class table `eval_classes.csv`.
pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let checkpoint = cfg.eval_checkpoint_path();
    let model = Segmentor::<f32>::load_for(&checkpoint, &cfg.segmentor_config())?;
    let scenes = load_scenes(cfg)?;
    let tta = cfg.eval.use_tta.then_some(&cfg.tta);
    let (cm, elapsed, variants) = evaluate(&model, &scenes.eval, tta, cfg.threads)?;
    let (iou, acc) = (miou(&cm), macc(&cm));
    let warning = match (&iou, &acc) {
        (Err(e), _) | (_, Err(e)) => {
            log::warn!("{e}");
            Some(e.to_string())
        }
        _ => None,
    };
    let per_class = (0..cfg.segmentor.num_classes)
        .map(|c| EvalClassRow {
            class: c,
            name: scenes
                .class_names
                .get(c)
                .cloned()
                .unwrap_or_else(|| format!("class{c}")),
            points: (0..cm.classes()).map(|p| cm.get(c, p)).sum(),
            iou: iou.as_ref().ok().and_then(|s| s.per_class[c]),
            acc: acc.as_ref().ok().and_then(|s| s.per_class[c]),
        })
        .collect();
    let report = EvalReport {
        environment: environment(cfg),
        checkpoint,
        scans: scenes.eval.len(),
        points: scenes.eval.iter().map(PointCloud::len).sum(),
        scored_points: cm.total(),
        variants,
        elapsed_s: elapsed.as_secs_f64(),
        scans_per_s: scenes.eval.len() as f64 / elapsed.as_secs_f64(),
        miou: iou.ok().map(|s| s.mean),
        macc: acc.ok().map(|s| s.mean),
        warning,
        per_class,
    };
    emit_report(&report, ReportFormat::Json, &cfg.out_dir.join("eval_report.json"))?;
    emit_report(&report, ReportFormat::Csv, &cfg.out_dir.join("eval_classes.csv"))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreviewCloud {
    pub name: String,
    pub points: usize,
    pub class_counts: Vec<usize>,
    pub scan: PathBuf,
    pub labels: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreviewReport {
    pub environment: Environment,
    pub policy: AugmentPolicy,
    pub clouds: Vec<PreviewCloud>,
}

impl Report for PreviewReport {
    fn csv_header(&self) -> Vec<String> {
        let classes = self.clouds.first().map_or(0, |c| c.class_counts.len());
        let mut h = header(&["cloud", "points"]);
        h.extend((0..classes).map(|c| format!("class{c}")));
        h
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.clouds
            .iter()
            .map(|c| {
                let mut row = vec![c.name.clone(), c.points.to_string()];
                row.extend(c.class_counts.iter().map(|n| n.to_string()));
                row
            })
            .collect()
    }
}

/// Mixes a pair of scans under `policy` and `seed`.
pub fn augment_preview(
    a: &PointCloud,
    b: &PointCloud,
    policy: &AugmentPolicy,
    seed: u64,
) -> Result<(PointCloud, PointCloud)> {
    apply_policy(a, b, policy, seed)
}

/// `augment-preview`: mixes the first two training scenes and writes the
/// inputs and outputs as scan/label files under `preview/`.
pub fn cmd_augment_preview(cfg: &RunConfig) -> Result<PreviewReport> {
    cfg.validate()?;
    let scenes = load_scenes(cfg)?;
    let a = first_scene(&scenes)?;
    let b = &scenes.train[1 % scenes.train.len()];
    let policy = cfg.augment.clone().unwrap_or_default();
    let (x, y) = augment_preview(a, b, &policy, cfg.seed)?;
    let dir = cfg.out_dir.join("preview");
    let classes = cfg.segmentor.num_classes;
    let mut clouds = Vec::new();
    for (name, cloud) in [("input_a", a), ("input_b", b), ("mixed_a", &x), ("mixed_b", &y)] {
        let labels = labels_of(cloud)?;
        let scan = dir.join(format!("{name}.bin"));
        let label_path = dir.join(format!("{name}.label"));
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_scan_file(&scan, cloud)?;
        write_labels_file(&label_path, labels, &vec![0; labels.len()])?;
        let mut class_counts = vec![0; classes];
        for &l in labels {
            if let Some(c) = class_counts.get_mut(l as usize) {
                *c += 1;
            }
        }
        clouds.push(PreviewCloud {
            name: name.to_string(),
            points: cloud.len(),
            class_counts,
            scan,
            labels: label_path,
        });
    }
    let report = PreviewReport {
        environment: environment(cfg),
        policy,
        clouds,
    };
    write_pair(&report, cfg, "augment_preview")?;
    Ok(report)
}
