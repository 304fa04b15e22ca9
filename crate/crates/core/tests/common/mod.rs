#![allow(dead_code)]

use std::path::Path;

use lidarseg::bench::{DatasetConfig, RunConfig};
use lidarseg::ingest::SynthSceneConfig;
use lidarseg::raster::VoxelizationConfig;
use lidarseg::segmentor::{Segmentor, SegmentorConfig};
use lidarseg::sparse::{
    build_kernel_map, conv_dense_oracle, output_coords, relative_error, ConvSpec, ConvWeights, Coords, DenseGrid,
    KernelMap, SparseTensor,
};
use lidarseg::{PointCloud, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct ConvCase {
    pub spec: ConvSpec,
    pub x: SparseTensor<f64>,
    pub w: ConvWeights<f64>,
    pub map: KernelMap,
}

/// Random coordinates in `[0, grid)^dim`, deduplicated.
pub fn random_coords(rng: &mut ChaCha8Rng, dim: usize, nnz: usize, grid: i32) -> Coords {
    let data = (0..nnz * dim).map(|_| rng.gen_range(0..grid)).collect();
    Coords::new(dim, data).unwrap().sorted_unique()
}

/// A random 3D convolution with grid <= 16^3, nnz <= 512, channels <= 8,
/// K in {1, 2, 3, 5}, stride in {1, 2}.
pub fn random_case(seed: u64) -> ConvCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = [1u32, 2, 3, 5][rng.gen_range(0..4)];
    let stride = rng.gen_range(1..=2u32);
    let (c_in, c_out) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
    let grid = rng.gen_range(2..=16);
    let nnz = rng.gen_range(1..=512);
    let spec = if stride == 1 && k % 2 == 1 && rng.gen_bool(0.5) {
        ConvSpec::submanifold(k, 3, c_in, c_out)
    } else {
        ConvSpec::generalized(k, 3, stride, c_in, c_out)
    };
    let coords = random_coords(&mut rng, 3, nnz, grid);
    let features = (0..coords.len() * c_in).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let x = SparseTensor::new(coords.clone(), features, c_in, 1).unwrap();
    let weights = (0..spec.kernel_volume() * c_in * c_out)
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let w = ConvWeights::for_spec(&spec, weights).unwrap();
    let out = output_coords(&coords, &spec).unwrap();
    let map = build_kernel_map(&coords, &out, &spec).unwrap();
    ConvCase { spec, x, w, map }
}

/// Relative deviation of a sparse result from the dense reference, read at
/// the sparse output coordinates.
pub fn oracle_deviation(case: &ConvCase, y: &SparseTensor<f64>) -> f64 {
    let grid = DenseGrid::bounding(&case.x).unwrap();
    let dense = conv_dense_oracle(&grid, &case.w, case.spec.kernel_size, case.spec.stride).unwrap();
    assert_eq!(y.coords(), case.map.out_coords());
    let mut reference = Vec::with_capacity(y.features().len());
    for c in y.coords().iter() {
        reference.extend_from_slice(dense.get(c).expect("output coordinate inside the dense grid"));
    }
    relative_error(y.features(), &reference)
}

/// Small segmentor used by gradient checks.
pub fn tiny_segmentor_config(seed: u64) -> SegmentorConfig {
    SegmentorConfig {
        voxel: VoxelizationConfig::cartesian([-2.0, -2.0, -2.0], [2.0, 2.0, 2.0], 0.5),
        widths: vec![3, 4],
        depths: vec![1, 1],
        num_classes: 3,
        seed,
        ..SegmentorConfig::default()
    }
}

pub fn random_labeled_cloud(seed: u64, n: usize, classes: u16) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = (0..n)
        .map(|_| {
            [
                rng.gen_range(-1.9..1.9),
                rng.gen_range(-1.9..1.9),
                rng.gen_range(-1.9..1.9),
            ]
        })
        .collect();
    let intensity = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let labels = (0..n).map(|_| rng.gen_range(0..classes)).collect();
    PointCloud::new(positions, intensity, Some(labels)).unwrap()
}

/// Largest relative error between analytic parameter gradients and central
/// differences over `samples` randomly chosen parameters of a tiny f64
/// segmentor. Parameters are randomised so no ReLU sits exactly at its kink.
pub fn segmentor_gradient_error(seed: u64, samples: usize) -> Result<f64> {
    let cfg = tiny_segmentor_config(seed);
    let mut model = Segmentor::<f64>::new(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    for p in model.params_mut() {
        *p = rng.gen_range(-0.5..0.5);
    }
    let cloud = random_labeled_cloud(seed, 40, 3);
    let plan = model.plan(&cloud)?;
    let labels = cloud.labels().unwrap();
    let (_, grad, _) = model.loss_and_grad(&[(&plan, labels)])?;
    let n = model.params().len();
    let picks: Vec<usize> = (0..samples).map(|_| rng.gen_range(0..n)).collect();
    let h = 1e-6;
    let mut numeric = Vec::with_capacity(samples);
    let mut analytic = Vec::with_capacity(samples);
    for &i in &picks {
        let orig = model.params()[i];
        model.params_mut()[i] = orig + h;
        let (up, ..) = model.loss_and_grad(&[(&plan, labels)])?;
        model.params_mut()[i] = orig - h;
        let (down, ..) = model.loss_and_grad(&[(&plan, labels)])?;
        model.params_mut()[i] = orig;
        numeric.push((up - down) / (2.0 * h));
        analytic.push(grad[i]);
    }
    Ok(relative_error(&analytic, &numeric))
}

/// Largest relative error between `conv_backward_raw` and central
/// differences of `sum(out * g)` for a random double-precision convolution.
pub fn conv_gradient_error(seed: u64) -> f64 {
    use lidarseg::sparse::{conv_backward_raw, conv_gather_scatter};
    let case = random_case(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(7));
    let g: Vec<f64> = (0..case.map.out_count() * case.spec.c_out)
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let objective = |x: &SparseTensor<f64>, w: &ConvWeights<f64>| -> f64 {
        let (y, _) = conv_gather_scatter(x, w, &case.map).unwrap();
        y.features().iter().zip(&g).map(|(a, b)| a * b).sum()
    };
    let (gx, gw) = conv_backward_raw(&g, case.x.features(), &case.w, &case.map).unwrap();
    let h = 1e-6;
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for _ in 0..20 {
        let i = rng.gen_range(0..case.x.features().len());
        let mut up = case.x.clone();
        up.features_mut()[i] += h;
        let mut down = case.x.clone();
        down.features_mut()[i] -= h;
        numeric.push((objective(&up, &case.w) - objective(&down, &case.w)) / (2.0 * h));
        analytic.push(gx[i]);
    }
    for _ in 0..20 {
        let i = rng.gen_range(0..case.w.data().len());
        let mut up = case.w.clone();
        up.data_mut()[i] += h;
        let mut down = case.w.clone();
        down.data_mut()[i] -= h;
        numeric.push((objective(&case.x, &up) - objective(&case.x, &down)) / (2.0 * h));
        analytic.push(gw.data()[i]);
    }
    relative_error(&analytic, &numeric)
}

/// A quick synthetic run rooted at `out`.
pub fn quick_config(out: &Path) -> RunConfig {
    RunConfig {
        out_dir: out.to_path_buf(),
        dataset: DatasetConfig::Synthetic {
            scene: SynthSceneConfig {
                beams: 8,
                points_per_beam: 12,
                ..SynthSceneConfig::default()
            },
            train_scenes: 2,
            eval_scenes: 1,
        },
        ..RunConfig::default()
    }
}
