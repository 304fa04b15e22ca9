mod common;

use common::{conv_gradient_error, oracle_deviation, random_case, random_coords};
use lidarseg::sparse::{
    autotune, build_bitmasks, build_kernel_map, conv, conv_gather_scatter, ConvSpec, Dataflow, ExecMode,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn every_dataflow_matches_the_dense_reference() {
    for seed in 0..40 {
        let case = random_case(seed);
        for flow in Dataflow::ALL {
            let (y, _) = conv(&case.x, &case.w, &case.map, flow, ExecMode::Serial).unwrap();
            let dev = oracle_deviation(&case, &y);
            assert!(dev <= 1e-5, "seed {seed}, {flow}: {dev:e}");
        }
    }
}

#[test]
fn parallel_execution_is_bit_identical() {
    for seed in 100..120 {
        let case = random_case(seed);
        for flow in Dataflow::ALL {
            let (a, sa) = conv(&case.x, &case.w, &case.map, flow, ExecMode::Serial).unwrap();
            let (b, sb) = conv(&case.x, &case.w, &case.map, flow, ExecMode::Parallel).unwrap();
            assert_eq!(a, b, "seed {seed}, {flow}");
            assert_eq!(sa, sb);
        }
    }
}

#[test]
fn f32_storage_tracks_f64() {
    for seed in 200..210 {
        let case = random_case(seed);
        let x32 = case.x.map_features(|v| v as f32);
        let w32 = lidarseg::sparse::ConvWeights::new(
            case.w.kernel_volume(),
            case.w.c_in(),
            case.w.c_out(),
            case.w.data().iter().map(|&v| v as f32).collect(),
        )
        .unwrap();
        let (y64, _) = conv_gather_scatter(&case.x, &case.w, &case.map).unwrap();
        let (y32, _) = conv_gather_scatter(&x32, &w32, &case.map).unwrap();
        let dev = lidarseg::sparse::relative_error(&y32.features_f64(), y64.features());
        assert!(dev < 1e-5, "seed {seed}: {dev:e}");
    }
}

#[test]
fn conv_backward_matches_finite_differences() {
    for seed in 0..10 {
        let err = conv_gradient_error(seed);
        assert!(err < 1e-4, "seed {seed}: {err:e}");
    }
}

#[test]
fn autotuner_picks_a_minimum_median() {
    let case = random_case(7);
    let report = autotune(&case.x, &case.w, &case.map, &[], 3, ExecMode::Serial).unwrap();
    let min = report.table.iter().map(|e| e.median).min().unwrap();
    let chosen = report.table.iter().find(|e| e.dataflow == report.chosen).unwrap();
    assert_eq!(chosen.median, min);
    assert!(report.table.iter().all(|e| e.samples.len() == 3));
}

#[test]
fn autotune_rejects_zero_repeats() {
    let case = random_case(8);
    assert!(autotune(&case.x, &case.w, &case.map, &[], 0, ExecMode::Serial).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symmetric_offsets_pair_equally(seed in any::<u64>(), k in prop::sample::select(vec![3u32, 5]), nnz in 1usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords = random_coords(&mut rng, 3, nnz, 10);
        let spec = ConvSpec::submanifold(k, 3, 1, 1);
        let map = build_kernel_map(&coords, &coords, &spec).unwrap();
        for kk in 0..map.offsets().len() {
            let neg = map.offsets().negated_index(kk).unwrap();
            prop_assert_eq!(map.pairs(kk).len(), map.pairs(neg).len());
        }
    }

    #[test]
    fn bitmask_popcounts_equal_output_degrees(seed in any::<u64>(), nnz in 1usize..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords = random_coords(&mut rng, 3, nnz, 12);
        let spec = ConvSpec::submanifold(3, 3, 1, 1);
        let map = build_kernel_map(&coords, &coords, &spec).unwrap();
        let masks = build_bitmasks(&map, map.out_count(), 3, 3).unwrap();
        let mut degree = vec![0u32; map.out_count()];
        for list in map.all_pairs() {
            for p in list {
                degree[p.output as usize] += 1;
            }
        }
        for (i, d) in degree.iter().enumerate() {
            prop_assert_eq!(masks.popcount(i), *d);
        }
    }

    #[test]
    fn convolution_is_linear_in_features(seed in any::<u64>(), alpha in -3.0f64..3.0) {
        let case = random_case(seed);
        let (y, _) = conv_gather_scatter(&case.x, &case.w, &case.map).unwrap();
        let scaled = case.x.map_features(|v| v * alpha);
        let (ys, _) = conv_gather_scatter(&scaled, &case.w, &case.map).unwrap();
        let expected: Vec<f64> = y.features().iter().map(|v| v * alpha).collect();
        prop_assert!(lidarseg::sparse::relative_error(ys.features(), &expected) < 1e-12);
    }
}
