mod common;

use common::{gpu, random, tolerance};
use proptest::prelude::*;
use skinny_gemm::kernels::{native, simulate};
use skinny_gemm::oracle::{count_expected_loads, max_relative_error};
use skinny_gemm::perfmodel::{max_occupancy, predict_time};
use skinny_gemm::simt::{coalesce_warp_access, shared_access_conflicts, ArrayId};
use skinny_gemm::tuner::tune_tsm2r;
use skinny_gemm::types::{Element, TileLayout};
use skinny_gemm::{format_float, Catalog, KernelParams, KernelVariant, LatencyConstants, Matrix, Precision};

const GPUS: [&str; 5] = ["k40c", "m40", "p100", "v100", "a100"];

/// A kernel, a small (often ragged) problem and feasible parameters for it.
fn config() -> impl Strategy<Value = (KernelVariant, usize, usize, usize, KernelParams)> {
    (0..6usize, 1..300usize, 1..80usize, 1..=16usize)
        .prop_flat_map(|(v, m, k, n)| {
            let variant = KernelVariant::ALL[v];
            (
                Just(variant),
                Just(m),
                Just(k),
                Just(n),
                prop_oneof![Just(32usize), Just(64)],
                1..=n,
                1..=8usize,
                prop_oneof![Just(1usize), Just(2), Just(4)],
                any::<bool>(),
            )
        })
        .prop_map(|(variant, m, k, n, t1, t2, t3, tcf, row_major)| {
            let layout = if row_major { TileLayout::RowMajor } else { TileLayout::ColumnMajor };
            let tcf = if variant.uses_tcf() { tcf } else { 1 };
            let p = KernelParams::new(variant, t1, t2, t3).with_tcf(tcf).with_layout(layout);
            (variant, m, k, n, p)
        })
}

fn check_oracle<T: Element>(m: usize, k: usize, n: usize, p: &KernelParams, seed: u64) -> Result<(), TestCaseError> {
    let a: Matrix<T> = random(m, k, seed);
    let b: Matrix<T> = random(k, n, seed + 1);
    let c: Matrix<T> = random(m, n, seed + 2);
    let g = gpu("v100");
    let got = native(&g, &a, &b, &c, p).unwrap();
    let err = max_relative_error(&a, &b, &c, &got).unwrap();
    prop_assert!(err <= tolerance::<T>(k), "error {err} on {m}x{k}x{n} {p:?}");
    let (sim, _) = simulate(&g, &a, &b, &c, p).unwrap();
    prop_assert_eq!(sim, got);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_kernel_matches_the_oracle((_, m, k, n, p) in config(), seed in 0u64..1000) {
        check_oracle::<f64>(m, k, n, &p, seed)?;
        check_oracle::<f32>(m, k, n, &p, seed)?;
    }

    #[test]
    fn counters_follow_closed_forms((variant, m, k, n, p) in config()) {
        let a: Matrix<f64> = random(m, k, 1);
        let b: Matrix<f64> = random(k, n, 2);
        let (_, s) = simulate(&gpu("k40c"), &a, &b, &Matrix::zeros(m, n), &p).unwrap();
        let e = count_expected_loads(variant, m, k, n, &p);
        prop_assert_eq!(s.array(ArrayId::A).load_instructions, e.a);
        prop_assert_eq!(s.array(ArrayId::B).load_instructions, e.b);
        prop_assert_eq!(s.array(ArrayId::C).load_instructions, e.c);
        prop_assert_eq!(s.array(ArrayId::C).store_instructions, (m * n * if variant == KernelVariant::LOpt2 { k.div_ceil(p.t1) } else { 1 }) as u64);
        prop_assert_eq!(s.fma_count, (m * k * n) as u64);
        for id in ArrayId::ALL {
            let st = s.array(id);
            prop_assert!(st.bytes_requested <= st.bytes_transferred);
            prop_assert!(st.bytes_requested <= st.lane_bytes);
            prop_assert!(st.load_transactions <= st.load_instructions * 2);
        }
        if p.tile_layout == TileLayout::ColumnMajor && variant.uses_shared_tile() {
            prop_assert_eq!(s.shared_bank_conflict_excess, 0);
        }
    }

    #[test]
    fn simulation_is_deterministic((_, m, k, n, p) in config()) {
        let a: Matrix<f32> = random(m, k, 5);
        let b: Matrix<f32> = random(k, n, 6);
        let c = Matrix::zeros(m, n);
        let first = simulate(&gpu("p100"), &a, &b, &c, &p).unwrap();
        let second = simulate(&gpu("p100"), &a, &b, &c, &p).unwrap();
        prop_assert_eq!(first, second);
    }

    #[test]
    fn transactions_bound_requested_bytes(
        lanes in proptest::collection::vec(proptest::option::of(0u64..4096), 1..=32),
        wide in any::<bool>(),
        tx in prop_oneof![Just(32usize), Just(128)],
    ) {
        let eb = if wide { 8 } else { 4 };
        let addrs: Vec<Option<u64>> = lanes.iter().map(|l| l.map(|e| e * eb as u64)).collect();
        let c = coalesce_warp_access(&addrs, eb, tx);
        let active = lanes.iter().flatten().count() as u64;
        prop_assert_eq!(c.active_lanes, active);
        prop_assert!(c.transactions * tx as u64 >= c.bytes_requested);
        prop_assert!(c.transactions >= c.bytes_requested.div_ceil(tx as u64));
        prop_assert!(c.transactions <= active);
        prop_assert!(c.bytes_requested <= active * eb as u64);
        if active > 0 {
            let e = c.efficiency().unwrap();
            prop_assert!(e > 0.0 && e <= 1.0);
        }
    }

    #[test]
    fn bank_passes_are_bounded(words in proptest::collection::vec(proptest::option::of(0u64..512), 1..=32)) {
        let mut distinct: Vec<u64> = words.iter().flatten().copied().collect();
        distinct.sort_unstable();
        distinct.dedup();
        let passes = shared_access_conflicts(&words, 32);
        prop_assert!(passes <= distinct.len() as u64);
        prop_assert!(passes >= (distinct.len() as u64).div_ceil(32));
        let same: Vec<Option<u64>> = words.iter().map(|w| w.map(|_| 7)).collect();
        prop_assert!(shared_access_conflicts(&same, 32) <= 1);
    }

    #[test]
    fn occupancy_never_grows_with_tiles(
        g in 0..5usize,
        t2 in 1..64usize,
        t3 in 1..64usize,
        double in any::<bool>(),
    ) {
        let spec = gpu(GPUS[g]);
        let prec = if double { Precision::Double } else { Precision::Single };
        let c = LatencyConstants::default();
        let at = |t2, t3| max_occupancy(&KernelParams::new(KernelVariant::V3, 64, t2, t3), prec, &spec, &c);
        prop_assert!(at(t2 + 1, t3) <= at(t2, t3));
        prop_assert!(at(t2, t3 + 1) <= at(t2, t3));
        prop_assert!(at(t2, t3) <= spec.hw_max_threads_per_sm as u64);
    }

    #[test]
    fn overlap_never_predicts_slower(
        g in 0..5usize,
        m in 1usize..2_000_000,
        k in 1usize..20_000,
        n in 1usize..=32,
        t1 in prop_oneof![Just(32usize), Just(64), Just(128), Just(256)],
        t3 in 1usize..=16,
        t2_frac in 0.0f64..1.0,
    ) {
        let p = Catalog::builtin().get(GPUS[g]).unwrap().clone();
        let t2 = 1 + ((n - 1) as f64 * t2_frac) as usize;
        let v2 = predict_time(m, k, n, &KernelParams::new(KernelVariant::V2, t1, t2, t3), &p.spec, Precision::Double, &p.constants);
        let v3 = predict_time(m, k, n, &KernelParams::new(KernelVariant::V3, t1, t2, t3), &p.spec, Precision::Double, &p.constants);
        prop_assert!(v3 <= v2);
    }

    #[test]
    fn floats_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn tuned_parameters_stay_in_bounds(
        g in 0..5usize,
        n in 1usize..=64,
        m in 1024usize..40_000,
        k in 16usize..40_000,
        double in any::<bool>(),
    ) {
        let p = Catalog::builtin().get(GPUS[g]).unwrap().clone();
        let prec = if double { Precision::Double } else { Precision::Single };
        let r = tune_tsm2r(m, k, n, &p.spec, prec, &p.constants);
        prop_assert!(r.params.t2 >= 1 && r.params.t2 <= n);
        prop_assert!(r.params.t3 >= 1 && r.params.t3 <= 64);
        for b in &r.candidates {
            prop_assert!(b.t2 >= b.t2_bounds.0 && b.t2 <= b.t2_bounds.1);
            prop_assert!(b.trace.windows(2).all(|w| w[1].objective <= w[0].objective));
        }
        prop_assert!(r.predicted_time.is_finite() && r.predicted_time > 0.0);
    }
}
