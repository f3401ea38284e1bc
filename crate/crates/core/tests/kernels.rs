mod common;

use common::{gpu, random, tolerance};
use skinny_gemm::kernels::{native, simulate};
use skinny_gemm::oracle::{c_tile_loads_per_row, count_expected_loads, max_relative_error};
use skinny_gemm::simt::{ArrayId, SimStats};
use skinny_gemm::types::{Element, TileLayout};
use skinny_gemm::{KernelParams, KernelVariant, Matrix};

use KernelVariant::*;

fn sim<T: Element>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    p: KernelParams,
) -> (Matrix<T>, SimStats) {
    let c = Matrix::zeros(a.rows(), b.cols());
    simulate(&gpu("V100"), a, b, &c, &p).unwrap()
}

fn sim_shape(m: usize, k: usize, n: usize, p: KernelParams) -> (Matrix<f64>, SimStats) {
    sim(&random(m, k, 1), &random(k, n, 2), p)
}

fn assert_matches_oracle<T: Element>(m: usize, k: usize, n: usize, p: KernelParams) {
    let a = random::<T>(m, k, 11);
    let b = random::<T>(k, n, 12);
    let c0 = Matrix::zeros(m, n);
    let c = native(&gpu("V100"), &a, &b, &c0, &p).unwrap();
    let err = max_relative_error(&a, &b, &c0, &c).unwrap();
    assert!(err <= tolerance::<T>(k), "{p:?} on {m}x{k}x{n}: {err:e}");
}

#[test]
fn v1_identity_gives_b() {
    let b = random::<f64>(4, 2, 3);
    let (c, _) = sim(&Matrix::identity(4), &b, KernelParams::new(V1, 32, 2, 1));
    assert_eq!(c, b);
    let b = random::<f64>(32, 2, 4);
    let (c, _) = sim(&Matrix::identity(32), &b, KernelParams::new(V1, 32, 2, 1));
    assert_eq!(c, b);
}

#[test]
fn v0_zero_b_gives_zero() {
    let (c, _) = sim(&random::<f64>(64, 64, 5), &Matrix::zeros(64, 4), KernelParams::new(V0, 32, 1, 1));
    assert!(c.as_slice().iter().all(|&x| x == 0.0));
}

#[test]
fn preloaded_c_is_accumulated() {
    let a = random::<f64>(64, 40, 1);
    let b = random::<f64>(40, 4, 2);
    let c0 = random::<f64>(64, 4, 3);
    for v in KernelVariant::ALL {
        let p = KernelParams::new(v, 32, 2, 4).with_tcf(if v.uses_tcf() { 2 } else { 1 });
        let c = native(&gpu("K40c"), &a, &b, &c0, &p).unwrap();
        assert!(max_relative_error(&a, &b, &c0, &c).unwrap() <= tolerance::<f64>(40), "{v:?}");
    }
}

#[test]
fn inner_product_reads_a_n_times() {
    let (_, s) = sim_shape(64, 64, 4, KernelParams::new(V0, 32, 1, 1));
    assert_eq!(s.array(ArrayId::A).load_instructions, 16384);
}

#[test]
fn outer_product_reads_a_once_per_pass() {
    let (_, s) = sim_shape(64, 64, 4, KernelParams::new(V1, 32, 4, 1));
    assert_eq!(s.array(ArrayId::A).load_instructions, 4096);
    let (_, s) = sim_shape(64, 64, 4, KernelParams::new(V1, 32, 2, 1));
    assert_eq!(s.array(ArrayId::A).load_instructions, 8192);
}

#[test]
fn oracle_small_shapes() {
    assert_matches_oracle::<f64>(128, 128, 8, KernelParams::new(V0, 32, 1, 1));
    assert_matches_oracle::<f64>(256, 256, 8, KernelParams::new(V3, 64, 4, 4));
    assert_matches_oracle::<f64>(1024, 1024, 16, KernelParams::new(V3, 128, 8, 4));
    assert_matches_oracle::<f64>(2048, 16, 16, KernelParams::new(LOpt1, 64, 8, 4).with_tcf(2));
    assert_matches_oracle::<f64>(8192, 8, 8, KernelParams::new(LOpt2, 64, 8, 4).with_tcf(8));
    assert_matches_oracle::<f32>(1024, 300, 16, KernelParams::new(LOpt2, 64, 8, 3).with_tcf(4));
}

#[test]
fn shared_tile_divides_b_traffic_by_t1() {
    let (_, s1) = sim_shape(256, 256, 4, KernelParams::new(V1, 64, 4, 1));
    let (_, s2) = sim_shape(256, 256, 4, KernelParams::new(V2, 64, 4, 4));
    let b1 = s1.array(ArrayId::B).load_instructions;
    let b2 = s2.array(ArrayId::B).load_instructions;
    assert_eq!(b1, 64 * b2);
    assert_eq!(s2.gld_efficiency(ArrayId::B), Some(1.0));
    assert_eq!(s2.shared_bank_conflict_excess, 0);
}

#[test]
fn broadcast_b_without_shared_memory() {
    let a = random::<f64>(64, 16, 1);
    let b = random::<f64>(16, 2, 2);
    let c = Matrix::zeros(64, 2);
    let p = KernelParams::new(V1, 32, 2, 1);
    let (_, s) = simulate(&gpu("V100"), &a, &b, &c, &p).unwrap();
    assert_eq!(s.gld_efficiency(ArrayId::B), Some(0.0625));
    let mut narrow = gpu("V100");
    narrow.transaction_bytes = 32;
    let (_, s) = simulate(&narrow, &a, &b, &c, &p).unwrap();
    assert_eq!(s.gld_efficiency(ArrayId::B), Some(0.25));
}

#[test]
fn prefetch_is_bitwise_equal_to_shared() {
    let a = random::<f64>(256, 256, 8);
    let b = random::<f64>(256, 8, 9);
    let (c2, s2) = sim(&a, &b, KernelParams::new(V2, 128, 8, 4));
    let (c3, s3) = sim(&a, &b, KernelParams::new(V3, 128, 8, 4));
    assert_eq!(c2, c3);
    assert_eq!(s2.array(ArrayId::A).load_instructions, s3.array(ArrayId::A).load_instructions);
    // two barriers per k-step, per pass, per block
    assert_eq!(s3.barrier_count, 2 * 2 * 2);
}

#[test]
fn all_schedules_agree_bitwise() {
    let a = random::<f32>(200, 77, 8);
    let b = random::<f32>(77, 6, 9);
    let base = sim(&a, &b, KernelParams::new(V1, 32, 3, 1)).0;
    for v in [V0, V2, V3, LOpt1, LOpt2] {
        let p = KernelParams::new(v, 32, 3, 5).with_tcf(if v.uses_tcf() { 3 } else { 1 });
        assert_eq!(sim(&a, &b, p).0, base, "{v:?}");
    }
}

#[test]
fn opt1_b_traffic_scales_with_tcf() {
    let run = |tcf| sim_shape(4096, 8, 8, KernelParams::new(LOpt1, 128, 8, 4).with_tcf(tcf)).1;
    let (s1, s4) = (run(1), run(4));
    assert_eq!(s4.loads_per_block(ArrayId::B), 4.0 * s1.loads_per_block(ArrayId::B));
    assert_eq!(s4.array(ArrayId::A).load_instructions, s1.array(ArrayId::A).load_instructions);
}

#[test]
fn opt1_with_unit_tcf_is_v3() {
    let a = random::<f64>(512, 96, 1);
    let b = random::<f64>(96, 4, 2);
    let (c1, s1) = sim(&a, &b, KernelParams::new(LOpt1, 64, 2, 4));
    let (c3, s3) = sim(&a, &b, KernelParams::new(V3, 64, 2, 4));
    assert_eq!(c1, c3);
    assert_eq!(s1, s3);
}

#[test]
fn opt2_c_tile_reloads() {
    let (_, s) = sim_shape(4096, 16, 16, KernelParams::new(LOpt2, 128, 16, 4).with_tcf(4));
    assert_eq!(c_tile_loads_per_row(s.array(ArrayId::C).load_instructions, 4096, 16), 1.0);
    let (_, s) = sim_shape(1024, 64, 8, KernelParams::new(LOpt2, 64, 2, 4));
    assert_eq!(c_tile_loads_per_row(s.array(ArrayId::C).load_instructions, 1024, 2), 4.0);
    let (_, s) = sim_shape(1024, 256, 8, KernelParams::new(LOpt2, 64, 4, 4).with_tcf(2));
    assert_eq!(c_tile_loads_per_row(s.array(ArrayId::C).load_instructions, 1024, 4), 4.0 * 2.0);
}

#[test]
fn counters_match_closed_forms() {
    for v in KernelVariant::ALL {
        for (m, k, n) in [(512, 128, 8), (1024, 64, 4), (300, 70, 6)] {
            let p = KernelParams::new(v, 64, 2, 4).with_tcf(if v.uses_tcf() { 2 } else { 1 });
            let (_, s) = sim_shape(m, k, n, p);
            let e = count_expected_loads(v, m, k, n, &p);
            assert_eq!(s.array(ArrayId::A).load_instructions, e.a, "{v:?} A");
            assert_eq!(s.array(ArrayId::B).load_instructions, e.b, "{v:?} B");
            assert_eq!(s.array(ArrayId::C).load_instructions, e.c, "{v:?} C");
            assert_eq!(s.grid_blocks, e.grid_blocks);
        }
    }
}

#[test]
fn a_loads_fully_coalesced() {
    for v in KernelVariant::ALL {
        let p = KernelParams::new(v, 64, 4, 4).with_tcf(if v.uses_tcf() { 2 } else { 1 });
        let (_, s) = sim_shape(512, 128, 8, p);
        assert_eq!(s.gld_efficiency(ArrayId::A), Some(1.0), "{v:?}");
        let a = random::<f32>(512, 64, 1);
        let (_, s) = sim(&a, &random(64, 8, 2), p);
        assert_eq!(s.gld_efficiency(ArrayId::A), Some(1.0), "{v:?} single");
    }
}

#[test]
fn row_major_tile_conflicts() {
    let a = random::<f32>(128, 64, 1);
    for t2 in [2, 4, 8] {
        let b = random::<f32>(64, t2, 2);
        let p = KernelParams::new(V2, 64, t2, 4);
        let (c_col, s) = sim(&a, &b, p);
        assert_eq!(s.shared_bank_conflict_excess, 0);
        assert_eq!(s.shared_max_passes, 1);
        let (c_row, s) = sim(&a, &b, p.with_layout(TileLayout::RowMajor));
        assert_eq!(s.shared_max_passes, t2 as u64);
        assert!(s.shared_bank_conflict_excess > 0);
        assert_eq!(c_col, c_row);
    }
}

#[test]
fn register_budget_declared() {
    let (_, s) = sim_shape(64, 64, 8, KernelParams::new(V3, 32, 8, 4));
    assert_eq!(s.max_registers_per_thread, 2 * 4 + 2 * 8);
    let (_, s) = sim_shape(64, 64, 8, KernelParams::new(LOpt2, 32, 8, 4));
    assert_eq!(s.max_registers_per_thread, 2 * 4 + 3 * 8);
}

#[test]
fn launch_errors() {
    let a = random::<f64>(64, 64, 1);
    let b = random::<f64>(64, 4, 2);
    let c = Matrix::zeros(64, 4);
    let g = gpu("K40c");
    assert!(simulate(&g, &a, &b, &c, &KernelParams::new(V1, 48, 4, 1)).is_err());
    let mut tiny = g.clone();
    tiny.shared_per_sm = 1024;
    assert!(simulate(&tiny, &a, &b, &c, &KernelParams::new(V2, 64, 4, 4)).is_err());
    assert!(simulate(&tiny, &a, &b, &c, &KernelParams::new(V1, 64, 4, 4)).is_ok());
    assert!(simulate(&g, &a, &b, &c, &KernelParams::new(V1, 32, 5, 1)).is_err());
    assert!(simulate(&g, &a, &random(63, 4, 1), &c, &KernelParams::new(V1, 32, 4, 1)).is_err());
}

#[test]
fn deterministic_across_worker_counts() {
    let a = random::<f64>(1000, 90, 1);
    let b = random::<f64>(90, 6, 2);
    let run = |workers| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .unwrap()
            .install(|| sim(&a, &b, KernelParams::new(LOpt2, 32, 4, 3).with_tcf(4)))
    };
    let (c1, s1) = run(1);
    let (c8, s8) = run(8);
    assert_eq!(c1, c8);
    assert_eq!(s1, s8);
}

#[test]
fn v1_a_traffic_never_exceeds_v0() {
    for (n, t2) in [(1, 1), (2, 1), (2, 2), (4, 2), (8, 8)] {
        let (_, s0) = sim_shape(128, 32, n, KernelParams::new(V0, 32, 1, 1));
        let (_, s1) = sim_shape(128, 32, n, KernelParams::new(V1, 32, t2, 1));
        let (t0, t1) = (s0.array(ArrayId::A).bytes_transferred, s1.array(ArrayId::A).bytes_transferred);
        assert!(t1 <= t0);
        assert_eq!(t1 == t0, t2 == 1);
    }
}

#[test]
fn barrier_counts_match_model() {
    use skinny_gemm::perfmodel::barriers_per_launch;
    for (v, tcf) in [(V2, 1), (V3, 1), (LOpt1, 2), (LOpt2, 4)] {
        let (m, k, n) = (300, 70, 6);
        let p = KernelParams::new(v, 32, 4, 2).with_tcf(tcf);
        let (_, s) = sim_shape(m, k, n, p);
        assert_eq!(s.barrier_count, barriers_per_launch(m, k, n, &p), "{v}");
    }
}
