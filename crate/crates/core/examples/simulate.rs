//! Runs every kernel variant through the simulator and prints its traffic
//! counters next to the closed-form load counts.

use skinny_gemm::kernels::simulate;
use skinny_gemm::oracle::count_expected_loads;
use skinny_gemm::simt::ArrayId;
use skinny_gemm::{Catalog, KernelParams, KernelVariant, Matrix};

fn main() -> skinny_gemm::Result<()> {
    let catalog = Catalog::builtin();
    let gpu = &catalog.get("v100")?.spec;
    let (m, k, n) = (1024, 64, 8);
    let a = Matrix::<f64>::from_fn(m, k, |i, j| ((i + j) % 7) as f64);
    let b = Matrix::<f64>::from_fn(k, n, |i, j| ((i * j) % 5) as f64);
    let c = Matrix::<f64>::zeros(m, n);
    println!("variant  A loads  B loads  C loads  expected (A,B,C)  barriers");
    for v in KernelVariant::ALL {
        let p = KernelParams::new(v, 64, 4, 4).with_tcf(if v.uses_tcf() { 4 } else { 1 });
        let (_, stats) = simulate(gpu, &a, &b, &c, &p)?;
        let e = count_expected_loads(v, m, k, n, &p);
        println!(
            "{:<8} {:>8} {:>8} {:>8}  ({}, {}, {})  {}",
            v.to_string(),
            stats.array(ArrayId::A).load_instructions,
            stats.array(ArrayId::B).load_instructions,
            stats.array(ArrayId::C).load_instructions,
            e.a,
            e.b,
            e.c,
            stats.barrier_count
        );
    }
    Ok(())
}
