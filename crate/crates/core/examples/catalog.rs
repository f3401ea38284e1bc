//! Lists the built-in GPU catalogue, or the directory named by the
//! catalogue environment variable when it is set.

use skinny_gemm::{Catalog, Precision};

fn main() -> skinny_gemm::Result<()> {
    let catalog = Catalog::from_env()?;
    for p in catalog.iter() {
        let s = &p.spec;
        println!(
            "{:<5} {:>3} SMs  {:>7.1} GB/s  {:>8.1} GFLOP/s double  {:>8.1} GFLOP/s single",
            s.name,
            s.num_sms,
            s.mem_bandwidth,
            s.peak_gflops(Precision::Double),
            s.peak_gflops(Precision::Single)
        );
    }
    Ok(())
}
