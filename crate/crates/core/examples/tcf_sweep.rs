//! Sweeps the thread coarsening factor of the two coarsened kernels over
//! growing m and reports where the modelled minimum lands.

use skinny_gemm::experiment::{sweep_table, ParamOverride, SweepConfig, SWEEP_MS};
use skinny_gemm::{Catalog, Precision};

fn main() -> skinny_gemm::Result<()> {
    let cfg = SweepConfig {
        gpu_name: "v100".into(),
        precision: Precision::Single,
        k: 16,
        n: 16,
        ms: SWEEP_MS.to_vec(),
        params: ParamOverride::default(),
        out: None,
        plot: false,
    };
    let table = sweep_table(&cfg, &Catalog::builtin())?;
    let col = |name| table.column(name).unwrap();
    let (m, v, tcf, t, best) = (col("m"), col("variant"), col("tcf"), col("predicted_time"), col("best_tcf"));
    for row in &table.rows {
        println!("m={:<9} {:<7} tcf={:<3} time {:<24} best {}", row[m], row[v], row[tcf], row[t], row[best]);
    }
    Ok(())
}
