//! Tunes (t1, t2, t3) for a 15360 x 15360 x n problem on each GPU and
//! compares the descent result with an exhaustive grid.

use skinny_gemm::tuner::{exhaustive_grid, select_t1, tune_tsm2r, Branch, Objective, Problem};
use skinny_gemm::{Catalog, Precision};

fn main() -> skinny_gemm::Result<()> {
    let catalog = Catalog::builtin();
    let (m, k, precision) = (15360, 15360, Precision::Double);
    for profile in catalog.iter() {
        let (gpu, consts) = (&profile.spec, &profile.constants);
        for n in [2, 8, 16] {
            let tuned = tune_tsm2r(m, k, n, gpu, precision, consts);
            let t1 = select_t1(m, k, n, &tuned, gpu, precision, consts);
            let kind = if tuned.branch == Branch::ComputeBranchTime1 { Objective::Compute } else { Objective::Memory };
            let problem = Problem { m, k, n, gpu, precision, consts };
            let grid = exhaustive_grid(&problem, kind, tuned.t2_bounds.0, tuned.t2_bounds.1);
            println!(
                "{:<5} n={n:<2} {:<13} t1={:<4} t2={:<2} t3={:<2} grid ratio {:.3}",
                gpu.name,
                tuned.branch.to_string(),
                t1.t1,
                tuned.params.t2,
                tuned.params.t3,
                tuned.predicted_time / grid.objective
            );
        }
    }
    Ok(())
}
