//! Coalescing and shared-memory bank behaviour: a broadcast B read without
//! shared memory, and column- against row-major tile layouts.

use skinny_gemm::kernels::simulate;
use skinny_gemm::simt::ArrayId;
use skinny_gemm::types::TileLayout;
use skinny_gemm::{Catalog, KernelParams, KernelVariant, Matrix};

fn main() -> skinny_gemm::Result<()> {
    let catalog = Catalog::builtin();
    let gpu = &catalog.get("v100")?.spec;
    let a = Matrix::<f64>::from_fn(64, 16, |i, j| (i + j) as f64);
    let b = Matrix::<f64>::from_fn(16, 2, |i, j| (i * j) as f64);
    let (_, s) = simulate(gpu, &a, &b, &Matrix::zeros(64, 2), &KernelParams::new(KernelVariant::V1, 32, 2, 1))?;
    println!("V1 load efficiency: A {:?}, B {:?}", s.gld_efficiency(ArrayId::A), s.gld_efficiency(ArrayId::B));

    let a = Matrix::<f32>::from_fn(128, 64, |i, j| (i * j % 13) as f32);
    for t2 in [2, 4, 8] {
        let b = Matrix::<f32>::from_fn(64, t2, |i, j| (i + j) as f32);
        let c = Matrix::zeros(128, t2);
        let p = KernelParams::new(KernelVariant::V2, 64, t2, 4);
        let (_, col) = simulate(gpu, &a, &b, &c, &p)?;
        let (_, row) = simulate(gpu, &a, &b, &c, &p.with_layout(TileLayout::RowMajor))?;
        println!(
            "t2={t2}: column-major excess {} max passes {}; row-major excess {} max passes {}",
            col.shared_bank_conflict_excess, col.shared_max_passes, row.shared_bank_conflict_excess, row.shared_max_passes
        );
    }
    Ok(())
}
