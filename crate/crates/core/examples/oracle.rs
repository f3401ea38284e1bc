//! Checks the native fast path of each kernel against the naive reference
//! on a ragged shape, in both precisions.

use skinny_gemm::kernels::native;
use skinny_gemm::oracle::max_relative_error;
use skinny_gemm::types::Element;
use skinny_gemm::{Catalog, GpuSpec, KernelParams, KernelVariant, Matrix};

fn check<T: Element>(gpu: &GpuSpec) -> skinny_gemm::Result<()> {
    let (m, k, n) = (1001, 77, 5);
    let a = Matrix::<T>::from_fn(m, k, |i, j| T::from_f64(((i * 31 + j * 17) % 101) as f64 / 101.0));
    let b = Matrix::<T>::from_fn(k, n, |i, j| T::from_f64(((i * 13 + j) % 29) as f64 / 29.0));
    let c = Matrix::<T>::from_fn(m, n, |i, j| T::from_f64((i + j) as f64 * 1e-3));
    let tolerance = 8.0 * k as f64 * T::PRECISION.epsilon();
    for v in KernelVariant::ALL {
        let p = KernelParams::new(v, 128, 2, 4).with_tcf(if v.uses_tcf() { 2 } else { 1 });
        let got = native(gpu, &a, &b, &c, &p)?;
        let err = max_relative_error(&a, &b, &c, &got)?;
        println!("{:<6} {:<7} error {err:.3e} (tolerance {tolerance:.3e})", T::PRECISION.as_str(), v.to_string());
    }
    Ok(())
}

fn main() -> skinny_gemm::Result<()> {
    let catalog = Catalog::builtin();
    let gpu = &catalog.get("p100")?.spec;
    check::<f32>(gpu)?;
    check::<f64>(gpu)
}
