//! Brute-force reference GEMM and closed-form load counts.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{Element, KernelParams, KernelVariant, Matrix};

fn check_dims<T: Element>(a: &Matrix<T>, b: &Matrix<T>, c0: &Matrix<T>) -> Result<()> {
    if a.cols() != b.rows() || c0.rows() != a.rows() || c0.cols() != b.cols() {
        return Err(Error::DimensionMismatch(format!(
            "A {}x{}, B {}x{}, C {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols(),
            c0.rows(),
            c0.cols()
        )));
    }
    Ok(())
}

/// `C0 + A * B` by the textbook triple loop, accumulated in `f64`.
pub fn naive_gemm<T: Element>(a: &Matrix<T>, b: &Matrix<T>, c0: &Matrix<T>) -> Result<Matrix<T>> {
    check_dims(a, b, c0)?;
    let k = a.cols();
    Ok(Matrix::from_fn(c0.rows(), c0.cols(), |i, j| {
        let mut acc = c0.get(i, j).to_f64();
        for l in 0..k {
            acc += a.get(i, l).to_f64() * b.get(l, j).to_f64();
        }
        T::from_f64(acc)
    }))
}

/// Largest elementwise error of `got` against the oracle, relative to
/// `|C0| + |A| * |B|` (the magnitude a length-k dot product is rounded
/// against). Entries whose scale is zero are compared absolutely.
pub fn max_relative_error<T: Element>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    c0: &Matrix<T>,
    got: &Matrix<T>,
) -> Result<f64> {
    check_dims(a, b, c0)?;
    if got.rows() != c0.rows() || got.cols() != c0.cols() {
        return Err(Error::DimensionMismatch(format!(
            "result is {}x{}, expected {}x{}",
            got.rows(),
            got.cols(),
            c0.rows(),
            c0.cols()
        )));
    }
    let mut worst = 0.0f64;
    for j in 0..c0.cols() {
        for i in 0..c0.rows() {
            let mut exact = c0.get(i, j).to_f64();
            let mut scale = exact.abs();
            for l in 0..a.cols() {
                let p = a.get(i, l).to_f64() * b.get(l, j).to_f64();
                exact += p;
                scale += p.abs();
            }
            let diff = (got.get(i, j).to_f64() - exact).abs();
            let rel = if scale > 0.0 { diff / scale } else { diff };
            if rel.is_nan() {
                return Ok(f64::INFINITY);
            }
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

/// Global load instructions a kernel should issue, per array.
///
/// On divisible shapes these are the textbook closed forms. Otherwise the
/// same formulas with ceilings apply (partial passes, partial blocks) and
/// `divisible` is false.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExpectedLoads {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub grid_blocks: u64,
    pub divisible: bool,
}

impl ExpectedLoads {
    pub fn b_per_block(&self) -> f64 {
        self.b as f64 / self.grid_blocks as f64
    }
}

/// Closed-form load counts for `variant` on an `m x k x n` problem.
pub fn count_expected_loads(
    variant: KernelVariant,
    m: usize,
    k: usize,
    n: usize,
    params: &KernelParams,
) -> ExpectedLoads {
    let (t1, t2) = (params.t1 as u64, params.t2 as u64);
    let tcf = if variant.uses_tcf() { params.tcf as u64 } else { 1 };
    let (m, k, n) = (m as u64, k as u64, n as u64);
    let passes = n.div_ceil(t2);
    let rows_per_block = t1 * tcf;
    let blocks = m.div_ceil(rows_per_block);
    let k_tiles = k.div_ceil(t1);

    let mut divisible = n % t2 == 0 && m % rows_per_block == 0;
    if variant.uses_shared_tile() {
        divisible &= k % t1 == 0 || k < t1;
    }
    let (a, b, c) = match variant {
        KernelVariant::V0 => (m * k * n, m * k * n, m * n),
        KernelVariant::V1 => (m * k * passes, m * k * n, m * n),
        // every block streams all of B once per row tile it owns
        KernelVariant::V2 | KernelVariant::V3 | KernelVariant::LOpt1 => {
            (m * k * passes, blocks * tcf * k * n, m * n)
        }
        KernelVariant::LOpt2 => (m * k * passes, blocks * k * n, m * n * k_tiles),
    };
    ExpectedLoads {
        a,
        b,
        c,
        grid_blocks: blocks,
        divisible,
    }
}

/// Times each thread reloads its `t2`-wide register tile of C: total C load
/// instructions over `m * t2`.
pub fn c_tile_loads_per_row(c_load_instructions: u64, m: usize, t2: usize) -> f64 {
    c_load_instructions as f64 / (m * t2) as f64
}
