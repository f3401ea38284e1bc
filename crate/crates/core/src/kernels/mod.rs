//! The tall-and-skinny GEMM kernels, written once as block routines for the
//! SIMT executor and runnable either simulated or native.

mod tsm2l;
mod tsm2r;

use crate::error::{Error, Result};
use crate::gpu::GpuSpec;
use crate::simt::{run_kernel, BlockExec, BlockKernel, DeviceContext, ExecMode, Launch, Native, SimStats, Simulated};
use crate::types::{Element, KernelParams, KernelVariant, Matrix, TileLayout};

/// Problem shape plus tuning parameters, as seen by every block.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Geometry {
    pub k: usize,
    pub n: usize,
    pub t1: usize,
    pub t2: usize,
    pub t3: usize,
    pub layout: TileLayout,
}

impl Geometry {
    /// Shared-memory slot of tile element (`row`, `col`).
    #[inline]
    pub fn tile_index(&self, row: usize, col: usize) -> usize {
        match self.layout {
            TileLayout::ColumnMajor => row + col * self.t1,
            TileLayout::RowMajor => row * self.t2 + col,
        }
    }

    /// Column passes as `(first_col, width)`; the last one may be narrow.
    pub fn passes(&self) -> impl Iterator<Item = (usize, usize)> {
        let (n, t2) = (self.n, self.t2);
        (0..n).step_by(t2).map(move |p| (p, t2.min(n - p)))
    }

    pub fn tiles(&self) -> impl Iterator<Item = usize> {
        (0..self.k).step_by(self.t1)
    }

    /// A-chunks of tile `j` for row iteration `it`, in consumption order.
    pub fn chunks(&self, j: usize, it: usize) -> impl Iterator<Item = Chunk> {
        let end = (j + self.t1).min(self.k);
        let t3 = self.t3;
        (j..end)
            .step_by(t3)
            .map(move |l| Chunk { it, tile: j, start: l, len: t3.min(end - l) })
    }
}

/// A run of consecutive A elements one thread holds in registers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Chunk {
    pub it: usize,
    pub tile: usize,
    pub start: usize,
    pub len: usize,
}

/// One register array per thread of a block.
pub(crate) struct Regs<T> {
    width: usize,
    data: Vec<T>,
}

impl<T: Element> Regs<T> {
    pub fn new(threads: usize, width: usize) -> Self {
        Self {
            width,
            data: vec![T::zero(); threads * width],
        }
    }

    #[inline]
    pub fn get(&self, t: usize, i: usize) -> T {
        self.data[t * self.width + i]
    }

    #[inline]
    pub fn set(&mut self, t: usize, i: usize, v: T) {
        self.data[t * self.width + i] = v;
    }

    pub fn copy_from(&mut self, other: &Self) {
        self.data.copy_from_slice(&other.data);
    }
}

#[inline]
pub(crate) fn madd<T: Element>(acc: T, a: T, b: T) -> T {
    acc + a * b
}

/// Row of A owned by each thread on each row iteration, `None` past `m`.
pub(crate) fn owned_rows<T: Element, M: ExecMode>(exec: &BlockExec<'_, T, M>) -> Vec<Vec<Option<usize>>> {
    (0..exec.row_iters())
        .map(|it| {
            (0..exec.threads())
                .map(|t| Some(exec.row(t, it)).filter(|&r| r < exec.m()))
                .collect()
        })
        .collect()
}

/// Launch geometry of `params` for an `m`-row problem with `n` output columns.
pub fn launch_for(params: &KernelParams, m: usize, n: usize) -> Launch {
    let rows_per_block = params.t1 * params.tcf.max(1);
    let shared_elems = if params.variant.uses_shared_tile() {
        params.t1 * params.t2.min(n)
    } else {
        0
    };
    Launch {
        grid_blocks: m.div_ceil(rows_per_block).max(1),
        threads_per_block: params.t1,
        shared_elems,
        row_iters: if params.variant.uses_tcf() { params.tcf } else { 1 },
    }
}

struct Kernel {
    variant: KernelVariant,
    geo: Geometry,
}

impl<T: Element> BlockKernel<T> for Kernel {
    fn run_block<M: ExecMode>(&self, exec: &mut BlockExec<'_, T, M>) {
        let g = &self.geo;
        match self.variant {
            KernelVariant::V0 => tsm2r::v0(exec, g),
            KernelVariant::V1 => tsm2r::v1(exec, g),
            KernelVariant::V2 => tsm2r::v2(exec, g),
            KernelVariant::V3 | KernelVariant::LOpt1 => tsm2l::opt1(exec, g),
            KernelVariant::LOpt2 => tsm2l::opt2(exec, g),
        }
    }
}

fn run<T: Element, M: ExecMode>(
    gpu: &GpuSpec,
    a: &Matrix<T>,
    b: &Matrix<T>,
    c: &Matrix<T>,
    params: &KernelParams,
) -> Result<(Matrix<T>, SimStats)> {
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    if b.rows() != k || c.rows() != m || c.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "A is {m}x{k}, B is {}x{n}, C is {}x{}",
            b.rows(),
            c.rows(),
            c.cols()
        )));
    }
    if m == 0 || k == 0 || n == 0 {
        return Err(Error::ZeroDimension {
            name: if m == 0 { "m" } else if k == 0 { "k" } else { "n" },
        });
    }
    params.validate(n)?;
    let launch = launch_for(params, m, n);
    let ctx = DeviceContext { gpu, launch, a, b, c };
    let kernel = Kernel {
        variant: params.variant,
        geo: Geometry {
            k,
            n,
            t1: params.t1,
            t2: params.t2,
            t3: params.t3,
            layout: params.tile_layout,
        },
    };
    run_kernel::<T, M, _>(&ctx, &kernel)
}

/// Runs a kernel through the memory-system model: returns `C + A * B` and
/// the exact traffic counters.
pub fn simulate<T: Element>(
    gpu: &GpuSpec,
    a: &Matrix<T>,
    b: &Matrix<T>,
    c: &Matrix<T>,
    params: &KernelParams,
) -> Result<(Matrix<T>, SimStats)> {
    run::<T, Simulated>(gpu, a, b, c, params)
}

/// Runs the same kernel body with accounting compiled out.
pub fn native<T: Element>(
    gpu: &GpuSpec,
    a: &Matrix<T>,
    b: &Matrix<T>,
    c: &Matrix<T>,
    params: &KernelParams,
) -> Result<Matrix<T>> {
    run::<T, Native>(gpu, a, b, c, params).map(|(c, _)| c)
}
