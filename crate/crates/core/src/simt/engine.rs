use std::marker::PhantomData;

use rayon::prelude::*;

use super::memory::{coalesce_warp_access, element_words, shared_access_conflicts};
use super::stats::{ArrayId, SimStats};
use crate::error::{Error, Result};
use crate::gpu::GpuSpec;
use crate::types::{Element, Matrix};

/// Selects whether a launch tracks the memory system.
///
/// Kernel bodies are generic over the mode; with [`Native`] every counter
/// update sits behind a `false` constant and compiles away.
pub trait ExecMode: Send + Sync + 'static {
    const SIMULATE: bool;
}

/// Full memory-system accounting.
#[derive(Debug, Clone, Copy, Default)]
pub struct Simulated;

/// Arithmetic only.
#[derive(Debug, Clone, Copy, Default)]
pub struct Native;

impl ExecMode for Simulated {
    const SIMULATE: bool = true;
}

impl ExecMode for Native {
    const SIMULATE: bool = false;
}

/// Grid geometry of one launch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Launch {
    pub grid_blocks: usize,
    pub threads_per_block: usize,
    /// Elements of shared memory each block allocates.
    pub shared_elems: usize,
    /// Rows each thread may own: thread `t` of block `b` owns rows
    /// `b * threads_per_block + t + i * total_threads` for `i < row_iters`.
    pub row_iters: usize,
}

impl Launch {
    pub fn total_threads(&self) -> usize {
        self.grid_blocks * self.threads_per_block
    }

    pub fn shared_bytes(&self, element_bytes: usize) -> usize {
        self.shared_elems * element_bytes
    }
}

/// Everything a launch reads: hardware, geometry and the bound arrays.
pub struct DeviceContext<'a, T> {
    pub gpu: &'a GpuSpec,
    pub launch: Launch,
    pub a: &'a Matrix<T>,
    pub b: &'a Matrix<T>,
    pub c: &'a Matrix<T>,
}

impl<T> Clone for DeviceContext<'_, T> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<T> Copy for DeviceContext<'_, T> {}

/// A kernel expressed as the work of one thread block.
pub trait BlockKernel<T: Element>: Sync {
    fn run_block<M: ExecMode>(&self, exec: &mut BlockExec<'_, T, M>);
}

const ARRAY_ALIGN: u64 = 256;

fn align_up(x: u64, a: u64) -> u64 {
    x.div_ceil(a) * a
}

/// Per-block execution state: the block's slice of C, its shared memory and
/// counters. Every instruction method runs one warp-wide operation for all
/// threads of the block, warp by warp, in lockstep.
pub struct BlockExec<'a, T, M> {
    block: usize,
    threads: usize,
    warp_size: usize,
    total_threads: usize,
    row_iters: usize,
    m: usize,
    k: usize,
    n: usize,
    a: &'a [T],
    b: &'a [T],
    c_local: Vec<T>,
    shared: Vec<T>,
    element_bytes: usize,
    transaction_bytes: usize,
    num_banks: usize,
    base: [u64; 3],
    stats: SimStats,
    addrs: Vec<Option<u64>>,
    words: Vec<Option<u64>>,
    fault: Option<Error>,
    _mode: PhantomData<M>,
}

impl<'a, T: Element, M: ExecMode> BlockExec<'a, T, M> {
    fn new(ctx: &DeviceContext<'a, T>, block: usize) -> Self {
        let (m, n) = (ctx.c.rows(), ctx.c.cols());
        let threads = ctx.launch.threads_per_block;
        let total_threads = ctx.launch.total_threads();
        let row_iters = ctx.launch.row_iters;
        let eb = T::PRECISION.bytes_per_element() as u64;
        let a_base = 0;
        let b_base = align_up(a_base + ctx.a.as_slice().len() as u64 * eb, ARRAY_ALIGN);
        let c_base = align_up(b_base + ctx.b.as_slice().len() as u64 * eb, ARRAY_ALIGN);

        let mut c_local = vec![T::zero(); row_iters * threads * n];
        for it in 0..row_iters {
            for t in 0..threads {
                let row = block * threads + t + it * total_threads;
                if row < m {
                    let slot = (it * threads + t) * n;
                    for col in 0..n {
                        c_local[slot + col] = ctx.c.get(row, col);
                    }
                }
            }
        }
        Self {
            block,
            threads,
            warp_size: ctx.gpu.warp_size,
            total_threads,
            row_iters,
            m,
            k: ctx.a.cols(),
            n,
            a: ctx.a.as_slice(),
            b: ctx.b.as_slice(),
            c_local,
            shared: vec![T::zero(); ctx.launch.shared_elems],
            element_bytes: eb as usize,
            transaction_bytes: ctx.gpu.transaction_bytes,
            num_banks: ctx.gpu.num_banks,
            base: [a_base, b_base, c_base],
            stats: SimStats::default(),
            addrs: Vec::with_capacity(ctx.gpu.warp_size),
            words: Vec::with_capacity(2 * ctx.gpu.warp_size),
            fault: None,
            _mode: PhantomData,
        }
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    pub fn total_threads(&self) -> usize {
        self.total_threads
    }

    pub fn row_iters(&self) -> usize {
        self.row_iters
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Global row handled by thread `tid` on its `it`-th row iteration.
    #[inline]
    pub fn row(&self, tid: usize, it: usize) -> usize {
        self.block * self.threads + tid + it * self.total_threads
    }

    pub fn declare_registers(&mut self, registers: usize) {
        if M::SIMULATE {
            self.stats.max_registers_per_thread =
                self.stats.max_registers_per_thread.max(registers as u64);
        }
    }

    #[inline]
    pub fn count_fma(&mut self, count: usize) {
        if M::SIMULATE {
            self.stats.fma_count += count as u64;
        }
    }

    pub fn barrier(&mut self) {
        if M::SIMULATE {
            self.stats.barrier_count += 1;
        }
    }

    fn fault(&mut self, array: &'static str, index: usize, len: usize) {
        if self.fault.is_none() {
            self.fault = Some(Error::OutOfBounds { array, index, len });
        }
    }

    /// Runs `lane` for every thread, grouping lanes into warps for coalescing.
    /// `lane` moves the data and returns the flat element index it touched.
    fn issue_global(
        &mut self,
        id: ArrayId,
        store: bool,
        mut lane: impl FnMut(usize) -> Option<usize>,
    ) {
        let eb = self.element_bytes as u64;
        let base = self.base[id.slot()];
        let mut start = 0;
        while start < self.threads {
            let end = (start + self.warp_size).min(self.threads);
            if M::SIMULATE {
                self.addrs.clear();
            }
            for t in start..end {
                let idx = lane(t);
                if M::SIMULATE {
                    self.addrs.push(idx.map(|i| base + i as u64 * eb));
                }
            }
            if M::SIMULATE {
                let c = coalesce_warp_access(&self.addrs, self.element_bytes, self.transaction_bytes);
                let s = self.stats.array_mut(id);
                if store {
                    s.store_instructions += c.active_lanes;
                    s.store_transactions += c.transactions;
                    s.store_bytes_requested += c.bytes_requested;
                    s.store_bytes_transferred += c.bytes_transferred;
                } else {
                    s.load_instructions += c.active_lanes;
                    s.load_transactions += c.transactions;
                    s.lane_bytes += c.active_lanes * eb;
                    s.bytes_requested += c.bytes_requested;
                    s.bytes_transferred += c.bytes_transferred;
                }
            }
            start = end;
        }
    }

    fn load_input(
        &mut self,
        id: ArrayId,
        mut at: impl FnMut(usize) -> Option<(usize, usize)>,
        mut sink: impl FnMut(usize, T),
    ) {
        let (src, rows, cols, name) = match id {
            ArrayId::A => (self.a, self.m, self.k, "A"),
            ArrayId::B => (self.b, self.k, self.n, "B"),
            ArrayId::C => unreachable!("C goes through load_c"),
        };
        let mut bad = None;
        self.issue_global(id, false, |t| match at(t) {
            Some((i, j)) if i < rows && j < cols => {
                let idx = i + j * rows;
                sink(t, src[idx]);
                Some(idx)
            }
            Some((i, j)) => {
                bad.get_or_insert(i + j * rows);
                sink(t, T::zero());
                None
            }
            None => {
                sink(t, T::zero());
                None
            }
        });
        if let Some(idx) = bad {
            self.fault(name, idx, src.len());
        }
    }

    /// Warp-wide load from A. `at(tid)` gives `(row, col)` or `None` when the
    /// lane is predicated off, in which case `sink` receives zero.
    pub fn load_a(
        &mut self,
        at: impl FnMut(usize) -> Option<(usize, usize)>,
        sink: impl FnMut(usize, T),
    ) {
        self.load_input(ArrayId::A, at, sink)
    }

    /// Warp-wide load from B; same contract as [`Self::load_a`].
    pub fn load_b(
        &mut self,
        at: impl FnMut(usize) -> Option<(usize, usize)>,
        sink: impl FnMut(usize, T),
    ) {
        self.load_input(ArrayId::B, at, sink)
    }

    fn c_slot(&self, tid: usize, it: usize, col: usize) -> Option<(usize, usize)> {
        let row = self.row(tid, it);
        (it < self.row_iters && row < self.m && col < self.n)
            .then(|| ((it * self.threads + tid) * self.n + col, row + col * self.m))
    }

    /// Warp-wide load from C. `at(tid)` gives `(row_iteration, col)`.
    pub fn load_c(
        &mut self,
        mut at: impl FnMut(usize) -> Option<(usize, usize)>,
        mut sink: impl FnMut(usize, T),
    ) {
        let local = std::mem::take(&mut self.c_local);
        let mut bad = None;
        let slots: Vec<_> = (0..self.threads)
            .map(|t| {
                at(t).map(|(it, col)| (self.c_slot(t, it, col), self.row(t, it) + col * self.m))
            })
            .collect();
        self.issue_global(ArrayId::C, false, |t| match slots[t] {
            Some((Some((slot, flat)), _)) => {
                sink(t, local[slot]);
                Some(flat)
            }
            Some((None, flat)) => {
                bad.get_or_insert(flat);
                sink(t, T::zero());
                None
            }
            None => {
                sink(t, T::zero());
                None
            }
        });
        self.c_local = local;
        if let Some(idx) = bad {
            self.fault("C", idx, self.m * self.n);
        }
    }

    /// Warp-wide store to C. `at(tid)` gives `(row_iteration, col, value)`.
    pub fn store_c(&mut self, mut at: impl FnMut(usize) -> Option<(usize, usize, T)>) {
        let mut local = std::mem::take(&mut self.c_local);
        let mut bad = None;
        let slots: Vec<_> = (0..self.threads)
            .map(|t| at(t).map(|(it, col, v)| (self.c_slot(t, it, col), v)))
            .collect();
        self.issue_global(ArrayId::C, true, |t| match slots[t] {
            Some((Some((slot, flat)), v)) => {
                local[slot] = v;
                Some(flat)
            }
            Some((None, _)) => {
                bad.get_or_insert(t);
                None
            }
            None => None,
        });
        self.c_local = local;
        if let Some(t) = bad {
            self.fault("C", t, self.m * self.n);
        }
    }

    fn issue_shared(&mut self, store: bool, mut lane: impl FnMut(usize) -> Option<usize>) {
        // one request phase serves num_banks words; 8-byte accesses split the warp
        let per_phase = (self.num_banks * 4 / self.element_bytes).clamp(1, self.warp_size);
        let mut start = 0;
        while start < self.threads {
            let end = (start + per_phase).min(self.threads);
            if M::SIMULATE {
                self.words.clear();
            }
            let mut active = 0u64;
            for t in start..end {
                let elem = lane(t);
                if M::SIMULATE {
                    if let Some(e) = elem {
                        active += 1;
                        self.words
                            .extend(element_words(e as u64, self.element_bytes).map(Some));
                    }
                }
            }
            if M::SIMULATE && active > 0 {
                let passes = shared_access_conflicts(&self.words, self.num_banks);
                self.stats.shared_bank_conflict_excess += passes.saturating_sub(1);
                self.stats.shared_max_passes = self.stats.shared_max_passes.max(passes);
                if store {
                    self.stats.shared_store_instructions += active;
                } else {
                    self.stats.shared_load_instructions += active;
                }
            }
            start = end;
        }
    }

    /// Warp-wide shared-memory read of element `at(tid)`.
    pub fn load_shared(
        &mut self,
        mut at: impl FnMut(usize) -> Option<usize>,
        mut sink: impl FnMut(usize, T),
    ) {
        let shared = std::mem::take(&mut self.shared);
        let len = shared.len();
        let mut bad = None;
        self.issue_shared(false, |t| match at(t) {
            Some(e) if e < len => {
                sink(t, shared[e]);
                Some(e)
            }
            Some(e) => {
                bad.get_or_insert(e);
                None
            }
            None => None,
        });
        self.shared = shared;
        if let Some(e) = bad {
            self.fault("shared", e, len);
        }
    }

    /// Warp-wide shared-memory write of `(element, value)`.
    pub fn store_shared(&mut self, mut at: impl FnMut(usize) -> Option<(usize, T)>) {
        let mut shared = std::mem::take(&mut self.shared);
        let len = shared.len();
        let mut bad = None;
        self.issue_shared(true, |t| match at(t) {
            Some((e, v)) if e < len => {
                shared[e] = v;
                Some(e)
            }
            Some((e, _)) => {
                bad.get_or_insert(e);
                None
            }
            None => None,
        });
        self.shared = shared;
        if let Some(e) = bad {
            self.fault("shared", e, len);
        }
    }

    /// Reads one shared element without issuing an instruction. Used when a
    /// broadcast value was already fetched by [`Self::load_shared`].
    pub fn shared_peek(&self, elem: usize) -> T {
        self.shared[elem]
    }
}

/// Checks a launch against the hardware it is bound to.
pub fn validate_launch(gpu: &GpuSpec, launch: &Launch, element_bytes: usize) -> Result<()> {
    if launch.threads_per_block == 0 || launch.grid_blocks == 0 {
        return Err(Error::InvalidLaunch("empty grid".into()));
    }
    if !launch.threads_per_block.is_multiple_of(gpu.warp_size) {
        return Err(Error::InvalidLaunch(format!(
            "{} threads per block is not a multiple of the warp size {}",
            launch.threads_per_block, gpu.warp_size
        )));
    }
    if launch.threads_per_block > gpu.hw_max_threads_per_sm {
        return Err(Error::InvalidLaunch(format!(
            "{} threads per block exceeds {} threads per SM",
            launch.threads_per_block, gpu.hw_max_threads_per_sm
        )));
    }
    let needed = launch.shared_bytes(element_bytes);
    if needed > gpu.shared_per_sm {
        return Err(Error::SharedMemoryOverflow {
            needed,
            available: gpu.shared_per_sm,
        });
    }
    Ok(())
}

/// Executes `kernel` over the whole grid and returns the updated C with the
/// merged counters.
///
/// Blocks run on the current rayon pool. Each block owns a private copy of
/// its C rows and its counters; results are merged in block order, so the
/// output is identical for any worker count.
pub fn run_kernel<T, M, K>(ctx: &DeviceContext<'_, T>, kernel: &K) -> Result<(Matrix<T>, SimStats)>
where
    T: Element,
    M: ExecMode,
    K: BlockKernel<T>,
{
    let eb = T::PRECISION.bytes_per_element();
    validate_launch(ctx.gpu, &ctx.launch, eb)?;
    let (m, k, n) = (ctx.a.rows(), ctx.a.cols(), ctx.b.cols());
    if ctx.b.rows() != k || ctx.c.rows() != m || ctx.c.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "A {}x{}, B {}x{}, C {}x{}",
            m,
            k,
            ctx.b.rows(),
            n,
            ctx.c.rows(),
            ctx.c.cols()
        )));
    }

    let blocks: Vec<_> = (0..ctx.launch.grid_blocks)
        .into_par_iter()
        .map(|block| {
            let mut exec = BlockExec::<T, M>::new(ctx, block);
            kernel.run_block(&mut exec);
            (exec.c_local, exec.stats, exec.fault)
        })
        .collect();

    let mut c = ctx.c.clone();
    let mut stats = SimStats {
        grid_blocks: ctx.launch.grid_blocks as u64,
        threads_per_block: ctx.launch.threads_per_block as u64,
        ..SimStats::default()
    };
    let threads = ctx.launch.threads_per_block;
    let total = ctx.launch.total_threads();
    for (block, (local, block_stats, fault)) in blocks.into_iter().enumerate() {
        if let Some(err) = fault {
            return Err(err);
        }
        stats.merge(&block_stats);
        for it in 0..ctx.launch.row_iters {
            for t in 0..threads {
                let row = block * threads + t + it * total;
                if row < m {
                    let slot = (it * threads + t) * n;
                    for col in 0..n {
                        c.set(row, col, local[slot + col]);
                    }
                }
            }
        }
    }
    Ok((c, stats))
}
