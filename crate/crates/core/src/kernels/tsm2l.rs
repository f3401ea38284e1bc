use super::tsm2r::{load_a_chunk, load_c_regs, multiply_chunk, store_c_regs};
use super::{Chunk, Geometry, Regs};
use crate::simt::{BlockExec, ExecMode};
use crate::types::Element;

/// Loads rows `j..j+t1` of B, columns `p..p+w`, into per-thread registers.
fn fetch_b<T: Element, M: ExecMode>(
    exec: &mut BlockExec<'_, T, M>,
    g: &Geometry,
    next_b: &mut Regs<T>,
    j: usize,
    p: usize,
    w: usize,
) {
    for c in 0..w {
        exec.load_b(|t| (j + t < g.k).then_some((j + t, p + c)), |t, v| next_b.set(t, c, v));
    }
}

fn put_b<T: Element, M: ExecMode>(
    exec: &mut BlockExec<'_, T, M>,
    g: &Geometry,
    next_b: &Regs<T>,
    j: usize,
    w: usize,
) {
    for c in 0..w {
        exec.store_shared(|t| (j + t < g.k).then(|| (g.tile_index(t, c), next_b.get(t, c))));
    }
}

/// Double-buffered A registers walking a fixed chunk sequence.
struct AStream<T> {
    seq: Vec<Chunk>,
    pos: usize,
    curr: Regs<T>,
    next: Regs<T>,
}

impl<T: Element> AStream<T> {
    fn start<M: ExecMode>(
        exec: &mut BlockExec<'_, T, M>,
        g: &Geometry,
        rows: &[Vec<Option<usize>>],
        seq: Vec<Chunk>,
    ) -> Self {
        let threads = exec.threads();
        let mut s = Self {
            seq,
            pos: 0,
            curr: Regs::new(threads, g.t3),
            next: Regs::new(threads, g.t3),
        };
        if let Some(&first) = s.seq.first() {
            load_a_chunk(exec, &mut s.curr, &rows[first.it], first);
        }
        s
    }

    /// Prefetches the chunk after the current one, multiplies the current
    /// one into `creg`, then rotates the buffers.
    fn step<M: ExecMode>(
        &mut self,
        exec: &mut BlockExec<'_, T, M>,
        g: &Geometry,
        rows: &[Vec<Option<usize>>],
        creg: &mut Regs<T>,
        w: usize,
    ) {
        let ch = self.seq[self.pos];
        let upcoming = self.seq.get(self.pos + 1).copied();
        if let Some(nx) = upcoming {
            load_a_chunk(exec, &mut self.next, &rows[nx.it], nx);
        }
        multiply_chunk(exec, g, creg, &self.curr, &rows[ch.it], ch, w);
        if upcoming.is_some() {
            self.curr.copy_from(&self.next);
        }
        self.pos += 1;
    }
}

/// The prefetching TSM2R body, repeated for each horizontal tile of rows the
/// thread owns. With one row iteration this is the TSM2R prefetch kernel.
pub(super) fn opt1<T: Element, M: ExecMode>(exec: &mut BlockExec<'_, T, M>, g: &Geometry) {
    exec.declare_registers(2 * g.t3 + 2 * g.t2);
    let rows = super::owned_rows(exec);
    let threads = exec.threads();
    let mut creg = Regs::new(threads, g.t2);
    let mut next_b = Regs::new(threads, g.t2);
    for it in 0..exec.row_iters() {
        for (p, w) in g.passes() {
            load_c_regs(exec, &mut creg, &rows[it], it, p, w);
            fetch_b(exec, g, &mut next_b, 0, p, w);
            put_b(exec, g, &next_b, 0, w);
            let seq = g.tiles().flat_map(|j| g.chunks(j, it)).collect();
            let mut a = AStream::start(exec, g, &rows, seq);
            for j in g.tiles() {
                exec.barrier();
                let more = j + g.t1 < g.k;
                if more {
                    fetch_b(exec, g, &mut next_b, j + g.t1, p, w);
                }
                for _ in g.chunks(j, it) {
                    a.step(exec, g, &rows, &mut creg, w);
                }
                exec.barrier();
                if more {
                    put_b(exec, g, &next_b, j + g.t1, w);
                }
            }
            store_c_regs(exec, &creg, &rows[it], it, p, w);
        }
    }
}

/// Row tiles interleaved inside each k-step: every B tile is fetched once
/// per block and C is read, updated and written back per tile, with the
/// next row's C prefetched into registers.
pub(super) fn opt2<T: Element, M: ExecMode>(exec: &mut BlockExec<'_, T, M>, g: &Geometry) {
    exec.declare_registers(2 * g.t3 + 3 * g.t2);
    let rows = super::owned_rows(exec);
    let threads = exec.threads();
    let iters = exec.row_iters();
    let mut creg = Regs::new(threads, g.t2);
    let mut next_c = Regs::new(threads, g.t2);
    let mut next_b = Regs::new(threads, g.t2);
    for (p, w) in g.passes() {
        fetch_b(exec, g, &mut next_b, 0, p, w);
        put_b(exec, g, &next_b, 0, w);
        let seq = g
            .tiles()
            .flat_map(|j| (0..iters).flat_map(move |it| g.chunks(j, it)))
            .collect();
        let mut a = AStream::start(exec, g, &rows, seq);
        for j in g.tiles() {
            exec.barrier();
            let more = j + g.t1 < g.k;
            if more {
                fetch_b(exec, g, &mut next_b, j + g.t1, p, w);
            }
            load_c_regs(exec, &mut creg, &rows[0], 0, p, w);
            for it in 0..iters {
                if it + 1 < iters {
                    load_c_regs(exec, &mut next_c, &rows[it + 1], it + 1, p, w);
                }
                for _ in g.chunks(j, it) {
                    a.step(exec, g, &rows, &mut creg, w);
                }
                store_c_regs(exec, &creg, &rows[it], it, p, w);
                creg.copy_from(&next_c);
            }
            exec.barrier();
            if more {
                put_b(exec, g, &next_b, j + g.t1, w);
            }
        }
    }
}
