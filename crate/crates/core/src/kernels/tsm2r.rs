use super::{madd, owned_rows, Chunk, Geometry, Regs};
use crate::simt::{BlockExec, ExecMode};
use crate::types::Element;

/// Inner product: each C element is a dot product over k, so every A
/// element is read once per column of B.
pub(super) fn v0<T: Element, M: ExecMode>(exec: &mut BlockExec<'_, T, M>, g: &Geometry) {
    exec.declare_registers(3);
    let rows = owned_rows(exec);
    let rows = &rows[0];
    let active = rows.iter().flatten().count();
    let threads = exec.threads();
    let mut acc = vec![T::zero(); threads];
    let mut a = vec![T::zero(); threads];
    for i in 0..g.n {
        exec.load_c(|t| rows[t].map(|_| (0, i)), |t, v| acc[t] = v);
        for j in 0..g.k {
            exec.load_a(|t| rows[t].map(|r| (r, j)), |t, v| a[t] = v);
            exec.load_b(|t| rows[t].map(|_| (j, i)), |t, v| acc[t] = madd(acc[t], a[t], v));
            exec.count_fma(active);
        }
        exec.store_c(|t| rows[t].map(|_| (0, i, acc[t])));
    }
}

/// Outer product: one read of each A element per pass of `t2` columns.
pub(super) fn v1<T: Element, M: ExecMode>(exec: &mut BlockExec<'_, T, M>, g: &Geometry) {
    exec.declare_registers(g.t2 + 2);
    let rows = owned_rows(exec);
    let rows = &rows[0];
    let active = rows.iter().flatten().count();
    let threads = exec.threads();
    let mut creg = Regs::new(threads, g.t2);
    let mut a = vec![T::zero(); threads];
    for (p, w) in g.passes() {
        load_c_regs(exec, &mut creg, rows, 0, p, w);
        for i in 0..g.k {
            exec.load_a(|t| rows[t].map(|r| (r, i)), |t, v| a[t] = v);
            for c in 0..w {
                exec.load_b(
                    |t| rows[t].map(|_| (i, p + c)),
                    |t, v| creg.set(t, c, madd(creg.get(t, c), a[t], v)),
                );
            }
            exec.count_fma(active * w);
        }
        store_c_regs(exec, &creg, rows, 0, p, w);
    }
}

/// Shared B tile of `t1 x t2`, loaded cooperatively once per k-step.
pub(super) fn v2<T: Element, M: ExecMode>(exec: &mut BlockExec<'_, T, M>, g: &Geometry) {
    exec.declare_registers(g.t2 + g.t3 + 1);
    let rows = owned_rows(exec);
    let rows = &rows[0];
    let threads = exec.threads();
    let mut creg = Regs::new(threads, g.t2);
    let mut areg = Regs::new(threads, g.t3);
    let mut staged = Regs::new(threads, 1);
    for (p, w) in g.passes() {
        load_c_regs(exec, &mut creg, rows, 0, p, w);
        for j in g.tiles() {
            exec.barrier();
            for c in 0..w {
                exec.load_b(|t| (j + t < g.k).then_some((j + t, p + c)), |t, v| staged.set(t, 0, v));
                exec.store_shared(|t| (j + t < g.k).then(|| (g.tile_index(t, c), staged.get(t, 0))));
            }
            exec.barrier();
            for ch in g.chunks(j, 0) {
                load_a_chunk(exec, &mut areg, rows, ch);
                multiply_chunk(exec, g, &mut creg, &areg, rows, ch, w);
            }
        }
        store_c_regs(exec, &creg, rows, 0, p, w);
    }
}

pub(super) fn load_c_regs<T: Element, M: ExecMode>(
    exec: &mut BlockExec<'_, T, M>,
    creg: &mut Regs<T>,
    rows: &[Option<usize>],
    it: usize,
    p: usize,
    w: usize,
) {
    for c in 0..w {
        exec.load_c(|t| rows[t].map(|_| (it, p + c)), |t, v| creg.set(t, c, v));
    }
}

pub(super) fn store_c_regs<T: Element, M: ExecMode>(
    exec: &mut BlockExec<'_, T, M>,
    creg: &Regs<T>,
    rows: &[Option<usize>],
    it: usize,
    p: usize,
    w: usize,
) {
    for c in 0..w {
        exec.store_c(|t| rows[t].map(|_| (it, p + c, creg.get(t, c))));
    }
}

pub(super) fn load_a_chunk<T: Element, M: ExecMode>(
    exec: &mut BlockExec<'_, T, M>,
    areg: &mut Regs<T>,
    rows: &[Option<usize>],
    ch: Chunk,
) {
    for q in 0..ch.len {
        exec.load_a(|t| rows[t].map(|r| (r, ch.start + q)), |t, v| areg.set(t, q, v));
    }
}

/// `C[:, p..p+w] += A-chunk x currB[chunk rows, ..w]` from shared memory.
/// Every lane of a warp reads the same tile element, which broadcasts.
pub(super) fn multiply_chunk<T: Element, M: ExecMode>(
    exec: &mut BlockExec<'_, T, M>,
    g: &Geometry,
    creg: &mut Regs<T>,
    areg: &Regs<T>,
    rows: &[Option<usize>],
    ch: Chunk,
    w: usize,
) {
    let active = rows.iter().flatten().count();
    let base = ch.start - ch.tile;
    for q in 0..ch.len {
        for c in 0..w {
            let slot = g.tile_index(base + q, c);
            exec.load_shared(
                |t| rows[t].map(|_| slot),
                |t, b| creg.set(t, c, madd(creg.get(t, c), areg.get(t, q), b)),
            );
        }
        exec.count_fma(active * w);
    }
}
