use std::ops::AddAssign;

use serde::Serialize;

/// The three global arrays a GEMM kernel touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ArrayId {
    A,
    B,
    C,
}

impl ArrayId {
    pub const ALL: [ArrayId; 3] = [ArrayId::A, ArrayId::B, ArrayId::C];

    pub fn as_str(self) -> &'static str {
        match self {
            ArrayId::A => "A",
            ArrayId::B => "B",
            ArrayId::C => "C",
        }
    }

    pub(crate) fn slot(self) -> usize {
        self as usize
    }
}

/// Global-memory counters for one array.
///
/// Instruction counts are per active lane. `bytes_requested` counts distinct
/// bytes per warp access, so a broadcast read of one element requests one
/// element's worth of bytes no matter how many lanes ask for it.
/// `lane_bytes` is the per-lane total (`load_instructions * element_bytes`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ArrayStats {
    pub load_instructions: u64,
    pub store_instructions: u64,
    pub load_transactions: u64,
    pub store_transactions: u64,
    pub lane_bytes: u64,
    pub bytes_requested: u64,
    pub bytes_transferred: u64,
    pub store_bytes_requested: u64,
    pub store_bytes_transferred: u64,
}

impl ArrayStats {
    /// Requested over transferred load bytes; `None` when nothing was loaded.
    pub fn gld_efficiency(&self) -> Option<f64> {
        (self.bytes_transferred > 0)
            .then(|| self.bytes_requested as f64 / self.bytes_transferred as f64)
    }

    pub fn gst_efficiency(&self) -> Option<f64> {
        (self.store_bytes_transferred > 0)
            .then(|| self.store_bytes_requested as f64 / self.store_bytes_transferred as f64)
    }
}

impl AddAssign for ArrayStats {
    fn add_assign(&mut self, o: Self) {
        self.load_instructions += o.load_instructions;
        self.store_instructions += o.store_instructions;
        self.load_transactions += o.load_transactions;
        self.store_transactions += o.store_transactions;
        self.lane_bytes += o.lane_bytes;
        self.bytes_requested += o.bytes_requested;
        self.bytes_transferred += o.bytes_transferred;
        self.store_bytes_requested += o.store_bytes_requested;
        self.store_bytes_transferred += o.store_bytes_transferred;
    }
}

/// Exact counters from one simulated launch.
///
/// Every field is a commutative sum (or max), so per-block stats merge to the
/// same totals in any order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SimStats {
    pub arrays: [ArrayStats; 3],
    pub shared_load_instructions: u64,
    pub shared_store_instructions: u64,
    /// Sum over shared-memory request phases of (serialized passes - 1).
    pub shared_bank_conflict_excess: u64,
    /// Worst serialization seen on any single request phase.
    pub shared_max_passes: u64,
    pub fma_count: u64,
    /// Block-level barriers, summed over blocks.
    pub barrier_count: u64,
    pub max_registers_per_thread: u64,
    pub grid_blocks: u64,
    pub threads_per_block: u64,
}

impl SimStats {
    pub fn array(&self, id: ArrayId) -> &ArrayStats {
        &self.arrays[id.slot()]
    }

    pub(crate) fn array_mut(&mut self, id: ArrayId) -> &mut ArrayStats {
        &mut self.arrays[id.slot()]
    }

    pub fn gld_efficiency(&self, id: ArrayId) -> Option<f64> {
        self.array(id).gld_efficiency()
    }

    /// Load instructions of `id` issued per thread block.
    pub fn loads_per_block(&self, id: ArrayId) -> f64 {
        self.array(id).load_instructions as f64 / self.grid_blocks.max(1) as f64
    }

    pub fn merge(&mut self, o: &SimStats) {
        for (dst, src) in self.arrays.iter_mut().zip(o.arrays.iter()) {
            *dst += *src;
        }
        self.shared_load_instructions += o.shared_load_instructions;
        self.shared_store_instructions += o.shared_store_instructions;
        self.shared_bank_conflict_excess += o.shared_bank_conflict_excess;
        self.shared_max_passes = self.shared_max_passes.max(o.shared_max_passes);
        self.fma_count += o.fma_count;
        self.barrier_count += o.barrier_count;
        self.max_registers_per_thread = self
            .max_registers_per_thread
            .max(o.max_registers_per_thread);
    }
}
