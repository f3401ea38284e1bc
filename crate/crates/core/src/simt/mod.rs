//! A lockstep SIMT executor with global-memory coalescing and shared-memory
//! bank accounting.

mod engine;
pub mod memory;
pub mod stats;

pub use engine::{
    run_kernel, validate_launch, BlockExec, BlockKernel, DeviceContext, ExecMode, Launch, Native,
    Simulated,
};
pub use memory::{coalesce_warp_access, element_words, shared_access_conflicts, Coalesced};
pub use stats::{ArrayId, ArrayStats, SimStats};
