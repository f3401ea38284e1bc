//! Closed-form occupancy, utilization and timing estimates.
//!
//! Only traffic to A enters the memory terms; B and C traffic is measured by
//! the simulator and reported beside the model, never folded into it.

use std::fmt;

use serde::Serialize;

use crate::gpu::GpuSpec;
use crate::types::{format_float, validate_problem, KernelParams, KernelVariant, LatencyConstants, Precision, ShapeClass};

pub const BYTES_PER_REGISTER: f64 = 4.0;

/// Per-thread inner-loop trip count below which a non-TallRight launch is
/// treated as latency bound.
pub const LATENCY_TRIP_FLOOR: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BoundClass {
    ComputeBound,
    MemoryBound,
    LatencyBound,
}

impl BoundClass {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundClass::ComputeBound => "compute",
            BoundClass::MemoryBound => "memory",
            BoundClass::LatencyBound => "latency",
        }
    }
}

impl fmt::Display for BoundClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn bytes(p: Precision) -> f64 {
    p.bytes_per_element() as f64
}

fn clock_hz(gpu: &GpuSpec) -> f64 {
    gpu.core_clock * 1e6
}

/// Registers per thread: two `t2` sets for B, one for C, two `t3` sets for A,
/// plus the fixed setup overhead.
pub fn registers(t2: f64, t3: f64, precision: Precision, consts: &LatencyConstants) -> f64 {
    (3.0 * t2 + 2.0 * t3) * (bytes(precision) / BYTES_PER_REGISTER) + consts.reg_overhead
}

pub fn register_usage(params: &KernelParams, precision: Precision, consts: &LatencyConstants) -> f64 {
    registers(params.t2 as f64, params.t3 as f64, precision, consts)
}

/// Average shared memory per thread for a `t1 x t2` tile shared by `t1` threads.
pub fn shared_per_thread(t2: f64, precision: Precision) -> f64 {
    t2 * bytes(precision)
}

/// The three per-SM thread limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupancyLimits {
    pub hardware: f64,
    pub registers: f64,
    pub shared: f64,
}

impl OccupancyLimits {
    pub fn new(t2: f64, t3: f64, precision: Precision, gpu: &GpuSpec, consts: &LatencyConstants) -> Self {
        Self {
            hardware: gpu.hw_max_threads_per_sm as f64,
            registers: gpu.regs_per_sm as f64 / registers(t2, t3, precision, consts),
            shared: gpu.shared_per_sm as f64 / shared_per_thread(t2, precision),
        }
    }

    /// Unfloored minimum; smooth enough to differentiate.
    pub fn continuous(&self) -> f64 {
        self.hardware.min(self.registers).min(self.shared)
    }

    pub fn floored(&self) -> u64 {
        self.hardware
            .floor()
            .min(self.registers.floor())
            .min(self.shared.floor()) as u64
    }
}

/// Maximum resident threads per SM for `params`.
pub fn max_occupancy(params: &KernelParams, precision: Precision, gpu: &GpuSpec, consts: &LatencyConstants) -> u64 {
    OccupancyLimits::new(params.t2 as f64, params.t3 as f64, precision, gpu, consts).floored()
}

/// `Peak Perf / Peak Band * bytes`: the `t2` above which the inner loop is
/// compute bound.
pub fn t2_threshold(gpu: &GpuSpec, precision: Precision) -> f64 {
    gpu.peak_gflops(precision) / gpu.mem_bandwidth * bytes(precision)
}

/// Little's-law concurrency estimates at a given occupancy.
///
/// Memory concurrency is in bytes in flight per SM (each resident thread has
/// `t3` A elements outstanding); compute concurrency is in flops in flight
/// (`t2 * t3` FMAs of two flops each).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Utilization {
    pub concurrent_mem: f64,
    pub concurrent_max_mem: f64,
    pub util_mem: f64,
    pub concurrent_comp: f64,
    pub concurrent_max_comp: f64,
    pub util_comp: f64,
}

pub fn utilization_at(
    occupancy: f64,
    t2: f64,
    t3: f64,
    precision: Precision,
    gpu: &GpuSpec,
    consts: &LatencyConstants,
) -> Utilization {
    let per_sm_cycle = gpu.num_sms as f64 * clock_hz(gpu);
    let concurrent_mem = occupancy * t3 * bytes(precision);
    let concurrent_max_mem = consts.latency_mem * gpu.mem_bandwidth * 1e9 / per_sm_cycle;
    let concurrent_comp = 2.0 * occupancy * t2 * t3;
    let concurrent_max_comp = consts.latency_comp * gpu.peak_gflops(precision) * 1e9 / per_sm_cycle;
    Utilization {
        concurrent_mem,
        concurrent_max_mem,
        util_mem: (concurrent_mem / concurrent_max_mem).min(1.0),
        concurrent_comp,
        concurrent_max_comp,
        util_comp: (concurrent_comp / concurrent_max_comp).min(1.0),
    }
}

/// Utilizations at the floored maximum occupancy of `params`.
pub fn utilizations(params: &KernelParams, precision: Precision, gpu: &GpuSpec, consts: &LatencyConstants) -> Utilization {
    let occ = max_occupancy(params, precision, gpu, consts) as f64;
    utilization_at(occ, params.t2 as f64, params.t3 as f64, precision, gpu, consts)
}

/// Bytes of A the kernel streams: once per pass of `t2` columns, or once per
/// column for the inner-product kernel.
pub fn total_memory_bytes(variant: KernelVariant, m: usize, k: usize, n: usize, t2: usize, precision: Precision) -> f64 {
    let reads = match variant {
        KernelVariant::V0 => n,
        _ => n.div_ceil(t2),
    };
    m as f64 * k as f64 * reads as f64 * bytes(precision)
}

pub fn total_flops(m: usize, k: usize, n: usize) -> f64 {
    2.0 * m as f64 * k as f64 * n as f64
}

pub fn memory_time(total_bytes: f64, gpu: &GpuSpec, util_mem: f64) -> f64 {
    total_bytes / (gpu.mem_bandwidth * 1e9 * util_mem)
}

pub fn compute_time(flops: f64, gpu: &GpuSpec, precision: Precision, util_comp: f64) -> f64 {
    flops / (gpu.peak_gflops(precision) * 1e9 * util_comp)
}

/// Inner-loop trip count per thread: `tcf * k * ceil(n / t2) / t1`.
pub fn trip_count(k: usize, n: usize, params: &KernelParams) -> f64 {
    let tcf = if params.variant.uses_tcf() { params.tcf } else { 1 };
    (tcf * k * n.div_ceil(params.t2)) as f64 / params.t1 as f64
}

/// Whether a launch is dominated by warp scheduling rather than bandwidth or
/// arithmetic: any shape other than a tall A times a skinny B whose threads
/// each loop fewer than [`LATENCY_TRIP_FLOOR`] times.
pub fn is_latency_bound(m: usize, k: usize, n: usize, params: &KernelParams) -> bool {
    let shape = validate_problem(m, k, n).unwrap_or(ShapeClass::General);
    shape != ShapeClass::TallRight && trip_count(k, n, params) < LATENCY_TRIP_FLOOR
}

/// Compute or memory bound purely from the `t2` threshold.
pub fn classify_t2(t2: f64, gpu: &GpuSpec, precision: Precision) -> BoundClass {
    if t2 > t2_threshold(gpu, precision) {
        BoundClass::ComputeBound
    } else {
        BoundClass::MemoryBound
    }
}

pub fn classify_bound(
    m: usize,
    k: usize,
    n: usize,
    params: &KernelParams,
    gpu: &GpuSpec,
    precision: Precision,
) -> BoundClass {
    if is_latency_bound(m, k, n, params) {
        BoundClass::LatencyBound
    } else {
        classify_t2(params.t2 as f64, gpu, precision)
    }
}

/// Everything the model knows about one configuration, flattened for CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub r_thread: f64,
    pub s_thread: f64,
    pub max_occupancy: u64,
    /// Threads per SM actually resident: whole blocks, capped by the grid.
    pub effective_occupancy: f64,
    pub concurrent_mem: f64,
    pub concurrent_max_mem: f64,
    pub util_mem: f64,
    pub concurrent_comp: f64,
    pub concurrent_max_comp: f64,
    pub util_comp: f64,
    pub time_comp: f64,
    pub time_mem: f64,
    pub ratio_r: f64,
    pub t2_threshold: f64,
    pub bound_class: BoundClass,
    pub total_memory: f64,
    pub total_flops: f64,
    pub memory_time: f64,
    pub compute_time: f64,
    /// Warp-launch overhead, nonzero only for latency-bound launches.
    pub latency_overhead: f64,
    /// Serialized block-barrier time of the shared-tile kernels.
    pub barrier_overhead: f64,
    pub predicted_time: f64,
}

impl ModelReport {
    pub const FIELDS: [&'static str; 22] = [
        "r_thread",
        "s_thread",
        "max_occupancy",
        "effective_occupancy",
        "concurrent_mem",
        "concurrent_max_mem",
        "util_mem",
        "concurrent_comp",
        "concurrent_max_comp",
        "util_comp",
        "time_comp",
        "time_mem",
        "ratio_r",
        "t2_threshold",
        "bound_class",
        "total_memory",
        "total_flops",
        "memory_time",
        "compute_time",
        "latency_overhead",
        "barrier_overhead",
        "predicted_time",
    ];

    /// Values in [`Self::FIELDS`] order, floats in shortest round-trip form.
    pub fn values(&self) -> Vec<String> {
        let f = format_float;
        vec![
            f(self.r_thread),
            f(self.s_thread),
            self.max_occupancy.to_string(),
            f(self.effective_occupancy),
            f(self.concurrent_mem),
            f(self.concurrent_max_mem),
            f(self.util_mem),
            f(self.concurrent_comp),
            f(self.concurrent_max_comp),
            f(self.util_comp),
            f(self.time_comp),
            f(self.time_mem),
            f(self.ratio_r),
            f(self.t2_threshold),
            self.bound_class.to_string(),
            f(self.total_memory),
            f(self.total_flops),
            f(self.memory_time),
            f(self.compute_time),
            f(self.latency_overhead),
            f(self.barrier_overhead),
            f(self.predicted_time),
        ]
    }
}

/// Threads each SM can actually hold for a launch of `params` on `m` rows.
pub fn effective_occupancy(m: usize, params: &KernelParams, max_occupancy: u64, gpu: &GpuSpec) -> f64 {
    let t1 = params.t1 as u64;
    let resident = (max_occupancy / t1) * t1;
    let tcf = if params.variant.uses_tcf() { params.tcf } else { 1 };
    let threads = m.div_ceil(params.t1 * tcf) * params.t1;
    (resident as f64).min((threads as f64 / gpu.num_sms as f64).ceil())
}

/// Block barriers one launch executes: two per B tile per column pass, per
/// row iteration for the kernels that repeat the whole body.
pub fn barriers_per_launch(m: usize, k: usize, n: usize, params: &KernelParams) -> u64 {
    if !params.variant.uses_shared_tile() {
        return 0;
    }
    let tcf = if params.variant.uses_tcf() { params.tcf } else { 1 };
    let blocks = m.div_ceil(params.t1 * tcf) as u64;
    let repeats = if params.variant == KernelVariant::LOpt1 { tcf } else { 1 };
    let per_block = 2 * k.div_ceil(params.t1) * n.div_ceil(params.t2) * repeats;
    blocks * per_block as u64
}

/// Barrier time per SM, with co-resident blocks waiting concurrently.
pub fn barrier_overhead(
    m: usize,
    k: usize,
    n: usize,
    params: &KernelParams,
    occupancy: f64,
    gpu: &GpuSpec,
    consts: &LatencyConstants,
) -> f64 {
    let barriers = barriers_per_launch(m, k, n, params);
    if barriers == 0 {
        return 0.0;
    }
    let resident_blocks = occupancy / params.t1 as f64;
    consts.barrier_cycles * barriers as f64 / (gpu.num_sms as f64 * resident_blocks * clock_hz(gpu))
}

pub fn model_report(
    m: usize,
    k: usize,
    n: usize,
    params: &KernelParams,
    gpu: &GpuSpec,
    precision: Precision,
    consts: &LatencyConstants,
) -> ModelReport {
    let (t2, t3) = (params.t2 as f64, params.t3 as f64);
    let max_occ = max_occupancy(params, precision, gpu, consts);
    let peak = utilization_at(max_occ as f64, t2, t3, precision, gpu, consts);
    let per_sm = gpu.num_sms as f64 * max_occ as f64;
    let time_comp = t3 * t2 / (gpu.peak_gflops(precision) * 1e9 * per_sm);
    let time_mem = t3 * bytes(precision) / (gpu.mem_bandwidth * 1e9 * per_sm);

    let occ = effective_occupancy(m, params, max_occ, gpu);
    let util = utilization_at(occ, t2, t3, precision, gpu, consts);
    let total_memory = total_memory_bytes(params.variant, m, k, n, params.t2, precision);
    let flops = total_flops(m, k, n);
    let mem_t = memory_time(total_memory, gpu, util.util_mem);
    let comp_t = compute_time(flops, gpu, precision, util.util_comp);
    let body = if params.variant.overlaps() {
        mem_t.max(comp_t)
    } else {
        mem_t + comp_t
    };
    let bound_class = classify_bound(m, k, n, params, gpu, precision);
    let latency_overhead = if bound_class == BoundClass::LatencyBound {
        let tcf = if params.variant.uses_tcf() { params.tcf } else { 1 };
        let warps = (m.div_ceil(params.t1 * tcf) * params.t1).div_ceil(gpu.warp_size);
        consts.warp_launch_cycles * warps as f64 / (gpu.num_sms as f64 * clock_hz(gpu))
    } else {
        0.0
    };
    let barrier = barrier_overhead(m, k, n, params, occ, gpu, consts);
    ModelReport {
        r_thread: register_usage(params, precision, consts),
        s_thread: shared_per_thread(t2, precision),
        max_occupancy: max_occ,
        effective_occupancy: occ,
        concurrent_mem: peak.concurrent_mem,
        concurrent_max_mem: peak.concurrent_max_mem,
        util_mem: peak.util_mem,
        concurrent_comp: peak.concurrent_comp,
        concurrent_max_comp: peak.concurrent_max_comp,
        util_comp: peak.util_comp,
        time_comp,
        time_mem,
        ratio_r: time_comp / time_mem,
        t2_threshold: t2_threshold(gpu, precision),
        bound_class,
        total_memory,
        total_flops: flops,
        memory_time: mem_t,
        compute_time: comp_t,
        latency_overhead,
        barrier_overhead: barrier,
        predicted_time: body + latency_overhead + barrier,
    }
}

/// Predicted wall time of one launch, in seconds.
pub fn predict_time(
    m: usize,
    k: usize,
    n: usize,
    params: &KernelParams,
    gpu: &GpuSpec,
    precision: Precision,
    consts: &LatencyConstants,
) -> f64 {
    model_report(m, k, n, params, gpu, precision, consts).predicted_time
}

/// Rounded double-precision thresholds quoted in published results, by GPU.
pub const QUOTED_THRESHOLDS: [(&str, f64); 5] = [
    ("K40c", 40.0),
    ("M40", 6.0),
    ("P100", 50.0),
    ("V100", 70.0),
    ("A100", 50.0),
];

/// Formula values further than this from the quoted rounding are flagged.
pub const THRESHOLD_TOLERANCE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdCheck {
    pub formula: f64,
    pub quoted: f64,
    pub discrepancy: bool,
}

/// Compares the double-precision threshold against its quoted rounding.
pub fn threshold_check(gpu: &GpuSpec) -> Option<ThresholdCheck> {
    let quoted = QUOTED_THRESHOLDS
        .iter()
        .find(|(name, _)| name.eq_ignore_ascii_case(&gpu.name))?
        .1;
    let formula = t2_threshold(gpu, Precision::Double);
    Some(ThresholdCheck {
        formula,
        quoted,
        discrepancy: (formula - quoted).abs() > THRESHOLD_TOLERANCE,
    })
}
