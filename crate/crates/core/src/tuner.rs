//! Parameter selection: gradient descent over continuous `(t2, t3)`, then
//! discrete sweeps for `t1` and `tcf`.

use std::fmt;

use serde::Serialize;

use crate::gpu::GpuSpec;
use crate::perfmodel::{self, BoundClass, OccupancyLimits};
use crate::types::{KernelParams, KernelVariant, LatencyConstants, Precision};

/// Upper bound on `t3` during descent and in the exhaustive grid.
pub const T3_MAX: usize = 64;
/// Largest thread block considered by [`select_t1`].
pub const MAX_BLOCK_THREADS: usize = 1024;
/// Powers of two swept by [`select_tcf`].
pub const TCF_CANDIDATES: [usize; 7] = [1, 2, 4, 8, 16, 32, 64];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Branch {
    MemoryBranch,
    ComputeBranchTime1,
    ComputeBranchTime2,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::MemoryBranch => "memory",
            Branch::ComputeBranchTime1 => "compute-time1",
            Branch::ComputeBranchTime2 => "compute-time2",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which total-time expression is minimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// `m k (n / t2) bytes / (Band util_mem)`
    Memory,
    /// `2 m k n / (Perf util_comp)`
    Compute,
}

/// Whether occupancy is the smooth bound (descent) or floored (final scoring).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Occupancy {
    Continuous,
    Floored,
}

/// Problem and hardware an objective is evaluated against.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub gpu: &'a GpuSpec,
    pub precision: Precision,
    pub consts: &'a LatencyConstants,
}

impl Problem<'_> {
    pub fn objective(&self, kind: Objective, t2: f64, t3: f64, occupancy: Occupancy) -> f64 {
        let limits = OccupancyLimits::new(t2, t3, self.precision, self.gpu, self.consts);
        let occ = match occupancy {
            Occupancy::Continuous => limits.continuous(),
            Occupancy::Floored => limits.floored() as f64,
        };
        let u = perfmodel::utilization_at(occ, t2, t3, self.precision, self.gpu, self.consts);
        let (m, k, n) = (self.m as f64, self.k as f64, self.n as f64);
        match kind {
            Objective::Memory => {
                let bytes = m * k * (n / t2) * self.precision.bytes_per_element() as f64;
                perfmodel::memory_time(bytes, self.gpu, u.util_mem)
            }
            Objective::Compute => {
                perfmodel::compute_time(perfmodel::total_flops(self.m, self.k, self.n), self.gpu, self.precision, u.util_comp)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub t2: f64,
    pub t3: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdConfig {
    pub init: f64,
    pub step: f64,
    pub tolerance: f64,
    pub h: f64,
    pub max_iterations: usize,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            init: 1.0,
            step: 0.1,
            tolerance: 1e-4,
            h: 0.01,
            max_iterations: 100_000,
        }
    }
}

/// Projected descent on a box with central-difference gradients.
///
/// The objective is normalized by its starting value so one step size works
/// across problems whose times differ by orders of magnitude. A step that
/// would increase the objective is halved until it does not; descent stops
/// once a step moves the point less than `tolerance`.
pub fn gradient_descent(
    f: impl Fn(f64, f64) -> f64,
    lo: (f64, f64),
    hi: (f64, f64),
    cfg: &GdConfig,
) -> ((f64, f64), Vec<TracePoint>) {
    let proj = |x: f64, y: f64| (x.clamp(lo.0, hi.0), y.clamp(lo.1, hi.1));
    let mut x = proj(cfg.init, cfg.init);
    let f0 = f(x.0, x.1);
    let scale = if f0.is_finite() && f0 > 0.0 { f0 } else { 1.0 };
    let norm = |p: (f64, f64)| f(p.0, p.1) / scale;
    let mut fx = norm(x);
    let mut trace = vec![TracePoint { iteration: 0, t2: x.0, t3: x.1, objective: fx * scale }];
    for iteration in 1..=cfg.max_iterations {
        let g0 = (norm(proj(x.0 + cfg.h, x.1)) - norm(proj(x.0 - cfg.h, x.1))) / (2.0 * cfg.h);
        let g1 = (norm(proj(x.0, x.1 + cfg.h)) - norm(proj(x.0, x.1 - cfg.h))) / (2.0 * cfg.h);
        let mut s = cfg.step;
        let (y, fy) = loop {
            let y = proj(x.0 - s * g0, x.1 - s * g1);
            let fy = norm(y);
            if fy <= fx || s < 1e-12 {
                break if fy <= fx { (y, fy) } else { (x, fx) };
            }
            s /= 2.0;
        };
        let moved = (y.0 - x.0).hypot(y.1 - x.1);
        x = y;
        fx = fy;
        trace.push(TracePoint { iteration, t2: x.0, t3: x.1, objective: fx * scale });
        if moved < cfg.tolerance {
            break;
        }
    }
    (x, trace)
}

/// Best integer point of an objective on `t2 in [lo, hi]`, `t3 in [1, T3_MAX]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub t2: usize,
    pub t3: usize,
    pub objective: f64,
}

pub fn exhaustive_grid(problem: &Problem<'_>, kind: Objective, t2_lo: usize, t2_hi: usize) -> GridPoint {
    let mut best = GridPoint { t2: t2_lo, t3: 1, objective: f64::INFINITY };
    for t2 in t2_lo..=t2_hi {
        for t3 in 1..=T3_MAX {
            let v = problem.objective(kind, t2 as f64, t3 as f64, Occupancy::Floored);
            if v < best.objective {
                best = GridPoint { t2, t3, objective: v };
            }
        }
    }
    best
}

/// Outcome of one descent plus its rounded, floored score.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchResult {
    pub branch: Branch,
    pub t2_bounds: (usize, usize),
    pub continuous: (f64, f64),
    pub t2: usize,
    pub t3: usize,
    pub objective: f64,
    pub trace: Vec<TracePoint>,
}

fn run_branch(problem: &Problem<'_>, branch: Branch, lo: f64, hi: f64) -> BranchResult {
    let kind = match branch {
        Branch::ComputeBranchTime1 => Objective::Compute,
        _ => Objective::Memory,
    };
    let (x, trace) = gradient_descent(
        |t2, t3| problem.objective(kind, t2, t3, Occupancy::Continuous),
        (lo, 1.0),
        (hi, T3_MAX as f64),
        &GdConfig::default(),
    );
    let t2_lo = (lo.ceil() as usize).max(1);
    let t2_hi = (hi.floor() as usize).max(t2_lo);
    let t2 = (x.0.round() as usize).clamp(t2_lo, t2_hi);
    let t3 = (x.1.round() as usize).clamp(1, T3_MAX);
    BranchResult {
        branch,
        t2_bounds: (t2_lo, t2_hi),
        continuous: x,
        t2,
        t3,
        objective: problem.objective(kind, t2 as f64, t3 as f64, Occupancy::Floored),
        trace,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneResult {
    pub params: KernelParams,
    /// Compute or memory bound by comparing `n` against the threshold.
    pub bound_class: BoundClass,
    /// The winning branch objective at the rounded point, floored occupancy.
    pub predicted_time: f64,
    pub objective_trace: Vec<TracePoint>,
    pub branch: Branch,
    pub continuous: (f64, f64),
    pub t2_bounds: (usize, usize),
    /// Every branch that was run, winner included.
    pub candidates: Vec<BranchResult>,
}

/// Chooses `(t2, t3)` for the prefetching TSM2R kernel.
///
/// When `n` is at most the threshold only the memory time is minimized with
/// `1 <= t2 <= n`. Otherwise a compute-time descent above the threshold and a
/// memory-time descent below it both run and the faster one wins. The
/// returned `t1` is a placeholder for [`select_t1`].
pub fn tune_tsm2r(
    m: usize,
    k: usize,
    n: usize,
    gpu: &GpuSpec,
    precision: Precision,
    consts: &LatencyConstants,
) -> TuneResult {
    let problem = Problem { m, k, n, gpu, precision, consts };
    let thr = perfmodel::t2_threshold(gpu, precision);
    let nf = n as f64;
    let candidates = if nf <= thr {
        vec![run_branch(&problem, Branch::MemoryBranch, 1.0, nf)]
    } else {
        // t2 can never exceed n in a launch, so both upper bounds stop there
        let hi1 = (k.min(n) as f64).max(thr.min(nf));
        vec![
            run_branch(&problem, Branch::ComputeBranchTime1, thr.min(nf), hi1),
            run_branch(&problem, Branch::ComputeBranchTime2, 1.0, thr.min(nf)),
        ]
    };
    let best = match candidates.as_slice() {
        [t1, t2] if t1.objective < t2.objective => t1,
        [_, t2] => t2,
        [only] => only,
        _ => unreachable!("one or two branches"),
    };
    let mut params = KernelParams::new(KernelVariant::V3, gpu.warp_size, best.t2, best.t3);
    params.t1 = params.t1.max(params.t3);
    TuneResult {
        params,
        bound_class: perfmodel::classify_t2(nf, gpu, precision),
        predicted_time: best.objective,
        objective_trace: best.trace.clone(),
        branch: best.branch,
        continuous: best.continuous,
        t2_bounds: best.t2_bounds,
        candidates: candidates.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct T1Choice {
    pub t1: usize,
    /// No warp multiple fits under the occupancy, or `m` is below one warp.
    pub guard: bool,
    /// `(t1, predicted_time)` for every candidate considered.
    pub ranking: Vec<(usize, f64)>,
}

/// Picks the thread-block size: every warp multiple up to the maximum
/// occupancy is ranked by predicted time, so sizes that leave part of the
/// occupancy unused lose to exact divisors. Ties go to the larger block.
pub fn select_t1(
    m: usize,
    k: usize,
    n: usize,
    tuned: &TuneResult,
    gpu: &GpuSpec,
    precision: Precision,
    consts: &LatencyConstants,
) -> T1Choice {
    let warp = gpu.warp_size;
    let occ = perfmodel::max_occupancy(&tuned.params, precision, gpu, consts) as usize;
    let t3 = tuned.params.t3;
    let candidates: Vec<usize> = (1..)
        .map(|i| i * warp)
        .take_while(|&t| t <= occ.min(MAX_BLOCK_THREADS))
        .filter(|&t| t >= t3)
        .collect();
    if m < warp || candidates.is_empty() {
        return T1Choice { t1: warp, guard: true, ranking: Vec::new() };
    }
    let ranking: Vec<(usize, f64)> = candidates
        .iter()
        .map(|&t1| {
            let p = KernelParams { t1, ..tuned.params };
            (t1, perfmodel::predict_time(m, k, n, &p, gpu, precision, consts))
        })
        .collect();
    let mut best = ranking[0];
    for &(t1, time) in &ranking[1..] {
        if time <= best.1 * (1.0 + 1e-12) {
            best = (t1, time);
        }
    }
    T1Choice { t1: best.0, guard: false, ranking }
}

/// Predicted time of `base` at each candidate `tcf`.
pub fn tcf_sweep(
    m: usize,
    k: usize,
    n: usize,
    base: &KernelParams,
    gpu: &GpuSpec,
    precision: Precision,
    consts: &LatencyConstants,
) -> Vec<(usize, f64)> {
    TCF_CANDIDATES
        .iter()
        .map(|&tcf| {
            let p = base.with_tcf(tcf);
            (tcf, perfmodel::predict_time(m, k, n, &p, gpu, precision, consts))
        })
        .collect()
}

/// The `tcf` minimizing predicted time; ties go to the smaller value.
pub fn select_tcf(
    m: usize,
    k: usize,
    n: usize,
    base: &KernelParams,
    gpu: &GpuSpec,
    precision: Precision,
    consts: &LatencyConstants,
) -> usize {
    argmin_tcf(&tcf_sweep(m, k, n, base, gpu, precision, consts))
}

pub fn argmin_tcf(sweep: &[(usize, f64)]) -> usize {
    let mut best = sweep[0];
    for &(tcf, t) in &sweep[1..] {
        if t < best.1 * (1.0 - 1e-12) {
            best = (tcf, t);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpu::Catalog;

    fn profile(name: &str) -> (GpuSpec, LatencyConstants) {
        let p = Catalog::builtin().get(name).unwrap().clone();
        (p.spec, p.constants)
    }

    #[test]
    fn descends_a_bowl() {
        let (x, trace) = gradient_descent(
            |a, b| (a - 3.0).powi(2) + (b - 5.0).powi(2) + 1.0,
            (1.0, 1.0),
            (10.0, 10.0),
            &GdConfig::default(),
        );
        assert!((x.0 - 3.0).abs() < 0.01 && (x.1 - 5.0).abs() < 0.01, "{x:?}");
        assert!(trace.windows(2).all(|w| w[1].objective <= w[0].objective));
    }

    #[test]
    fn projection_holds_bounds() {
        let (x, _) = gradient_descent(|a, b| -a - b, (1.0, 1.0), (4.0, 2.5), &GdConfig::default());
        assert_eq!(x, (4.0, 2.5));
    }

    #[test]
    fn memory_branch_below_threshold() {
        let (g, c) = profile("k40c");
        for n in [2, 4, 8, 16] {
            let r = tune_tsm2r(15360, 15360, n, &g, Precision::Double, &c);
            assert_eq!(r.branch, Branch::MemoryBranch);
            assert_eq!(r.params.t2, n);
            assert_eq!(r.candidates.len(), 1);
            assert!(r.objective_trace.windows(2).all(|w| w[1].objective <= w[0].objective));
        }
    }

    #[test]
    fn branch_switches_at_threshold() {
        let (mut g, c) = profile("k40c");
        // threshold = peak / 288 * 8, placed between n = 8 and n = 9
        g.peak_gflops_double = 8.5 * 288.0 / 8.0;
        let below = tune_tsm2r(4096, 4096, 8, &g, Precision::Double, &c);
        assert_eq!(below.branch, Branch::MemoryBranch);
        let above = tune_tsm2r(4096, 4096, 9, &g, Precision::Double, &c);
        assert_ne!(above.branch, Branch::MemoryBranch);
        assert_eq!(above.candidates.len(), 2);
        for b in &above.candidates {
            assert!(b.t2 >= b.t2_bounds.0 && b.t2 <= b.t2_bounds.1);
        }
        let time1 = &above.candidates[0];
        assert!(time1.t2 >= 9 && time1.t2_bounds == (9, 9));
        assert!(above.candidates[1].t2 <= 8);
    }

    #[test]
    fn descent_matches_integer_grid() {
        let (g, c) = profile("k40c");
        for n in [2, 4, 8, 16] {
            let problem = Problem { m: 15360, k: 15360, n, gpu: &g, precision: Precision::Double, consts: &c };
            let r = tune_tsm2r(15360, 15360, n, &g, Precision::Double, &c);
            let best = exhaustive_grid(&problem, Objective::Memory, 1, n);
            assert!(r.predicted_time <= 1.05 * best.objective, "n={n}");
        }
    }

    #[test]
    fn single_t1_candidate() {
        let (mut g, c) = profile("k40c");
        g.hw_max_threads_per_sm = 32;
        let r = tune_tsm2r(4096, 4096, 4, &g, Precision::Double, &c);
        let pick = select_t1(4096, 4096, 4, &r, &g, Precision::Double, &c);
        assert_eq!((pick.t1, pick.guard, pick.ranking.len()), (32, false, 1));
        let tiny = select_t1(16, 4096, 4, &r, &g, Precision::Double, &c);
        assert!(tiny.guard);
    }

    #[test]
    fn t1_is_a_warp_multiple_covering_t3() {
        let (g, c) = profile("p100");
        let r = tune_tsm2r(20480, 20480, 8, &g, Precision::Double, &c);
        let pick = select_t1(20480, 20480, 8, &r, &g, Precision::Double, &c);
        assert_eq!(pick.t1 % 32, 0);
        assert!(pick.t1 >= r.params.t3);
        let occ = perfmodel::max_occupancy(&r.params, Precision::Double, &g, &c) as usize;
        assert!(pick.t1 <= occ);
    }

    #[test]
    fn tcf_ties_prefer_smaller() {
        assert_eq!(argmin_tcf(&[(1, 2.0), (2, 2.0), (4, 3.0)]), 1);
        assert_eq!(argmin_tcf(&[(1, 2.0), (2, 1.0), (4, 1.0)]), 2);
    }

    #[test]
    fn tcf_pressure_grows_with_m() {
        let (g, c) = profile("v100");
        let base = KernelParams::new(KernelVariant::LOpt2, 128, 16, 4);
        assert_eq!(select_tcf(10_000, 16, 16, &base, &g, Precision::Double, &c), 1);
        assert!(select_tcf(10_000_000, 16, 16, &base, &g, Precision::Single, &c) > 1);
    }
}
