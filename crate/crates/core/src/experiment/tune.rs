use std::path::PathBuf;

use super::{companion, emit, maybe_plot, plot, Table};
use crate::error::Result;
use crate::gpu::Catalog;
use crate::perfmodel::{self, threshold_check};
use crate::tuner::{exhaustive_grid, select_t1, tune_tsm2r, Branch, Objective, Problem};
use crate::types::{format_float, validate_problem, KernelParams, Precision};

pub const TUNE_HEADER: [&str; 22] = [
    "gpu",
    "precision",
    "m",
    "k",
    "n",
    "t2_threshold",
    "bound_class",
    "branch",
    "t1",
    "t2",
    "t3",
    "t1_guard",
    "continuous_t2",
    "continuous_t3",
    "iterations",
    "objective",
    "grid_t2",
    "grid_t3",
    "grid_objective",
    "grid_ratio",
    "predicted_time",
    "threshold_discrepancy",
];

pub const TRACE_HEADER: [&str; 9] = ["gpu", "m", "k", "n", "branch", "iteration", "t2", "t3", "objective"];

#[derive(Debug, Clone, PartialEq)]
pub struct TuneConfig {
    pub gpu_name: String,
    pub precision: Precision,
    pub shapes: Vec<(usize, usize, usize)>,
    pub out: Option<PathBuf>,
    pub plot: bool,
}

/// Tuned parameters per shape, and the descent trace of every branch run.
pub fn tune_tables(cfg: &TuneConfig, catalog: &Catalog) -> Result<(Table, Table)> {
    let profile = catalog.get(&cfg.gpu_name)?;
    let (gpu, consts, precision) = (&profile.spec, &profile.constants, cfg.precision);
    let mut table = Table::new(&TUNE_HEADER);
    let mut trace = Table::new(&TRACE_HEADER);
    for &(m, k, n) in &cfg.shapes {
        validate_problem(m, k, n)?;
        let tuned = tune_tsm2r(m, k, n, gpu, precision, consts);
        let t1 = select_t1(m, k, n, &tuned, gpu, precision, consts);
        let params = KernelParams { t1: t1.t1, t3: tuned.params.t3.min(t1.t1), ..tuned.params };
        let problem = Problem { m, k, n, gpu, precision, consts };
        let kind = match tuned.branch {
            Branch::ComputeBranchTime1 => Objective::Compute,
            _ => Objective::Memory,
        };
        let grid = exhaustive_grid(&problem, kind, tuned.t2_bounds.0, tuned.t2_bounds.1);
        let discrepancy = match precision {
            Precision::Double => threshold_check(gpu).map(|c| c.discrepancy.to_string()).unwrap_or_default(),
            Precision::Single => String::new(),
        };
        table.rows.push(vec![
            gpu.name.clone(),
            precision.as_str().into(),
            m.to_string(),
            k.to_string(),
            n.to_string(),
            format_float(perfmodel::t2_threshold(gpu, precision)),
            tuned.bound_class.to_string(),
            tuned.branch.to_string(),
            params.t1.to_string(),
            params.t2.to_string(),
            params.t3.to_string(),
            t1.guard.to_string(),
            format_float(tuned.continuous.0),
            format_float(tuned.continuous.1),
            tuned.objective_trace.len().to_string(),
            format_float(tuned.predicted_time),
            grid.t2.to_string(),
            grid.t3.to_string(),
            format_float(grid.objective),
            format_float(tuned.predicted_time / grid.objective),
            format_float(perfmodel::predict_time(m, k, n, &params, gpu, precision, consts)),
            discrepancy,
        ]);
        for branch in &tuned.candidates {
            for p in &branch.trace {
                trace.rows.push(vec![
                    gpu.name.clone(),
                    m.to_string(),
                    k.to_string(),
                    n.to_string(),
                    branch.branch.to_string(),
                    p.iteration.to_string(),
                    format_float(p.t2),
                    format_float(p.t3),
                    format_float(p.objective),
                ]);
            }
        }
    }
    Ok((table, trace))
}

/// Writes the tuning table and its `<out>.trace.csv` companion. Nothing is
/// written unless every shape tuned successfully.
pub fn cmd_tune(cfg: &TuneConfig, catalog: &Catalog) -> Result<(Table, Table)> {
    let (table, trace) = tune_tables(cfg, catalog)?;
    let main = table.to_csv()?;
    let companion_bytes = trace.to_csv()?;
    emit(cfg.out.as_deref(), &main)?;
    if let Some(out) = &cfg.out {
        emit(Some(&companion(out, "trace.csv")), &companion_bytes)?;
    }
    maybe_plot(cfg.plot, cfg.out.as_deref(), |svg| plot::trace_plot(svg, &trace));
    Ok((table, trace))
}
