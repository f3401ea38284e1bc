use std::path::PathBuf;

use super::{emit, maybe_plot, plot, ParamOverride, Table};
use crate::error::{Error, Result};
use crate::gpu::Catalog;
use crate::oracle::{c_tile_loads_per_row, count_expected_loads};
use crate::perfmodel::model_report;
use crate::tuner::{argmin_tcf, TCF_CANDIDATES};
use crate::types::{format_float, KernelVariant, Precision};

pub const SWEEP_HEADER: [&str; 20] = [
    "gpu",
    "precision",
    "m",
    "k",
    "n",
    "variant",
    "t1",
    "t2",
    "t3",
    "tcf",
    "grid_blocks",
    "bound_class",
    "latency_overhead",
    "predicted_time",
    "A_loads",
    "B_loads",
    "C_loads",
    "B_loads_per_block",
    "C_tile_loads_per_row",
    "best_tcf",
];

/// Row counts swept by default.
pub const SWEEP_MS: [usize; 4] = [10_000, 100_000, 1_000_000, 10_000_000];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub gpu_name: String,
    pub precision: Precision,
    pub k: usize,
    pub n: usize,
    /// Empty means [`SWEEP_MS`].
    pub ms: Vec<usize>,
    pub params: ParamOverride,
    pub out: Option<PathBuf>,
    pub plot: bool,
}

/// Predicted time and closed-form B/C traffic of both tall-A kernels for
/// every `(m, tcf)`, with the time-minimizing `tcf` repeated on each row of
/// its group. Traffic comes from the load-count formulas, which match the
/// simulator exactly; simulating `m = 10^7` is not needed to report it.
pub fn sweep_table(cfg: &SweepConfig, catalog: &Catalog) -> Result<Table> {
    let profile = catalog.get(&cfg.gpu_name)?;
    let (gpu, consts) = (&profile.spec, &profile.constants);
    if cfg.k == 0 || cfg.n == 0 {
        return Err(Error::ZeroDimension { name: if cfg.k == 0 { "k" } else { "n" } });
    }
    let ms = if cfg.ms.is_empty() { SWEEP_MS.to_vec() } else { cfg.ms.clone() };
    let mut table = Table::new(&SWEEP_HEADER);
    for &m in &ms {
        if m == 0 {
            return Err(Error::ZeroDimension { name: "m" });
        }
        for variant in [KernelVariant::LOpt1, KernelVariant::LOpt2] {
            let base = ParamOverride { tcf: None, ..cfg.params }.resolve(variant, cfg.n);
            base.validate(cfg.n)?;
            let reports: Vec<_> = TCF_CANDIDATES
                .iter()
                .map(|&tcf| {
                    let p = base.with_tcf(tcf);
                    (p, model_report(m, cfg.k, cfg.n, &p, gpu, cfg.precision, consts))
                })
                .collect();
            let times: Vec<(usize, f64)> = reports.iter().map(|(p, r)| (p.tcf, r.predicted_time)).collect();
            let best = argmin_tcf(&times);
            for (p, r) in &reports {
                let loads = count_expected_loads(variant, m, cfg.k, cfg.n, p);
                table.rows.push(vec![
                    gpu.name.clone(),
                    cfg.precision.as_str().into(),
                    m.to_string(),
                    cfg.k.to_string(),
                    cfg.n.to_string(),
                    variant.to_string(),
                    p.t1.to_string(),
                    p.t2.to_string(),
                    p.t3.to_string(),
                    p.tcf.to_string(),
                    loads.grid_blocks.to_string(),
                    r.bound_class.to_string(),
                    format_float(r.latency_overhead),
                    format_float(r.predicted_time),
                    loads.a.to_string(),
                    loads.b.to_string(),
                    loads.c.to_string(),
                    format_float(loads.b_per_block()),
                    format_float(c_tile_loads_per_row(loads.c, m, p.t2)),
                    best.to_string(),
                ]);
            }
        }
    }
    Ok(table)
}

pub fn cmd_sweep_tcf(cfg: &SweepConfig, catalog: &Catalog) -> Result<Table> {
    let table = sweep_table(cfg, catalog)?;
    emit(cfg.out.as_deref(), &table.to_csv()?)?;
    maybe_plot(cfg.plot, cfg.out.as_deref(), |svg| plot::sweep_plot(svg, &table));
    Ok(table)
}
