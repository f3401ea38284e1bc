use std::path::PathBuf;

use super::{emit, maybe_plot, plot, Table};
use crate::error::Result;
use crate::gpu::{Catalog, GpuSpec};
use crate::perfmodel::{classify_t2, t2_threshold, threshold_check};
use crate::types::{format_float, Precision};

pub const MODEL_HEADER: [&str; 9] = [
    "gpu",
    "precision",
    "t2_threshold",
    "quoted_threshold",
    "threshold_discrepancy",
    "n",
    "bound_class",
    "ratio_r",
    "prediction_only",
];

/// Column counts classified by default.
pub const MODEL_NS: [usize; 4] = [2, 4, 8, 16];

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// `None` tabulates every catalog entry.
    pub gpu_name: Option<String>,
    pub precision: Precision,
    pub ns: Vec<usize>,
    pub out: Option<PathBuf>,
    pub plot: bool,
}

fn rows_for(gpu: &GpuSpec, prediction_only: bool, precision: Precision, ns: &[usize]) -> Vec<Vec<String>> {
    let thr = t2_threshold(gpu, precision);
    let check = match precision {
        Precision::Double => threshold_check(gpu),
        Precision::Single => None,
    };
    ns.iter()
        .map(|&n| {
            vec![
                gpu.name.clone(),
                precision.as_str().into(),
                format_float(thr),
                check.map(|c| format_float(c.quoted)).unwrap_or_default(),
                check.map(|c| c.discrepancy.to_string()).unwrap_or_default(),
                n.to_string(),
                classify_t2(n as f64, gpu, precision).to_string(),
                format_float(n as f64 / thr),
                prediction_only.to_string(),
            ]
        })
        .collect()
}

/// Threshold and classification of the original problem (`t2 = n`) for each
/// GPU and column count.
pub fn model_table(cfg: &ModelConfig, catalog: &Catalog) -> Result<Table> {
    let mut table = Table::new(&MODEL_HEADER);
    let ns = if cfg.ns.is_empty() { MODEL_NS.to_vec() } else { cfg.ns.clone() };
    match &cfg.gpu_name {
        Some(name) => {
            let p = catalog.get(name)?;
            table.rows = rows_for(&p.spec, p.prediction_only, cfg.precision, &ns);
        }
        None => {
            for p in catalog.iter() {
                table.rows.extend(rows_for(&p.spec, p.prediction_only, cfg.precision, &ns));
            }
        }
    }
    Ok(table)
}

pub fn cmd_model(cfg: &ModelConfig, catalog: &Catalog) -> Result<Table> {
    let table = model_table(cfg, catalog)?;
    emit(cfg.out.as_deref(), &table.to_csv()?)?;
    maybe_plot(cfg.plot, cfg.out.as_deref(), |svg| plot::ratio_plot(svg, &table));
    Ok(table)
}
