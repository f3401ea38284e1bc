use rayon::prelude::*;

use super::{emit, maybe_plot, opt_f64, plot, random_matrix, shape_rng, with_workers, ExperimentConfig, Table};
use crate::error::Result;
use crate::gpu::{Catalog, GpuProfile};
use crate::kernels;
use crate::oracle::{count_expected_loads, max_relative_error};
use crate::perfmodel::{model_report, ModelReport};
use crate::simt::{ArrayId, SimStats};
use crate::types::{format_float, validate_problem, Element, KernelVariant, Matrix, Precision};

const LEAD: [&str; 15] = [
    "gpu",
    "precision",
    "m",
    "k",
    "n",
    "shape_class",
    "variant",
    "t1",
    "t2",
    "t3",
    "tcf",
    "status",
    "max_rel_error",
    "tolerance",
    "within_tolerance",
];

const PER_ARRAY: [&str; 9] = [
    "load_instructions",
    "load_transactions",
    "store_instructions",
    "store_transactions",
    "bytes_requested",
    "bytes_transferred",
    "lane_bytes",
    "gld_efficiency",
    "expected_loads",
];

const LAUNCH: [&str; 9] = [
    "shared_load_instructions",
    "shared_store_instructions",
    "shared_bank_conflict_excess",
    "shared_max_passes",
    "fma_count",
    "barrier_count",
    "max_registers_per_thread",
    "grid_blocks",
    "threads_per_block",
];

/// Column names of the `run` table.
pub fn run_header() -> Vec<String> {
    let mut h: Vec<String> = LEAD.iter().map(|s| s.to_string()).collect();
    for id in ArrayId::ALL {
        h.extend(PER_ARRAY.iter().map(|c| format!("{}_{c}", id.as_str())));
    }
    h.extend(LAUNCH.iter().map(|s| s.to_string()));
    h.extend(ModelReport::FIELDS.iter().map(|s| s.to_string()));
    h
}

struct Inputs<T> {
    a: Matrix<T>,
    b: Matrix<T>,
    c: Matrix<T>,
}

fn inputs<T: Element>(seed: u64, index: usize, (m, k, n): (usize, usize, usize)) -> Inputs<T> {
    let mut rng = shape_rng(seed, index);
    let a = random_matrix(m, k, &mut rng);
    let b = random_matrix(k, n, &mut rng);
    let c = random_matrix(m, n, &mut rng);
    Inputs { a, b, c }
}

fn row<T: Element>(
    cfg: &ExperimentConfig,
    profile: &GpuProfile,
    (m, k, n): (usize, usize, usize),
    data: &Inputs<T>,
    variant: KernelVariant,
) -> Vec<String> {
    let params = cfg.params.resolve(variant, n);
    let shape = validate_problem(m, k, n).map(|s| s.as_str()).unwrap_or("invalid");
    let mut out = vec![
        profile.spec.name.clone(),
        cfg.precision.as_str().to_string(),
        m.to_string(),
        k.to_string(),
        n.to_string(),
        shape.to_string(),
        variant.to_string(),
        params.t1.to_string(),
        params.t2.to_string(),
        params.t3.to_string(),
        params.tcf.to_string(),
    ];
    let tolerance = 8.0 * k as f64 * T::PRECISION.epsilon();
    let result = kernels::simulate(&profile.spec, &data.a, &data.b, &data.c, &params).and_then(|(got, stats)| {
        max_relative_error(&data.a, &data.b, &data.c, &got).map(|err| (err, stats))
    });
    let (err, stats): (f64, SimStats) = match result {
        Ok(v) => v,
        Err(e) => {
            out.push(format!("error: {e}"));
            out.resize(run_header().len(), String::new());
            return out;
        }
    };
    out.push("ok".into());
    out.push(format_float(err));
    out.push(format_float(tolerance));
    out.push((err <= tolerance).to_string());

    let expected = count_expected_loads(variant, m, k, n, &params);
    for id in ArrayId::ALL {
        let s = stats.array(id);
        out.extend(
            [
                s.load_instructions,
                s.load_transactions,
                s.store_instructions,
                s.store_transactions,
                s.bytes_requested,
                s.bytes_transferred,
                s.lane_bytes,
            ]
            .iter()
            .map(u64::to_string),
        );
        out.push(opt_f64(s.gld_efficiency()));
        out.push(
            match id {
                ArrayId::A => expected.a,
                ArrayId::B => expected.b,
                ArrayId::C => expected.c,
            }
            .to_string(),
        );
    }
    out.extend(
        [
            stats.shared_load_instructions,
            stats.shared_store_instructions,
            stats.shared_bank_conflict_excess,
            stats.shared_max_passes,
            stats.fma_count,
            stats.barrier_count,
            stats.max_registers_per_thread,
            stats.grid_blocks,
            stats.threads_per_block,
        ]
        .iter()
        .map(u64::to_string),
    );
    let report = model_report(m, k, n, &params, &profile.spec, cfg.precision, &profile.constants);
    out.extend(report.values());
    out
}

fn rows_for<T: Element>(cfg: &ExperimentConfig, profile: &GpuProfile) -> Vec<Vec<String>> {
    cfg.shapes
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, &shape)| {
            if cfg.variants.is_empty() || validate_problem(shape.0, shape.1, shape.2).is_err() {
                return Vec::new();
            }
            let data = inputs::<T>(cfg.seed, i, shape);
            cfg.variants.iter().map(|&v| row(cfg, profile, shape, &data, v)).collect()
        })
        .collect()
}

/// Simulates every (shape, variant) pair and tabulates accuracy, counters
/// and the model's estimate. Infeasible parameters become an error row.
pub fn run_table(cfg: &ExperimentConfig, catalog: &Catalog) -> Result<Table> {
    let profile = catalog.get(&cfg.gpu_name)?;
    for &(m, k, n) in &cfg.shapes {
        validate_problem(m, k, n)?;
    }
    let rows = with_workers(cfg.workers, || match cfg.precision {
        Precision::Single => rows_for::<f32>(cfg, profile),
        Precision::Double => rows_for::<f64>(cfg, profile),
    })?;
    let mut table = Table::new(&run_header());
    table.rows = rows;
    Ok(table)
}

/// [`run_table`], written to `cfg.out` (or stdout) with an optional plot.
pub fn cmd_run(cfg: &ExperimentConfig, catalog: &Catalog) -> Result<Table> {
    let table = run_table(cfg, catalog)?;
    emit(cfg.out.as_deref(), &table.to_csv()?)?;
    maybe_plot(cfg.plot, cfg.out.as_deref(), |svg| plot::run_plot(svg, &table));
    Ok(table)
}
