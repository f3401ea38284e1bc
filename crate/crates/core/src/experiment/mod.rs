//! Experiment drivers behind the command-line tool: each command computes a
//! table, emits it as CSV and optionally renders an SVG plot from the same
//! rows.

mod model;
mod plot;
mod run;
mod sweep;
mod tune;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{format_float, Element, KernelParams, KernelVariant, Matrix, Precision};

pub use model::{cmd_model, model_table, ModelConfig, MODEL_HEADER, MODEL_NS};
pub use run::{cmd_run, run_header, run_table};
pub use sweep::{cmd_sweep_tcf, sweep_table, SweepConfig, SWEEP_HEADER, SWEEP_MS};
pub use tune::{cmd_tune, tune_tables, TuneConfig, TRACE_HEADER, TUNE_HEADER};

/// Kernel parameters given on the command line; unset fields fall back to
/// [`ParamOverride::resolve`]'s defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParamOverride {
    pub t1: Option<usize>,
    pub t2: Option<usize>,
    pub t3: Option<usize>,
    pub tcf: Option<usize>,
}

impl ParamOverride {
    pub const DEFAULT_T1: usize = 128;
    pub const DEFAULT_T2_CAP: usize = 16;
    pub const DEFAULT_T3: usize = 4;

    /// Concrete parameters for `variant` on a problem with `n` columns.
    /// `tcf` is dropped for kernels that do not use it.
    pub fn resolve(&self, variant: KernelVariant, n: usize) -> KernelParams {
        let t1 = self.t1.unwrap_or(Self::DEFAULT_T1);
        let t2 = match (self.t2, variant) {
            (Some(t2), _) => t2,
            (None, KernelVariant::V0) => 1,
            (None, _) => n.min(Self::DEFAULT_T2_CAP),
        };
        let t3 = self.t3.unwrap_or(Self::DEFAULT_T3.min(t1));
        let tcf = if variant.uses_tcf() { self.tcf.unwrap_or(1) } else { 1 };
        KernelParams::new(variant, t1, t2, t3).with_tcf(tcf)
    }
}

/// Everything `run` needs; the seed alone fixes every matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub gpu_name: String,
    pub precision: Precision,
    pub shapes: Vec<(usize, usize, usize)>,
    pub variants: Vec<KernelVariant>,
    pub params: ParamOverride,
    pub seed: u64,
    /// `None` writes the CSV to stdout.
    pub out: Option<PathBuf>,
    pub plot: bool,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(gpu_name: impl Into<String>, precision: Precision) -> Self {
        Self {
            gpu_name: gpu_name.into(),
            precision,
            shapes: Vec::new(),
            variants: KernelVariant::ALL.to_vec(),
            params: ParamOverride::default(),
            seed: 0,
            out: None,
            plot: false,
            workers: None,
        }
    }
}

/// Uniform `[0, 1)` matrix from a seeded stream.
pub fn random_matrix<T: Element>(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix<T> {
    Matrix::from_fn(rows, cols, |_, _| T::from_f64(rng.gen::<f64>()))
}

/// The generator for shape number `index` of a run seeded with `seed`.
pub fn shape_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub(crate) fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match workers {
        None => Ok(f()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::InvalidLaunch(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// A result table: fixed header, rows in deterministic order, every cell
/// already formatted (floats in shortest round-trip form).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|h| h.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Index of a header column.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Cells of column `name`, in row order.
    pub fn values(&self, name: &str) -> Vec<&str> {
        match self.column(name) {
            Some(i) => self.rows.iter().map(|r| r[i].as_str()).collect(),
            None => Vec::new(),
        }
    }

    /// UTF-8, LF line endings.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

/// Writes `bytes` to `path` via a sibling temporary file, so a failure never
/// leaves a truncated table behind. `None` goes to stdout.
pub(crate) fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
        Some(p) => {
            let mut tmp = p.as_os_str().to_owned();
            tmp.push(".partial");
            let tmp = PathBuf::from(tmp);
            fs::write(&tmp, bytes)?;
            fs::rename(&tmp, p)?;
        }
    }
    Ok(())
}

/// `out.csv` → `out.<suffix>`.
pub(crate) fn companion(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

pub(crate) fn opt_f64(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

/// Renders the plot next to `out`, logging instead of failing.
pub(crate) fn maybe_plot(enabled: bool, out: Option<&Path>, draw: impl FnOnce(&Path) -> std::result::Result<(), String>) {
    if !enabled {
        return;
    }
    let Some(out) = out else {
        log::warn!("--plot needs --out; skipping the plot");
        return;
    };
    let svg = companion(out, "svg");
    if let Err(e) = draw(&svg) {
        log::warn!("plot {} failed: {e}", svg.display());
    }
}

/// Pairs repeated `--m/--k/--n` values by position. A list of length one
/// applies to every shape; other lengths must agree.
pub fn zip_shapes(ms: &[usize], ks: &[usize], ns: &[usize]) -> Result<Vec<(usize, usize, usize)>> {
    let len = ms.len().max(ks.len()).max(ns.len());
    let pick = |name: &str, v: &[usize], i: usize| -> Result<usize> {
        match v.len() {
            0 => Err(Error::InvalidParams(format!("--{name} is required"))),
            1 => Ok(v[0]),
            l if l == len => Ok(v[i]),
            l => Err(Error::InvalidParams(format!("--{name} given {l} times, expected 1 or {len}"))),
        }
    };
    (0..len)
        .map(|i| Ok((pick("m", ms, i)?, pick("k", ks, i)?, pick("n", ns, i)?)))
        .collect()
}
