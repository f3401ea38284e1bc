//! GPU hardware descriptions and the on-disk catalog.
//!
//! A catalog is a directory of TOML files, one per GPU. Top-level keys are the
//! [`GpuSpec`] field names. Two optional tables ride along: `[provenance]`
//! records where non-published numbers came from, and `[latency]` overrides
//! fields of [`LatencyConstants`] for that GPU.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::types::{LatencyConstants, Precision};

/// Environment variable naming a catalog directory that replaces the built-in one.
pub const CATALOG_ENV: &str = "SKINNY_GEMM_CATALOG";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GpuSpec {
    pub name: String,
    /// GFLOPS.
    pub peak_gflops_single: f64,
    /// GFLOPS.
    pub peak_gflops_double: f64,
    /// GB/s.
    pub mem_bandwidth: f64,
    pub num_sms: usize,
    /// MHz.
    pub core_clock: f64,
    /// 32-bit registers per SM.
    pub regs_per_sm: usize,
    /// Bytes of shared memory per SM.
    pub shared_per_sm: usize,
    pub hw_max_threads_per_sm: usize,
    pub warp_size: usize,
    pub num_banks: usize,
    pub transaction_bytes: usize,
}

impl GpuSpec {
    pub fn peak_gflops(&self, precision: Precision) -> f64 {
        match precision {
            Precision::Single => self.peak_gflops_single,
            Precision::Double => self.peak_gflops_double,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |reason: String| Error::GpuSpec {
            gpu: self.name.clone(),
            reason,
        };
        let reals = [
            ("peak_gflops_single", self.peak_gflops_single),
            ("peak_gflops_double", self.peak_gflops_double),
            ("mem_bandwidth", self.mem_bandwidth),
            ("core_clock", self.core_clock),
        ];
        for (key, v) in reals {
            if !(v.is_finite() && v > 0.0) {
                return Err(err(format!("{key} must be > 0, got {v}")));
            }
        }
        let counts = [
            ("num_sms", self.num_sms),
            ("regs_per_sm", self.regs_per_sm),
            ("shared_per_sm", self.shared_per_sm),
            ("hw_max_threads_per_sm", self.hw_max_threads_per_sm),
            ("warp_size", self.warp_size),
            ("num_banks", self.num_banks),
            ("transaction_bytes", self.transaction_bytes),
        ];
        for (key, v) in counts {
            if v == 0 {
                return Err(err(format!("{key} must be > 0")));
            }
        }
        if !self.warp_size.is_power_of_two() {
            return Err(err(format!("warp_size {} is not a power of two", self.warp_size)));
        }
        if !self.num_banks.is_power_of_two() {
            return Err(err(format!("num_banks {} is not a power of two", self.num_banks)));
        }
        if !matches!(self.transaction_bytes, 32 | 128) {
            return Err(err(format!(
                "transaction_bytes must be 32 or 128, got {}",
                self.transaction_bytes
            )));
        }
        Ok(())
    }
}

/// A catalog entry: the hardware plus the model constants tuned for it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GpuProfile {
    pub spec: GpuSpec,
    pub constants: LatencyConstants,
    /// Field name -> origin note, e.g. `num_sms = "vendor"`.
    pub provenance: BTreeMap<String, String>,
    /// Entries with no measurements behind them, only model predictions.
    pub prediction_only: bool,
}

const REQUIRED_REAL: [&str; 4] = [
    "peak_gflops_single",
    "peak_gflops_double",
    "mem_bandwidth",
    "core_clock",
];
const REQUIRED_COUNT: [&str; 4] = [
    "num_sms",
    "regs_per_sm",
    "shared_per_sm",
    "hw_max_threads_per_sm",
];
const OPTIONAL_COUNT: [(&str, usize); 3] =
    [("warp_size", 32), ("num_banks", 32), ("transaction_bytes", 128)];
const META_KEYS: [&str; 4] = ["name", "provenance", "latency", "prediction_only"];

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Integer(i) => Some(*i as f64),
        Value::Float(f) => Some(*f),
        _ => None,
    }
}

fn missing(gpu: &str, key: &str) -> Error {
    Error::GpuSpec {
        gpu: gpu.to_string(),
        reason: format!("missing required key `{key}`"),
    }
}

fn real(table: &Table, gpu: &str, key: &str) -> Result<f64> {
    let v = table.get(key).ok_or_else(|| missing(gpu, key))?;
    as_f64(v).ok_or_else(|| Error::GpuSpec {
        gpu: gpu.to_string(),
        reason: format!("`{key}` is not a number"),
    })
}

fn count(table: &Table, gpu: &str, key: &str) -> Result<usize> {
    let v = real(table, gpu, key)?;
    if v <= 0.0 || v.fract() != 0.0 {
        return Err(Error::GpuSpec {
            gpu: gpu.to_string(),
            reason: format!("`{key}` must be a positive integer, got {v}"),
        });
    }
    Ok(v as usize)
}

/// Parses one catalog document. Unknown keys are logged and ignored.
pub fn load_gpu_spec(document: &str, origin: &str) -> Result<GpuProfile> {
    let table: Table = toml::from_str(document).map_err(|source| Error::Parse {
        path: origin.to_string(),
        source,
    })?;
    let name = match table.get("name") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => {
            return Err(Error::GpuSpec {
                gpu: origin.to_string(),
                reason: "`name` must be a string".into(),
            })
        }
        None => return Err(missing(origin, "name")),
    };

    for key in table.keys() {
        let known = REQUIRED_REAL.contains(&key.as_str())
            || REQUIRED_COUNT.contains(&key.as_str())
            || OPTIONAL_COUNT.iter().any(|(k, _)| k == key)
            || META_KEYS.contains(&key.as_str());
        if !known {
            log::warn!("{origin}: ignoring unknown key `{key}`");
        }
    }

    let optional = |key: &str, default: usize| -> Result<usize> {
        if table.contains_key(key) {
            count(&table, &name, key)
        } else {
            Ok(default)
        }
    };

    let spec = GpuSpec {
        peak_gflops_single: real(&table, &name, "peak_gflops_single")?,
        peak_gflops_double: real(&table, &name, "peak_gflops_double")?,
        mem_bandwidth: real(&table, &name, "mem_bandwidth")?,
        core_clock: real(&table, &name, "core_clock")?,
        num_sms: count(&table, &name, "num_sms")?,
        regs_per_sm: count(&table, &name, "regs_per_sm")?,
        shared_per_sm: count(&table, &name, "shared_per_sm")?,
        hw_max_threads_per_sm: count(&table, &name, "hw_max_threads_per_sm")?,
        warp_size: optional("warp_size", 32)?,
        num_banks: optional("num_banks", 32)?,
        transaction_bytes: optional("transaction_bytes", 128)?,
        name: name.clone(),
    };
    spec.validate()?;

    let mut constants = LatencyConstants::default();
    if let Some(latency) = table.get("latency") {
        let latency = latency.as_table().ok_or_else(|| Error::GpuSpec {
            gpu: name.clone(),
            reason: "`latency` must be a table".into(),
        })?;
        for (key, v) in latency {
            let val = as_f64(v).ok_or_else(|| Error::GpuSpec {
                gpu: name.clone(),
                reason: format!("latency.{key} is not a number"),
            })?;
            match key.as_str() {
                "latency_mem" => constants.latency_mem = val,
                "latency_comp" => constants.latency_comp = val,
                "reg_overhead" => constants.reg_overhead = val,
                "warp_launch_cycles" => constants.warp_launch_cycles = val,
                "barrier_cycles" => constants.barrier_cycles = val,
                other => log::warn!("{origin}: ignoring unknown key `latency.{other}`"),
            }
        }
    }
    constants.validate().map_err(|e| Error::GpuSpec {
        gpu: name.clone(),
        reason: e.to_string(),
    })?;

    let mut provenance = BTreeMap::new();
    if let Some(Value::Table(p)) = table.get("provenance") {
        for (k, v) in p {
            if let Some(s) = v.as_str() {
                provenance.insert(k.clone(), s.to_string());
            }
        }
    }
    let prediction_only = table
        .get("prediction_only")
        .and_then(Value::as_bool)
        .unwrap_or(false);

    Ok(GpuProfile {
        spec,
        constants,
        provenance,
        prediction_only,
    })
}

const BUILTIN: [(&str, &str); 5] = [
    ("k40c.toml", include_str!("../catalog/k40c.toml")),
    ("m40.toml", include_str!("../catalog/m40.toml")),
    ("p100.toml", include_str!("../catalog/p100.toml")),
    ("v100.toml", include_str!("../catalog/v100.toml")),
    ("a100.toml", include_str!("../catalog/a100.toml")),
];

/// All GPUs known to the lab, in catalog order.
#[derive(Debug, Clone)]
pub struct Catalog {
    entries: Vec<GpuProfile>,
}

impl Catalog {
    /// The catalog compiled into the crate.
    pub fn builtin() -> Self {
        let entries = BUILTIN
            .iter()
            .map(|(file, doc)| load_gpu_spec(doc, file).expect("built-in catalog entry is valid"))
            .collect();
        Self { entries }
    }

    /// Loads every `*.toml` file in `dir`, sorted by file name.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let mut paths: Vec<_> = std::fs::read_dir(dir.as_ref())?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "toml"))
            .collect();
        paths.sort();
        let mut entries = Vec::with_capacity(paths.len());
        for path in paths {
            let doc = std::fs::read_to_string(&path)?;
            entries.push(load_gpu_spec(&doc, &path.display().to_string())?);
        }
        Ok(Self { entries })
    }

    /// The directory named by [`CATALOG_ENV`] if set, otherwise the built-in catalog.
    pub fn from_env() -> Result<Self> {
        match std::env::var_os(CATALOG_ENV) {
            Some(dir) => Self::from_dir(dir),
            None => Ok(Self::builtin()),
        }
    }

    pub fn get(&self, name: &str) -> Result<&GpuProfile> {
        self.entries
            .iter()
            .find(|e| e.spec.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::UnknownGpu(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &GpuProfile> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_numbers() {
        let cat = Catalog::builtin();
        let expect = [
            ("K40c", 5046.0, 1430.0, 288.0),
            ("M40", 6844.0, 213.0, 288.0),
            ("P100", 10600.0, 4600.0, 720.0),
            ("V100", 15000.0, 7500.0, 900.0),
        ];
        for (name, single, double, bw) in expect {
            let g = &cat.get(name).unwrap().spec;
            assert_eq!(g.peak_gflops_single, single, "{name}");
            assert_eq!(g.peak_gflops_double, double, "{name}");
            assert_eq!(g.mem_bandwidth, bw, "{name}");
            assert_eq!(g.warp_size, 32);
            assert_eq!(g.num_banks, 32);
        }
        let a100 = cat.get("a100").unwrap();
        assert!(a100.prediction_only);
        assert_eq!(a100.spec.peak_gflops_double, 9700.0);
        assert_eq!(a100.spec.mem_bandwidth, 1555.0);
        assert_eq!(
            cat.get("K40c").unwrap().provenance.get("num_sms").map(String::as_str),
            Some("vendor")
        );
    }

    const MINIMAL: &str = r#"
name = "Toy"
peak_gflops_single = 100
peak_gflops_double = 50.5
mem_bandwidth = 10
num_sms = 2
core_clock = 1000
regs_per_sm = 65536
shared_per_sm = 49152
hw_max_threads_per_sm = 2048
"#;

    #[test]
    fn optional_keys_default() {
        let p = load_gpu_spec(MINIMAL, "toy").unwrap();
        assert_eq!(p.spec.warp_size, 32);
        assert_eq!(p.spec.num_banks, 32);
        assert_eq!(p.spec.transaction_bytes, 128);
        assert_eq!(p.constants, LatencyConstants::default());
    }

    #[test]
    fn rejects_bad_documents() {
        let zero_bw = MINIMAL.replace("mem_bandwidth = 10", "mem_bandwidth = 0");
        assert!(load_gpu_spec(&zero_bw, "toy").is_err());
        let no_bw = MINIMAL.replace("mem_bandwidth = 10", "");
        let err = load_gpu_spec(&no_bw, "toy").unwrap_err().to_string();
        assert!(err.contains("mem_bandwidth"), "{err}");
        let bad_tx = format!("{MINIMAL}transaction_bytes = 64\n");
        assert!(load_gpu_spec(&bad_tx, "toy").is_err());
        let bad_warp = format!("{MINIMAL}warp_size = 24\n");
        assert!(load_gpu_spec(&bad_warp, "toy").is_err());
    }

    #[test]
    fn unknown_key_is_not_fatal() {
        let doc = format!("{MINIMAL}flavour = \"vanilla\"\n");
        assert!(load_gpu_spec(&doc, "toy").is_ok());
    }

    #[test]
    fn catalog_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("toy.toml"), MINIMAL).unwrap();
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let cat = Catalog::from_dir(dir.path()).unwrap();
        assert_eq!(cat.len(), 1);
        assert!(cat.get("toy").is_ok());
        assert!(matches!(cat.get("nope"), Err(Error::UnknownGpu(_))));
    }
}
