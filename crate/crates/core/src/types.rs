//! Domain types shared by the simulator, kernels, model and tuner.

use std::fmt;
use std::str::FromStr;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floating-point width of every matrix in a problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Single,
    Double,
}

impl Precision {
    pub const fn bytes_per_element(self) -> usize {
        match self {
            Precision::Single => 4,
            Precision::Double => 8,
        }
    }

    /// Machine epsilon of the precision, widened to `f64`.
    pub fn epsilon(self) -> f64 {
        match self {
            Precision::Single => f32::EPSILON as f64,
            Precision::Double => f64::EPSILON,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Precision::Single => "single",
            Precision::Double => "double",
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "single" | "f32" | "float" => Ok(Precision::Single),
            "double" | "f64" => Ok(Precision::Double),
            other => Err(Error::InvalidParams(format!("unknown precision `{other}`"))),
        }
    }
}

/// Element types a [`Matrix`] can hold. Implemented for `f32` and `f64`.
pub trait Element: Float + Default + Send + Sync + fmt::Debug + 'static {
    const PRECISION: Precision;

    fn to_f64(self) -> f64;
    fn from_f64(v: f64) -> Self;
}

impl Element for f32 {
    const PRECISION: Precision = Precision::Single;

    fn to_f64(self) -> f64 {
        self as f64
    }

    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

impl Element for f64 {
    const PRECISION: Precision = Precision::Double;

    fn to_f64(self) -> f64 {
        self
    }

    fn from_f64(v: f64) -> Self {
        v
    }
}

/// Dense column-major matrix. Element `(i, j)` lives at `i + j * rows`.
#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Element> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, T::one());
        }
        m
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "storage length {} != {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn precision(&self) -> Precision {
        T::PRECISION
    }

    #[inline]
    pub fn index_of(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.rows && j < self.cols);
        i + j * self.rows
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[self.index_of(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let idx = self.index_of(i, j);
        self.data[idx] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }
}

impl<T: Element> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix<{}>({}x{})", T::PRECISION, self.rows, self.cols)?;
        if self.rows * self.cols <= 64 {
            for i in 0..self.rows {
                write!(f, "\n ")?;
                for j in 0..self.cols {
                    write!(f, " {:?}", self.get(i, j))?;
                }
            }
        }
        Ok(())
    }
}

/// The six kernel algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KernelVariant {
    /// Inner product per thread.
    V0,
    /// Outer product per thread.
    V1,
    /// Outer product with a shared-memory tile of B.
    V2,
    /// Shared tile plus register prefetching of A and B.
    V3,
    /// Tall-A kernel: each thread walks `tcf` row tiles sequentially.
    LOpt1,
    /// Tall-A kernel with interleaved row tiles and C prefetching.
    LOpt2,
}

impl KernelVariant {
    pub const ALL: [KernelVariant; 6] = [
        KernelVariant::V0,
        KernelVariant::V1,
        KernelVariant::V2,
        KernelVariant::V3,
        KernelVariant::LOpt1,
        KernelVariant::LOpt2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KernelVariant::V0 => "V0",
            KernelVariant::V1 => "V1",
            KernelVariant::V2 => "V2",
            KernelVariant::V3 => "V3",
            KernelVariant::LOpt1 => "L_OPT1",
            KernelVariant::LOpt2 => "L_OPT2",
        }
    }

    pub fn uses_shared_tile(self) -> bool {
        !matches!(self, KernelVariant::V0 | KernelVariant::V1)
    }

    pub fn uses_tcf(self) -> bool {
        matches!(self, KernelVariant::LOpt1 | KernelVariant::LOpt2)
    }

    /// Whether memory loads overlap compute (register prefetching).
    pub fn overlaps(self) -> bool {
        matches!(
            self,
            KernelVariant::V3 | KernelVariant::LOpt1 | KernelVariant::LOpt2
        )
    }
}

impl fmt::Display for KernelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.to_ascii_uppercase().replace('-', "_");
        match up.as_str() {
            "V0" => Ok(KernelVariant::V0),
            "V1" => Ok(KernelVariant::V1),
            "V2" => Ok(KernelVariant::V2),
            "V3" => Ok(KernelVariant::V3),
            "L_OPT1" | "LOPT1" | "OPT1" => Ok(KernelVariant::LOpt1),
            "L_OPT2" | "LOPT2" | "OPT2" => Ok(KernelVariant::LOpt2),
            _ => Err(Error::InvalidParams(format!("unknown kernel variant `{s}`"))),
        }
    }
}

/// Storage order of the B tile held in shared memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TileLayout {
    #[default]
    ColumnMajor,
    RowMajor,
}

/// Tuning tuple for one kernel launch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Threads per block and rows of the shared B tile.
    pub t1: usize,
    /// Columns of C computed per pass.
    pub t2: usize,
    /// Elements of A fetched per step.
    pub t3: usize,
    /// Thread-count factor; rows of A handled per thread in the tall-A kernels.
    pub tcf: usize,
    pub variant: KernelVariant,
    pub tile_layout: TileLayout,
}

impl KernelParams {
    pub fn new(variant: KernelVariant, t1: usize, t2: usize, t3: usize) -> Self {
        Self {
            t1,
            t2,
            t3,
            tcf: 1,
            variant,
            tile_layout: TileLayout::ColumnMajor,
        }
    }

    pub fn with_tcf(mut self, tcf: usize) -> Self {
        self.tcf = tcf;
        self
    }

    pub fn with_layout(mut self, layout: TileLayout) -> Self {
        self.tile_layout = layout;
        self
    }

    /// Checks the tuple against a problem with `n` columns in B.
    pub fn validate(&self, n: usize) -> Result<()> {
        for (name, v) in [
            ("t1", self.t1),
            ("t2", self.t2),
            ("t3", self.t3),
            ("tcf", self.tcf),
        ] {
            if v == 0 {
                return Err(Error::InvalidParams(format!("{name} must be >= 1")));
            }
        }
        if self.t2 > n {
            return Err(Error::InvalidParams(format!(
                "t2 = {} exceeds n = {n}",
                self.t2
            )));
        }
        if self.t3 > self.t1 {
            return Err(Error::InvalidParams(format!(
                "t3 = {} exceeds t1 = {}",
                self.t3, self.t1
            )));
        }
        if self.tcf > 1 && !self.variant.uses_tcf() {
            return Err(Error::InvalidParams(format!(
                "tcf = {} only applies to the tall-A kernels",
                self.tcf
            )));
        }
        Ok(())
    }
}

/// Latency and overhead constants of the performance model.
///
/// `latency_mem`, `latency_comp` and `reg_overhead` are the profiled constants
/// the occupancy/utilization estimates need. `warp_launch_cycles` prices the
/// per-warp scheduling overhead added for latency-bound launches and
/// `barrier_cycles` the per-warp cost of a block barrier used when ranking
/// block sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatencyConstants {
    pub latency_mem: f64,
    pub latency_comp: f64,
    pub reg_overhead: f64,
    pub warp_launch_cycles: f64,
    pub barrier_cycles: f64,
}

impl Default for LatencyConstants {
    fn default() -> Self {
        Self {
            latency_mem: 400.0,
            latency_comp: 8.0,
            reg_overhead: 32.0,
            warp_launch_cycles: 32.0,
            barrier_cycles: 20.0,
        }
    }
}

impl LatencyConstants {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("latency_mem", self.latency_mem),
            ("latency_comp", self.latency_comp),
            ("reg_overhead", self.reg_overhead),
            ("warp_launch_cycles", self.warp_launch_cycles),
            ("barrier_cycles", self.barrier_cycles),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.latency_mem <= self.latency_comp {
            return Err(Error::InvalidParams(
                "latency_mem must exceed latency_comp".into(),
            ));
        }
        Ok(())
    }
}

/// Advisory shape classification of a GEMM problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShapeClass {
    /// Large A times a tall-and-skinny B (m ≈ k ≫ n).
    TallRight,
    /// Tall-and-skinny A times a small B (m ≫ k ≈ n).
    TallLeft,
    General,
}

impl ShapeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ShapeClass::TallRight => "tsm2r",
            ShapeClass::TallLeft => "tsm2l",
            ShapeClass::General => "general",
        }
    }
}

/// A dimension dominates another when it is at least this many times larger.
pub const DOMINANCE_RATIO: usize = 16;
/// Two dimensions are comparable when neither exceeds the other by more than this factor.
pub const COMPARABLE_RATIO: usize = 4;

fn comparable(a: usize, b: usize) -> bool {
    a <= b * COMPARABLE_RATIO && b <= a * COMPARABLE_RATIO
}

/// Classifies `(m, k, n)`. Never rejects a non-degenerate shape.
pub fn validate_problem(m: usize, k: usize, n: usize) -> Result<ShapeClass> {
    for (name, v) in [("m", m), ("k", k), ("n", n)] {
        if v == 0 {
            return Err(Error::ZeroDimension { name });
        }
    }
    if comparable(m, k) && k >= n * DOMINANCE_RATIO {
        Ok(ShapeClass::TallRight)
    } else if comparable(k, n) && m >= k.max(n) * DOMINANCE_RATIO {
        Ok(ShapeClass::TallLeft)
    } else {
        Ok(ShapeClass::General)
    }
}

/// Shortest round-trip text for a float: positional for magnitudes in
/// `[1e-4, 1e16)` and zero, scientific otherwise. Parsing it back gives the
/// same bits.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e16).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_classes() {
        assert_eq!(validate_problem(20480, 20480, 2).unwrap(), ShapeClass::TallRight);
        assert_eq!(validate_problem(20480, 2, 2).unwrap(), ShapeClass::TallLeft);
        assert_eq!(validate_problem(8, 8, 8).unwrap(), ShapeClass::General);
        assert_eq!(validate_problem(15360, 4, 16).unwrap(), ShapeClass::TallLeft);
        assert!(matches!(
            validate_problem(0, 4, 4),
            Err(Error::ZeroDimension { name: "m" })
        ));
    }

    #[test]
    fn precision_bytes() {
        assert_eq!(Precision::Single.bytes_per_element(), 4);
        assert_eq!(Precision::Double.bytes_per_element(), 8);
        assert_eq!(<f32 as Element>::PRECISION, Precision::Single);
        assert_eq!("double".parse::<Precision>().unwrap(), Precision::Double);
    }

    #[test]
    fn flat_index_matches_enumeration() {
        for rows in 1..=7 {
            for cols in 1..=5 {
                let m = Matrix::<f64>::zeros(rows, cols);
                let mut expected = 0;
                for j in 0..cols {
                    for i in 0..rows {
                        assert_eq!(m.index_of(i, j), expected);
                        expected += 1;
                    }
                }
            }
        }
    }

    #[test]
    fn write_then_read() {
        let mut m = Matrix::<f32>::zeros(7, 5);
        for j in 0..5 {
            for i in 0..7 {
                m.set(i, j, (i * 10 + j) as f32);
            }
        }
        for j in 0..5 {
            for i in 0..7 {
                assert_eq!(m.get(i, j), (i * 10 + j) as f32);
            }
        }
        assert!(Matrix::<f32>::from_col_major(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn params_validation() {
        let p = KernelParams::new(KernelVariant::V3, 128, 16, 4);
        assert!(p.validate(16).is_ok());
        assert!(p.validate(8).is_err());
        assert!(KernelParams::new(KernelVariant::V3, 32, 4, 64).validate(4).is_err());
        assert!(KernelParams::new(KernelVariant::V3, 32, 0, 1).validate(4).is_err());
        assert!(KernelParams::new(KernelVariant::V2, 32, 4, 4)
            .with_tcf(2)
            .validate(4)
            .is_err());
    }

    #[test]
    fn latency_constants_validate() {
        assert!(LatencyConstants::default().validate().is_ok());
        let bad = LatencyConstants {
            latency_mem: 4.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
