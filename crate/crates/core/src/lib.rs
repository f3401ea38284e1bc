pub mod error;
pub mod experiment;
pub mod gpu;
pub mod kernels;
pub mod oracle;
pub mod perfmodel;
pub mod simt;
pub mod tuner;
pub mod types;

pub use error::{Error, Result};
pub use gpu::{Catalog, GpuProfile, GpuSpec};
pub use types::{format_float, KernelParams, KernelVariant, LatencyConstants, Matrix, Precision, ShapeClass};
