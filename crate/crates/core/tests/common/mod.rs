#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skinny_gemm::types::Element;
use skinny_gemm::{Catalog, GpuSpec, Matrix};

pub fn gpu(name: &str) -> GpuSpec {
    Catalog::builtin().get(name).unwrap().spec.clone()
}

pub fn random<T: Element>(rows: usize, cols: usize, seed: u64) -> Matrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| T::from_f64(rng.gen::<f64>()))
}

/// `8 k eps` for the element type.
pub fn tolerance<T: Element>(k: usize) -> f64 {
    8.0 * k as f64 * T::PRECISION.epsilon()
}
