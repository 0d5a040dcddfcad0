//! Shared fixtures for the kernel benchmarks.

use std::sync::Arc;

use morrey_core::grid::{sample_field, sample_vector_field};
use morrey_core::{GridSpec, ScalarField, VectorField};

pub fn cube(n: usize, cells: usize) -> Arc<GridSpec> {
    Arc::new(GridSpec::cube(n, 1.0, cells).expect("valid cube"))
}

/// `|x|^(-1)`, singular at the origin corner.
pub fn inverse_distance(spec: Arc<GridSpec>) -> ScalarField {
    sample_field(spec, |x| 1.0 / x.iter().map(|v| v * v).sum::<f64>().sqrt()).expect("finite samples")
}

/// `x/|x|` in three dimensions.
pub fn hedgehog(spec: Arc<GridSpec>) -> VectorField {
    sample_vector_field(spec, 3, |x, out| {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (o, v) in out.iter_mut().zip(x) {
            *o = v / r;
        }
    })
    .expect("finite samples")
}
