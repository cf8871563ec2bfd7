//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use nalab_core::grid::{Field2D, Grid2D};
use nalab_core::{analyze_nonlinearity, AnalysisOptions, BistableModel, PolynomialNonlinearity};

pub fn cubic() -> BistableModel {
    analyze_nonlinearity(Arc::new(PolynomialNonlinearity::cubic()), AnalysisOptions::default())
        .expect("the cubic is bistable")
}

/// `tanh((r - 0.3) / (sqrt(2) eps))` around the centre of the unit square.
pub fn circle_layer(n: usize, eps: f64) -> Field2D {
    let grid = Grid2D::unit(n).expect("grid");
    Field2D::from_fn(grid, |x, y| (((x - 0.5).hypot(y - 0.5) - 0.3) / (std::f64::consts::SQRT_2 * eps)).tanh())
}
