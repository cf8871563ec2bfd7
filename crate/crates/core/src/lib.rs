//! Numerical laboratory for the nonlocal Allen-Cahn equation
//! `u_t = Δu + ε⁻² f(u, ε∫u)` and its sharp-interface limit.

pub mod error;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod interface;
pub mod model;
pub mod numeric;
pub mod profile;
pub mod solver;

pub use error::{Error, Result};
pub use model::{analyze_nonlinearity, AnalysisOptions, BistableModel, Nonlinearity, PolynomialNonlinearity};
