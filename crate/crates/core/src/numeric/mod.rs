//! Small numerical kernels shared by the modules: adaptive quadrature,
//! an embedded Runge-Kutta integrator, scalar root finding and least squares.

mod fit;
mod ode;
mod quad;
mod roots;

pub use fit::{linear_fit, LinearFit};
pub use ode::{Dopri, OdeOptions};
pub use quad::{integrate, trapezoid};
pub use roots::{bisect, safeguarded_newton};
