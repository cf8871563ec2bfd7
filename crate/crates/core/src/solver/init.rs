//! Initial data `u0 = a + A tanh(phi(s(x)) / w)` with `phi < 0` inside the initial interface.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field2D, Grid2D};
use crate::model::BistableModel;

/// How the level function grows away from the interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LevelForm {
    /// Signed distance (kinked at the centre of a circle).
    #[default]
    Distance,
    /// `(|x - c|^2 - r^2) / (2r)`: smooth everywhere, unit slope on the interface.
    Quadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Circle { center: [f64; 2], radius: f64 },
    Ellipse { center: [f64; 2], semi_axes: [f64; 2] },
    Constant { value: f64 },
}

fn default_amplitude() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialDataSpec {
    pub shape: Shape,
    /// Transition width `w`.
    pub width: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub level_form: LevelForm,
    /// Width of the edge strip where the coordinates are bent to force a zero
    /// normal derivative; `None` picks a tenth of the shorter side.
    #[serde(default)]
    pub boundary_cutoff: Option<f64>,
}

impl InitialDataSpec {
    pub fn circle(center: [f64; 2], radius: f64, width: f64) -> Self {
        Self {
            shape: Shape::Circle { center, radius },
            width,
            amplitude: 1.0,
            level_form: LevelForm::Distance,
            boundary_cutoff: None,
        }
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn with_level_form(mut self, form: LevelForm) -> Self {
        self.level_form = form;
        self
    }

    pub fn with_cutoff(mut self, cutoff: Option<f64>) -> Self {
        self.boundary_cutoff = cutoff;
        self
    }

    /// Level function before the edge bending; negative inside.
    pub fn level(&self, x: f64, y: f64) -> f64 {
        match self.shape {
            Shape::Circle { center, radius } => {
                let r2 = (x - center[0]).powi(2) + (y - center[1]).powi(2);
                match self.level_form {
                    LevelForm::Distance => r2.sqrt() - radius,
                    LevelForm::Quadratic => (r2 - radius * radius) / (2.0 * radius),
                }
            }
            Shape::Ellipse { center, semi_axes: [ax, ay] } => {
                let q = ((x - center[0]) / ax).powi(2) + ((y - center[1]) / ay).powi(2);
                let scale = (ax * ay).sqrt();
                match self.level_form {
                    LevelForm::Distance => (q.sqrt() - 1.0) * scale,
                    LevelForm::Quadratic => 0.5 * (q - 1.0) * scale,
                }
            }
            Shape::Constant { .. } => 0.0,
        }
    }

    /// `u0` at a point of the box `[0, lx] x [0, ly]`.
    pub fn value(&self, model_a: f64, lx: f64, ly: f64, x: f64, y: f64) -> f64 {
        if let Shape::Constant { value } = self.shape {
            return value;
        }
        let delta = self.boundary_cutoff.unwrap_or(0.1 * lx.min(ly));
        let sx = bend(x, lx, delta);
        let sy = bend(y, ly, delta);
        model_a + self.amplitude * (self.level(sx, sy) / self.width).tanh()
    }
}

// s(x) = d/2 + d (t^3 - t^4/2), t = x/d, on [0, d]; mirrored at the far edge.
// C2 match to the identity at x = d and s'(0) = 0.
fn bend(x: f64, length: f64, d: f64) -> f64 {
    if d <= 0.0 {
        return x;
    }
    let near = |x: f64| {
        let t = x / d;
        d * (0.5 + t * t * t - 0.5 * t * t * t * t)
    };
    if x < d {
        near(x)
    } else if x > length - d {
        length - near(length - x)
    } else {
        x
    }
}

/// `u0` together with the bound `C0` and the interface geometry it was built from.
#[derive(Debug, Clone)]
pub struct InitialField {
    pub field: Field2D,
    /// `max(1, |u0|, |grad u0|, |D2 u0|)`, sup norms by finite differences.
    pub c0: f64,
    pub sup: f64,
    pub grad_sup: f64,
    pub hess_sup: f64,
    /// `sup |Laplacian u0|`.
    pub laplacian_sup: f64,
}

/// Samples the initial data and checks that the `a`-level is a closed curve
/// strictly inside the box, with `u0 > a` on the boundary.
pub fn init_field(spec: &InitialDataSpec, grid: Grid2D, model: &BistableModel) -> Result<InitialField> {
    if !(spec.width > 0.0) || !(spec.amplitude > 0.0) {
        return Err(Error::InvalidArgument("initial width and amplitude must be positive".into()));
    }
    let a = model.a;
    let (lx, ly) = (grid.lx, grid.ly);
    let field = Field2D::from_fn(grid, |x, y| spec.value(a, lx, ly, x, y));
    let below = field.values.iter().filter(|&&u| u < a).count();
    if below == 0 || below == grid.len() {
        return Err(Error::BadInterface("u0 - a has no sign change on the grid".into()));
    }
    let (nx, ny) = (grid.nx, grid.ny);
    let boundary_low = (0..nx)
        .flat_map(|i| [(i, 0), (i, ny - 1)])
        .chain((0..ny).flat_map(|j| [(0, j), (nx - 1, j)]))
        .any(|(i, j)| field.at(i, j) <= a);
    if boundary_low {
        return Err(Error::BadInterface("the a-level set touches the boundary".into()));
    }

    // derivative norms of the continuous u0 by central differences
    let h = 1e-4 * lx.min(ly);
    let u = |x: f64, y: f64| spec.value(a, lx, ly, x, y);
    let mut sup: f64 = 0.0;
    let mut grad_sup: f64 = 0.0;
    let mut hess_sup: f64 = 0.0;
    let mut laplacian_sup: f64 = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let x = grid.x(i).clamp(h, lx - h);
            let y = grid.y(j).clamp(h, ly - h);
            let c = u(x, y);
            let (e, w, n, s) = (u(x + h, y), u(x - h, y), u(x, y + h), u(x, y - h));
            let ux = (e - w) / (2.0 * h);
            let uy = (n - s) / (2.0 * h);
            let uxx = (e - 2.0 * c + w) / (h * h);
            let uyy = (n - 2.0 * c + s) / (h * h);
            let uxy = (u(x + h, y + h) - u(x + h, y - h) - u(x - h, y + h) + u(x - h, y - h))
                / (4.0 * h * h);
            sup = sup.max(field.at(i, j).abs());
            grad_sup = grad_sup.max(ux.hypot(uy));
            // spectral norm of the symmetric Hessian
            let mean = 0.5 * (uxx + uyy);
            let rad = (0.25 * (uxx - uyy).powi(2) + uxy * uxy).sqrt();
            hess_sup = hess_sup.max(mean.abs() + rad);
            laplacian_sup = laplacian_sup.max((uxx + uyy).abs());
        }
    }
    let c0 = 1f64.max(sup).max(grad_sup).max(hess_sup);
    Ok(InitialField { field, c0, sup, grad_sup, hess_sup, laplacian_sup })
}
