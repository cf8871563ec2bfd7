//! The perturbed bistable flow `Y' = f(Y, 0) + delta`, `Y(0) = xi`, with its
//! first and second variations in `xi`.

use crate::error::Result;
use crate::model::BistableModel;
use crate::numeric::{Dopri, OdeOptions};

/// `(Y, Y_xi, Y_xixi / Y_xi)` at one `(tau, xi, delta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowState {
    pub y: f64,
    pub y_xi: f64,
    pub ratio: f64,
}

fn options() -> OdeOptions {
    OdeOptions { rtol: 1e-11, atol: 1e-13, max_steps: 2_000_000 }
}

// State (Y, ln Y_xi, Y_xixi / Y_xi): Y_xi stays positive and its logarithm
// keeps the growth e^{mu tau} well scaled.
fn rhs<'a>(model: &'a BistableModel, delta: f64) -> impl FnMut(f64, &[f64; 3]) -> [f64; 3] + 'a {
    move |_t, s: &[f64; 3]| {
        let y = s[0];
        [model.f_tilde(y) + delta, model.df_tilde(y), model.d2f_tilde(y) * s[1].exp()]
    }
}

fn state(s: [f64; 3]) -> FlowState {
    FlowState { y: s[0], y_xi: s[1].exp(), ratio: s[2] }
}

/// Integrates the flow and its variations from `tau = 0` to `tau`.
pub fn ode_flow(model: &BistableModel, tau: f64, xi: f64, delta: f64) -> Result<FlowState> {
    model.check_delta(delta)?;
    let mut ode = Dopri::new(rhs(model, delta), 0.0, [xi, 0.0, 0.0], options());
    Ok(state(ode.advance_to(tau)?))
}

/// The flow sampled at nondecreasing times `taus`, in one integration.
pub fn flow_series(
    model: &BistableModel,
    taus: &[f64],
    xi: f64,
    delta: f64,
) -> Result<Vec<FlowState>> {
    model.check_delta(delta)?;
    let mut ode = Dopri::new(rhs(model, delta), 0.0, [xi, 0.0, 0.0], options());
    taus.iter().map(|&t| Ok(state(ode.advance_to(t)?))).collect()
}

/// `Y(tau, .; delta)` tabulated on a uniform `xi` lattice at a list of times,
/// evaluated by cubic Hermite interpolation using `Y_xi`.
#[derive(Debug, Clone)]
pub struct FlowTable {
    pub xi_min: f64,
    pub xi_max: f64,
    pub delta: f64,
    pub taus: Vec<f64>,
    dxi: f64,
    // values[time][node] = (Y, Y_xi)
    values: Vec<Vec<(f64, f64)>>,
}

impl FlowTable {
    pub fn build(
        model: &BistableModel,
        taus: &[f64],
        xi_min: f64,
        xi_max: f64,
        nodes: usize,
        delta: f64,
    ) -> Result<Self> {
        use rayon::prelude::*;
        let nodes = nodes.max(2);
        let dxi = (xi_max - xi_min) / (nodes - 1) as f64;
        let columns: Vec<Vec<FlowState>> = (0..nodes)
            .into_par_iter()
            .map(|k| flow_series(model, taus, xi_min + k as f64 * dxi, delta))
            .collect::<Result<_>>()?;
        let values = (0..taus.len())
            .map(|t| columns.iter().map(|c| (c[t].y, c[t].y_xi)).collect())
            .collect();
        Ok(Self { xi_min, xi_max, delta, taus: taus.to_vec(), dxi, values })
    }

    /// `Y(taus[time], xi)`; `xi` is clamped to the lattice.
    pub fn eval(&self, time: usize, xi: f64) -> f64 {
        let row = &self.values[time];
        let s = ((xi - self.xi_min) / self.dxi).clamp(0.0, (row.len() - 1) as f64);
        let k = (s.floor() as usize).min(row.len() - 2);
        let t = s - k as f64;
        let (y0, d0) = row[k];
        let (y1, d1) = row[k + 1];
        let h = self.dxi;
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * d1
    }
}
