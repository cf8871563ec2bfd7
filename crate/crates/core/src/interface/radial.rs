//! Circles under `V = -1/R + c0 (A - 2 pi R^2)`.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{bisect, Dopri, OdeOptions};

/// Normal velocity of a circle of radius `r`.
pub fn radial_velocity(r: f64, c0: f64, domain_area: f64) -> f64 {
    -1.0 / r + c0 * (domain_area - 2.0 * PI * r * r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSeries {
    pub c0: f64,
    pub domain_area: f64,
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Time at which the radius reached zero, if it did.
    pub extinction: Option<f64>,
}

impl RadialSeries {
    /// Radius at time `t` by linear interpolation of the stored samples.
    pub fn radius_at(&self, t: f64) -> Option<f64> {
        if t < self.t[0] || t > *self.t.last()? {
            return None;
        }
        let k = self.t.partition_point(|&s| s <= t).clamp(1, self.t.len() - 1);
        let (t0, t1) = (self.t[k - 1], self.t[k]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        Some(self.r[k - 1] + w * (self.r[k] - self.r[k - 1]))
    }

    /// Turns a recorded extinction into an error.
    pub fn require_survival(self) -> Result<Self> {
        match self.extinction {
            Some(time) => Err(Error::Extinction { time }),
            None => Ok(self),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "R", "gamma"])?;
        for k in 0..self.t.len() {
            w.write_record([self.t[k], self.r[k], self.gamma[k]].iter().map(|x| format!("{x:.17e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Integrates the radius on `[0, t_end]` with output every `dt`. The state is
/// `S = R^2`, which stays smooth through extinction; the run stops there and
/// records the time.
pub fn radial_evolve(
    r0: f64,
    c0: f64,
    domain_area: f64,
    t_end: f64,
    dt: f64,
    max_radius: f64,
) -> Result<RadialSeries> {
    if !(r0 > 0.0 && r0 < max_radius) || !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "radial run needs 0 < R0 < {max_radius}, dt > 0, t_end >= 0 (got R0 = {r0}, dt = {dt})"
        )));
    }
    let rhs = move |_t: f64, s: &[f64; 1]| {
        let r = s[0].max(0.0).sqrt();
        [-2.0 + 2.0 * c0 * r * (domain_area - 2.0 * PI * s[0])]
    };
    let opts = OdeOptions { rtol: 1e-12, atol: 1e-14, max_steps: 10_000_000 };
    let mut ode = Dopri::new(rhs, 0.0, [r0 * r0], opts);
    let gamma = |r: f64| domain_area - 2.0 * PI * r * r;
    let mut series = RadialSeries {
        c0,
        domain_area,
        t: vec![0.0],
        r: vec![r0],
        gamma: vec![gamma(r0)],
        extinction: None,
    };
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    for k in 1..=steps {
        let t = if k == steps { t_end } else { (k as f64 * dt).min(t_end) };
        let (t_prev, s_prev) = (ode.t, ode.y[0]);
        let s = ode.advance_to(t)?[0];
        if s <= 0.0 {
            // locate S = 0 inside the last interval from the saved state
            let crossing = bisect(
                |tau| {
                    let mut probe = Dopri::new(rhs, t_prev, [s_prev], opts);
                    probe.advance_to(tau).map(|y| y[0]).unwrap_or(-1.0)
                },
                t_prev,
                t,
                1e-13,
            );
            series.t.push(crossing);
            series.r.push(0.0);
            series.gamma.push(domain_area);
            series.extinction = Some(crossing);
            return Ok(series);
        }
        let r = s.sqrt();
        if r >= max_radius {
            return Err(Error::LeftDomain { radius: r, max_radius });
        }
        series.t.push(t);
        series.r.push(r);
        series.gamma.push(gamma(r));
    }
    Ok(series)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub radius: f64,
    pub stability: Stability,
}

/// Zeros of the circle velocity on `(0, sqrt(A/pi))`, by sign scan and
/// bisection; stable where the velocity decreases through zero.
pub fn radial_steady_states(c0: f64, domain_area: f64) -> Vec<SteadyState> {
    let g = |r: f64| radial_velocity(r, c0, domain_area);
    let r_max = (domain_area / PI).sqrt();
    let n = 20_000;
    let mut out = Vec::new();
    let mut r_prev = r_max * 0.5 / n as f64;
    let mut g_prev = g(r_prev);
    for k in 1..n {
        let r = r_max * (k as f64 + 0.5) / n as f64;
        let gv = g(r);
        if g_prev * gv < 0.0 || gv == 0.0 {
            let root = bisect(g, r_prev, r, 1e-15);
            let h = 1e-6 * root;
            let slope = (g(root + h) - g(root - h)) / (2.0 * h);
            let stability = if slope < 0.0 { Stability::Stable } else { Stability::Unstable };
            out.push(SteadyState { radius: root, stability });
        }
        r_prev = r;
        g_prev = gv;
    }
    out
}
