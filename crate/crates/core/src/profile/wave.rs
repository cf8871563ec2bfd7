//! The standing wave: `U'' + f(U, 0) = 0`, `U(-inf) = -1`, `U(0) = a`, `U(+inf) = 1`.

use crate::error::{Error, Result};
use crate::model::BistableModel;
use crate::numeric::{linear_fit, Dopri, OdeOptions};

/// Sampled standing wave on `[-Z, Z]` with exponential tails outside.
#[derive(Debug, Clone)]
pub struct StandingWave {
    pub z: Vec<f64>,
    pub u0: Vec<f64>,
    pub du0: Vec<f64>,
    pub d2u0: Vec<f64>,
    pub z_max: f64,
    pub dz: f64,
    /// Decay rate fitted from both tails (the smaller one).
    pub lambda: f64,
    /// Linearized decay rates `sqrt(-f'(-1))`, `sqrt(-f'(1))` used for the tails.
    pub rate_minus: f64,
    pub rate_plus: f64,
    /// `a`, the value at `z = 0`.
    pub center: f64,
}

/// Default half-width: sixteen decay lengths.
pub fn default_half_width(model: &BistableModel) -> f64 {
    let lam = (-model.df_tilde(-1.0)).sqrt().min((-model.df_tilde(1.0)).sqrt());
    16.0 / lam
}

/// Solves for the wave through the first integral `U' = sqrt(2 (W(U) - W(-1)))`,
/// integrated outward from `U(0) = a` node by node.
pub fn standing_wave(model: &BistableModel, z_max: Option<f64>, n: usize) -> Result<StandingWave> {
    let z_max = z_max.unwrap_or_else(|| default_half_width(model));
    if n < 5 || n.is_multiple_of(2) || !(z_max > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "standing wave needs an odd node count >= 5 and Z > 0 (got n = {n}, Z = {z_max})"
        )));
    }
    let half = n / 2;
    let dz = z_max / half as f64;
    let z: Vec<f64> = (0..n).map(|i| (i as f64 - half as f64) * dz).collect();
    let slope = |u: f64| (2.0 * model.well_gap(u)).sqrt();
    if !(slope(model.a) > 0.0) {
        return Err(Error::QuadratureSingular("zero slope at the centre".into()));
    }
    let opts = OdeOptions { rtol: 1e-13, atol: 1e-15, max_steps: 1_000_000 };
    let mut u0 = vec![model.a; n];
    let mut ode = Dopri::new(|_t, u: &[f64; 1]| [slope(u[0])], 0.0, [model.a], opts);
    for i in half + 1..n {
        u0[i] = ode.advance_to(z[i])?[0];
    }
    let mut ode = Dopri::new(|_t, u: &[f64; 1]| [slope(u[0])], 0.0, [model.a], opts);
    for i in (0..half).rev() {
        u0[i] = ode.advance_to(z[i])?[0];
    }
    if u0.iter().any(|u| !u.is_finite() || u.abs() > 1.0 + 1e-12) {
        return Err(Error::QuadratureSingular("wave left [-1, 1]".into()));
    }
    let du0: Vec<f64> = u0.iter().map(|&u| slope(u)).collect();
    let d2u0: Vec<f64> = u0.iter().map(|&u| -model.f_tilde(u)).collect();

    // log-slope of the distance to the wells on the outer half of each side
    let tail_fit = |range: std::ops::Range<usize>, well: f64| -> Option<f64> {
        let (zs, ls): (Vec<f64>, Vec<f64>) = range
            .filter_map(|i| {
                let gap = (well - u0[i]).abs();
                (gap > 0.0).then(|| (z[i].abs(), gap.ln()))
            })
            .unzip();
        linear_fit(&zs, &ls).map(|f| -f.slope)
    };
    let quarter = half / 2;
    let fit_plus = tail_fit(half + quarter..n, 1.0);
    let fit_minus = tail_fit(0..half - quarter + 1, -1.0);
    let lambda = match (fit_minus, fit_plus) {
        (Some(l), Some(r)) if l > 0.0 && r > 0.0 => l.min(r),
        _ => return Err(Error::QuadratureSingular("tail decay rate could not be fitted".into())),
    };

    Ok(StandingWave {
        z,
        u0,
        du0,
        d2u0,
        z_max,
        dz,
        lambda,
        rate_minus: (-model.df_tilde(-1.0)).sqrt(),
        rate_plus: (-model.df_tilde(1.0)).sqrt(),
        center: model.a,
    })
}

#[inline]
pub(crate) fn hermite(t: f64, h: f64, y0: f64, d0: f64, y1: f64, d1: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * h * d0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * d1
}

impl StandingWave {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    fn locate(&self, z: f64) -> (usize, f64) {
        let s = (z + self.z_max) / self.dz;
        let k = (s.floor().max(0.0) as usize).min(self.len() - 2);
        (k, s - k as f64)
    }

    /// `U0(z)` for any real `z`.
    pub fn u0_at(&self, z: f64) -> f64 {
        let last = self.len() - 1;
        if z >= self.z_max {
            1.0 - (1.0 - self.u0[last]) * (-self.rate_plus * (z - self.z_max)).exp()
        } else if z <= -self.z_max {
            -1.0 + (self.u0[0] + 1.0) * (-self.rate_minus * (-self.z_max - z)).exp()
        } else {
            let (k, t) = self.locate(z);
            hermite(t, self.dz, self.u0[k], self.du0[k], self.u0[k + 1], self.du0[k + 1])
        }
    }

    /// `U0'(z)` for any real `z`.
    pub fn du0_at(&self, z: f64) -> f64 {
        let last = self.len() - 1;
        if z >= self.z_max {
            self.du0[last] * (-self.rate_plus * (z - self.z_max)).exp()
        } else if z <= -self.z_max {
            self.du0[0] * (-self.rate_minus * (-self.z_max - z)).exp()
        } else {
            let (k, t) = self.locate(z);
            hermite(t, self.dz, self.du0[k], self.d2u0[k], self.du0[k + 1], self.d2u0[k + 1])
        }
    }

    /// Inverse of `U0`: the `z` with `U0(z) = u`, for `u` in `(-1, 1)`.
    pub fn z_at_level(&self, u: f64) -> Result<f64> {
        if !(u > -1.0 && u < 1.0) {
            return Err(Error::InvalidArgument(format!("level {u} is not inside (-1, 1)")));
        }
        let last = self.len() - 1;
        if u >= self.u0[last] {
            return Ok(self.z_max + ((1.0 - self.u0[last]) / (1.0 - u)).ln() / self.rate_plus);
        }
        if u <= self.u0[0] {
            return Ok(-self.z_max - ((self.u0[0] + 1.0) / (u + 1.0)).ln() / self.rate_minus);
        }
        let k = self.u0.partition_point(|&v| v <= u).clamp(1, last) - 1;
        Ok(crate::numeric::bisect(|z| self.u0_at(z) - u, self.z[k], self.z[k + 1], 1e-15))
    }

    /// Smallest `U0'` over the band where `U0` lies in `[-1 + b, 1 - b]`.
    pub fn interior_slope(&self, b: f64) -> f64 {
        self.u0
            .iter()
            .zip(&self.du0)
            .filter(|(u, _)| u.abs() <= 1.0 - b)
            .map(|(_, d)| *d)
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{analyze_nonlinearity, AnalysisOptions, PolynomialNonlinearity};
    use std::sync::Arc;

    fn cubic() -> BistableModel {
        analyze_nonlinearity(Arc::new(PolynomialNonlinearity::cubic()), AnalysisOptions::default())
            .unwrap()
    }

    #[test]
    fn cubic_is_tanh() {
        let m = cubic();
        let w = standing_wave(&m, None, 4001).unwrap();
        let s = std::f64::consts::SQRT_2;
        let err = w
            .z
            .iter()
            .zip(&w.u0)
            .filter(|(z, _)| z.abs() <= 10.0)
            .map(|(z, u)| (u - (z / s).tanh()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "err {err}");
        assert_eq!(w.u0[w.len() / 2], 0.0);
        assert!((w.lambda - s).abs() < 0.02 * s);
    }

    #[test]
    fn residual_and_monotone() {
        let m = cubic();
        let w = standing_wave(&m, None, 4001).unwrap();
        assert!(w.u0.windows(2).all(|p| p[1] > p[0]));
        // second difference against -f(U0)
        let h = w.dz;
        let res = (1..w.len() - 1)
            .map(|i| ((w.u0[i + 1] - 2.0 * w.u0[i] + w.u0[i - 1]) / (h * h) - w.d2u0[i]).abs())
            .fold(0.0, f64::max);
        assert!(res < 1e-5, "res {res}");
    }

    #[test]
    fn interpolation_and_tails() {
        let m = cubic();
        let w = standing_wave(&m, None, 4001).unwrap();
        let s = std::f64::consts::SQRT_2;
        for z in [-13.0, -5.123, 0.0007, 2.5, 11.2, 14.0] {
            assert!((w.u0_at(z) - (z / s).tanh()).abs() < 1e-9, "z {z}");
            let d = 1.0 / (s * (z / s).cosh().powi(2));
            assert!((w.du0_at(z) - d).abs() < 1e-9, "z {z}");
        }
        for u in [-0.999999, -0.4, 0.0, 0.6, 0.9999999] {
            let z = w.z_at_level(u).unwrap();
            assert!((w.u0_at(z) - u).abs() < 1e-13, "u {u}");
            assert!((z - s * u.atanh()).abs() < 1e-8 / (1.0 - u * u), "u {u}");
        }
    }

    #[test]
    fn interior_slope_floor() {
        let m = cubic();
        let w = standing_wave(&m, None, 4001).unwrap();
        let a1 = w.interior_slope(m.b);
        // U0' = (1 - U0^2)/sqrt 2 is smallest at |U0| = 1 - b
        let edge = 1.0 - m.b;
        let exact = (1.0 - edge * edge) / std::f64::consts::SQRT_2;
        assert!(a1 >= exact - 1e-9 && a1 < exact + 2e-3);
    }
}
