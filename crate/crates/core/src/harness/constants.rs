//! Constant recipes for the sub/super-solution pairs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BistableModel;
use crate::profile::{flow_series, ode_flow, ProfileTable, StandingWave};

/// Smallest `z >= 0` with `U0(z) >= 1 - tol` and `U0(-z) <= -1 + tol`.
pub fn layer_half_width(wave: &StandingWave, tol: f64) -> Result<f64> {
    let zp = wave.z_at_level(1.0 - tol)?;
    let zm = wave.z_at_level(-1.0 + tol)?;
    Ok(zp.max(-zm).max(0.0))
}

/// Constants of the motion pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionConstants {
    pub beta: f64,
    pub sigma: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub k: f64,
    pub l: f64,
    pub eps0: f64,
    /// Cut-off distance `d0`.
    pub d0: f64,
    /// Horizon `T`.
    pub horizon: f64,
    /// Bound on the corrector term `sup |V| sup |gamma|`.
    pub corrector_bound: f64,
    pub eta: f64,
    /// Initial band constant.
    pub m1: f64,
    /// Band constant of the final thickness statement.
    pub band: f64,
}

impl MotionConstants {
    /// `p(t) = -e^{-beta t/eps^2} + e^{L t} + K`.
    pub fn p(&self, eps: f64, t: f64) -> f64 {
        -(-self.beta * t / (eps * eps)).exp() + (self.l * t).exp() + self.k
    }

    pub fn dp(&self, eps: f64, t: f64) -> f64 {
        self.beta / (eps * eps) * (-self.beta * t / (eps * eps)).exp() + self.l * (self.l * t).exp()
    }

    /// `q(t) = sigma (beta e^{-beta t/eps^2} + eps^2 L e^{L t})`.
    pub fn q(&self, eps: f64, t: f64) -> f64 {
        self.sigma * (self.beta * (-self.beta * t / (eps * eps)).exp() + eps * eps * self.l * (self.l * t).exp())
    }
}

/// Builds the motion constants for horizon `horizon`, tolerance `eta`, cut-off
/// distance `d0` and initial band constant `m1`.
pub fn compute_motion_constants(
    model: &BistableModel,
    profile: &ProfileTable,
    horizon: f64,
    eta: f64,
    d0: f64,
    m1: f64,
) -> Result<MotionConstants> {
    let eta0 = model.eta0();
    if !(eta > 0.0 && eta < eta0) {
        return Err(Error::InvalidArgument(format!("eta = {eta} must lie in (0, {eta0})")));
    }
    if !(horizon > 0.0 && d0 > 0.0 && m1 >= 0.0) {
        return Err(Error::InvalidArgument("horizon, d0 must be positive and m1 nonnegative".into()));
    }
    let a1 = model
        .a1
        .unwrap_or_else(|| profile.wave.interior_slope(model.b));
    let m = model.m;
    let beta = m / 4.0;
    let sigma0 = a1 / (m + model.f1);
    let sigma1 = 1.0 / (beta + 1.0);
    let sigma2 = 4.0 * beta / (model.hessian_bound * (beta + 1.0));
    let sigma = sigma0.min(sigma1).min(sigma2).min(eta / (3.0 * beta));

    let wave = &profile.wave;
    let tol_k = sigma * beta / 3.0;
    let reach = layer_half_width(wave, tol_k)?;
    if reach > wave.z_max {
        return Err(Error::NoAdmissibleK { needed: reach, half_width: wave.z_max });
    }
    // U0(K - M1) >= 1 - tol and U0(M1 - K) <= -1 + tol, K > 1
    let k = (m1 + reach).max(1.0 + 1e-12);

    let corrector_bound = profile.corrector.m_bound * model.domain_area;
    // shrink eps0 until every smallness condition holds
    let mut eps0 = 0.25 * d0;
    let mut l;
    let mut iterations = 0;
    loop {
        eps0 *= 0.5;
        iterations += 1;
        l = (d0 / (4.0 * eps0)).ln() / horizon;
        let elt = (l * horizon).exp();
        let ok = l > 0.0
            && elt + k <= d0 / (2.0 * eps0)
            && eps0 * corrector_bound <= sigma * beta / 6.0
            && eps0 * corrector_bound <= 1.0
            && eps0 * eps0 * l * elt <= 1.0;
        if ok {
            break;
        }
        if iterations > 200 {
            return Err(Error::InvalidArgument("no admissible eps0 for the motion constants".into()));
        }
    }
    let elt = (l * horizon).exp();
    let band = elt + k + layer_half_width(wave, 0.5 * eta)?;
    Ok(MotionConstants {
        beta,
        sigma,
        sigma0,
        sigma1,
        sigma2,
        k,
        l,
        eps0,
        d0,
        horizon,
        corrector_bound,
        eta,
        m1,
        band,
    })
}

/// Result of probing the flow `Y(tau, xi; delta)` on a lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowLattice {
    pub xi_bound: f64,
    pub delta_bound: f64,
    pub taus: Vec<f64>,
    pub points: usize,
    pub min_y_xi: f64,
    pub max_abs_y: f64,
    /// `C` fitted on the interior delta levels.
    pub constant: f64,
    /// Fraction of lattice points (all delta levels) exceeding `C (e^{mu(delta) tau} - 1)`.
    pub violation_fraction: f64,
    /// Same fraction restricted to the two extreme delta levels.
    pub boundary_violation_fraction: f64,
}

/// Probes `n_xi x n_delta x taus` points with `xi` in `[-xi_bound, xi_bound]`
/// and `delta` in `[-delta_bound, delta_bound]` (both ends included).
pub fn flow_lattice(
    model: &BistableModel,
    xi_bound: f64,
    delta_bound: f64,
    n_xi: usize,
    n_delta: usize,
    taus: &[f64],
) -> Result<FlowLattice> {
    if n_xi < 2 || n_delta < 3 || taus.is_empty() {
        return Err(Error::InvalidArgument("flow lattice needs n_xi >= 2, n_delta >= 3 and taus".into()));
    }
    let lin = |k: usize, n: usize, b: f64| -b + 2.0 * b * k as f64 / (n - 1) as f64;
    let deltas: Vec<f64> = (0..n_delta).map(|k| lin(k, n_delta, delta_bound)).collect();
    let mus: Vec<f64> = deltas.iter().map(|&d| model.mu_delta(d)).collect::<Result<_>>()?;
    // rows: (delta index, tau index, y, y_xi, scaled ratio)
    let rows: Vec<Vec<(usize, f64, f64, f64)>> = (0..n_delta * n_xi)
        .into_par_iter()
        .map(|job| {
            let (kd, kx) = (job / n_xi, job % n_xi);
            let xi = lin(kx, n_xi, xi_bound);
            let series = flow_series(model, taus, xi, deltas[kd])?;
            Ok(series
                .iter()
                .zip(taus)
                .map(|(s, &tau)| {
                    let growth = (mus[kd] * tau).exp_m1();
                    let scaled = if growth > 0.0 { s.ratio.abs() / growth } else { 0.0 };
                    (kd, s.y, s.y_xi, scaled)
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let all: Vec<_> = rows.into_iter().flatten().collect();
    let interior = |kd: usize| kd > 0 && kd + 1 < n_delta;
    let constant = all.iter().filter(|r| interior(r.0)).map(|r| r.3).fold(0.0, f64::max);
    let over = |r: &&(usize, f64, f64, f64)| r.3 > constant;
    let violations = all.iter().filter(over).count();
    let boundary: Vec<_> = all.iter().filter(|r| !interior(r.0)).collect();
    let boundary_violations = boundary.iter().filter(|r| r.3 > constant).count();
    Ok(FlowLattice {
        xi_bound,
        delta_bound,
        taus: taus.to_vec(),
        points: all.len(),
        min_y_xi: all.iter().map(|r| r.2).fold(f64::INFINITY, f64::min),
        max_abs_y: all.iter().map(|r| r.1.abs()).fold(0.0, f64::max),
        constant,
        violation_fraction: violations as f64 / all.len() as f64,
        boundary_violation_fraction: boundary_violations as f64 / boundary.len().max(1) as f64,
    })
}

/// `C_star` for the generation pair: `2 (C |grad u0|^2 + |Lap u0|) / mu`, with
/// `C` the fitted flow constant. The factor 2 absorbs `mu(delta) >= mu / 2`.
pub fn generation_cstar(model: &BistableModel, flow_constant: f64, grad_sup: f64, laplacian_sup: f64) -> f64 {
    2.0 * (flow_constant * grad_sup * grad_sup + laplacian_sup) / model.mu
}

/// Smallest `M` such that after the generation time `mu^{-1} |ln eps|` the
/// unperturbed flow started at `a +- M eps` is within `eta` of the wells.
pub fn flow_reach(model: &BistableModel, eps: f64, eta: f64) -> Result<f64> {
    let tau = eps.ln().abs() / model.mu;
    let gap = |m: f64| -> Result<f64> {
        let up = ode_flow(model, tau, model.a + m * eps, 0.0)?.y - (1.0 - eta);
        let down = (-1.0 + eta) - ode_flow(model, tau, model.a - m * eps, 0.0)?.y;
        Ok(up.min(down))
    };
    let mut hi = 1.0;
    while gap(hi)? < 0.0 {
        hi *= 2.0;
        if model.a + hi * eps > model.u_plus || model.a - hi * eps < model.u_minus {
            return Err(Error::NeverGenerated { t_max: tau * eps * eps });
        }
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if gap(mid)? >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{analyze_nonlinearity, AnalysisOptions, PolynomialNonlinearity};
    use crate::profile::build_profile;
    use std::sync::Arc;

    fn cubic() -> BistableModel {
        analyze_nonlinearity(
            Arc::new(PolynomialNonlinearity::cubic().with_coupling(-1.0)),
            AnalysisOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn cubic_recipe() {
        let m = cubic();
        let p = build_profile(&m, None, 4001).unwrap();
        let c = compute_motion_constants(&m, &p, 0.03, 0.3, 0.05, 2.0).unwrap();
        assert!((c.beta - 0.25).abs() < 1e-12);
        assert!((c.sigma1 - 0.8).abs() < 1e-12);
        assert!(c.sigma <= c.sigma1 && c.sigma <= c.sigma0 && c.sigma <= c.sigma2);
        assert!(c.sigma * c.beta <= 0.1 + 1e-15);
        // (K)
        let tol = c.sigma * c.beta / 3.0;
        assert!(p.wave.u0_at(c.k - c.m1) >= 1.0 - tol - 1e-12);
        assert!(p.wave.u0_at(c.m1 - c.k) <= -1.0 + tol + 1e-12);
        assert!(c.k > 1.0);
        // smallest such K
        assert!(p.wave.u0_at(c.k - c.m1 - 1e-6) < 1.0 - tol);
        // (ga) and L
        let elt = (c.l * c.horizon).exp();
        assert!(elt + c.k <= c.d0 / (2.0 * c.eps0));
        assert!((c.l - (c.d0 / (4.0 * c.eps0)).ln() / c.horizon).abs() < 1e-9 * c.l);
    }

    #[test]
    fn q_is_scaled_p_derivative() {
        let m = cubic();
        let p = build_profile(&m, None, 4001).unwrap();
        let c = compute_motion_constants(&m, &p, 0.03, 0.3, 0.05, 2.0).unwrap();
        for eps in [0.08, 0.02] {
            for t in [0.0, 1e-4, 0.01, 0.03] {
                let lhs = c.q(eps, t);
                let rhs = c.sigma * eps * eps * c.dp(eps, t);
                assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
                // closed form derivative against a central difference
                let h = 1e-7;
                let fd = (c.p(eps, t + h) - c.p(eps, t - h)) / (2.0 * h);
                assert!((fd - c.dp(eps, t)).abs() < 1e-4 * c.dp(eps, t).abs());
            }
        }
    }

    #[test]
    fn eta_range_checked() {
        let m = cubic();
        let p = build_profile(&m, None, 2001).unwrap();
        assert!(compute_motion_constants(&m, &p, 0.03, 1.5, 0.05, 2.0).is_err());
        assert!(compute_motion_constants(&m, &p, 0.03, 0.0, 0.05, 2.0).is_err());
    }

    #[test]
    fn short_table_has_no_k() {
        let m = cubic();
        let p = build_profile(&m, Some(2.0), 2001).unwrap();
        assert!(matches!(
            compute_motion_constants(&m, &p, 0.03, 0.3, 0.05, 2.0),
            Err(Error::NoAdmissibleK { .. })
        ));
    }

    #[test]
    fn half_width_of_tanh() {
        let m = cubic();
        let p = build_profile(&m, None, 4001).unwrap();
        let z = layer_half_width(&p.wave, 0.1).unwrap();
        let exact = std::f64::consts::SQRT_2 * 0.9f64.atanh();
        assert!((z - exact).abs() < 1e-8);
    }

    #[test]
    fn lattice_properties() {
        let m = cubic();
        let lat = flow_lattice(&m, 2.0, m.delta0, 8, 5, &[0.25, 1.0, 3.0]).unwrap();
        assert_eq!(lat.points, 8 * 5 * 3);
        assert!(lat.min_y_xi > 0.0);
        assert!(lat.max_abs_y <= 2.0 + 1e-12);
        assert!(lat.constant.is_finite() && lat.constant > 0.0);
    }

    #[test]
    fn reach_for_the_logistic_cubic() {
        // for the unperturbed cubic Y = xi e^tau / sqrt(1 + xi^2 (e^{2 tau} - 1))
        let m = cubic();
        let eps = 0.01;
        let eta = 0.2;
        let reach = flow_reach(&m, eps, eta).unwrap();
        let e2 = 1.0 / (eps * eps);
        let y = |xi: f64| xi / eps / (1.0 + xi * xi * (e2 - 1.0)).sqrt();
        assert!((y(reach * eps) - 0.8).abs() < 1e-8);
    }
}
