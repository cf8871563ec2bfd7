//! Reaction terms `f(u, v)` and the bistable structure of their slice `f(u, 0)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{bisect, integrate, safeguarded_newton};

const FD_STEP: f64 = 1e-5;
const FD_STEP2: f64 = 1e-4;

/// A smooth reaction term `f(u, v)`. Derivatives default to central differences.
pub trait Nonlinearity: Send + Sync + fmt::Debug {
    fn value(&self, u: f64, v: f64) -> f64;

    fn du(&self, u: f64, v: f64) -> f64 {
        (self.value(u + FD_STEP, v) - self.value(u - FD_STEP, v)) / (2.0 * FD_STEP)
    }

    fn dv(&self, u: f64, v: f64) -> f64 {
        (self.value(u, v + FD_STEP) - self.value(u, v - FD_STEP)) / (2.0 * FD_STEP)
    }

    fn duu(&self, u: f64, v: f64) -> f64 {
        let h = FD_STEP2;
        (self.value(u + h, v) - 2.0 * self.value(u, v) + self.value(u - h, v)) / (h * h)
    }

    fn duv(&self, u: f64, v: f64) -> f64 {
        let h = FD_STEP2;
        (self.value(u + h, v + h) - self.value(u + h, v - h) - self.value(u - h, v + h)
            + self.value(u - h, v - h))
            / (4.0 * h * h)
    }

    fn dvv(&self, u: f64, v: f64) -> f64 {
        let h = FD_STEP2;
        (self.value(u, v + h) - 2.0 * self.value(u, v) + self.value(u, v - h)) / (h * h)
    }

    /// Closed-form antiderivative of `u -> f(u, 0)`, when one is known.
    fn primitive(&self, _u: f64) -> Option<f64> {
        None
    }

    /// Fast path for the grid kernels.
    fn as_polynomial(&self) -> Option<&PolynomialNonlinearity> {
        None
    }
}

/// `f(u, v) = sum_k coeffs[k] u^k + coupling * v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialNonlinearity {
    pub coeffs: Vec<f64>,
    pub coupling: f64,
}

impl PolynomialNonlinearity {
    pub fn new(coeffs: Vec<f64>, coupling: f64) -> Self {
        Self { coeffs, coupling }
    }

    /// `u - u^3 - v`: standing wave `tanh(z / sqrt 2)`, `c0 = 3 / sqrt 2`.
    pub fn cubic() -> Self {
        Self::new(vec![0.0, 1.0, 0.0, -1.0], -1.0)
    }

    pub fn with_coupling(mut self, coupling: f64) -> Self {
        self.coupling = coupling;
        self
    }

    #[inline]
    pub fn poly(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }

    #[inline]
    pub fn poly_d1(&self, u: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * u + k as f64 * c)
    }

    pub fn poly_d2(&self, u: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(2)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * u + (k * (k - 1)) as f64 * c)
    }
}

impl Nonlinearity for PolynomialNonlinearity {
    #[inline]
    fn value(&self, u: f64, v: f64) -> f64 {
        self.poly(u) + self.coupling * v
    }
    fn du(&self, u: f64, _v: f64) -> f64 {
        self.poly_d1(u)
    }
    fn dv(&self, _u: f64, _v: f64) -> f64 {
        self.coupling
    }
    fn duu(&self, u: f64, _v: f64) -> f64 {
        self.poly_d2(u)
    }
    fn duv(&self, _u: f64, _v: f64) -> f64 {
        0.0
    }
    fn dvv(&self, _u: f64, _v: f64) -> f64 {
        0.0
    }
    fn primitive(&self, u: f64) -> Option<f64> {
        Some(
            self.coeffs
                .iter()
                .enumerate()
                .rev()
                .fold(0.0, |acc, (k, c)| acc * u + c / (k + 1) as f64)
                * u,
        )
    }
    fn as_polynomial(&self) -> Option<&PolynomialNonlinearity> {
        Some(self)
    }
}

/// Wraps a plain closure; all derivatives by central differences.
pub struct FnNonlinearity<F>(pub F);

impl<F> fmt::Debug for FnNonlinearity<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnNonlinearity")
    }
}

impl<F> Nonlinearity for FnNonlinearity<F>
where
    F: Fn(f64, f64) -> f64 + Send + Sync,
{
    fn value(&self, u: f64, v: f64) -> f64 {
        (self.0)(u, v)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AnalysisOptions {
    /// Tolerance on `f(+-1, 0) = 0`.
    pub zero_tol: f64,
    /// Tolerance on `|int_{-1}^{1} f(u,0) du|`.
    pub balance_tol: f64,
    /// Initial-data bound `C0 >= 1`.
    pub initial_bound: f64,
    /// `|Omega|`.
    pub domain_area: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { zero_tol: 1e-8, balance_tol: 1e-8, initial_bound: 1.0, domain_area: 1.0 }
    }
}

/// A bistable, balanced reaction term together with the constants the layer
/// analysis needs.
#[derive(Clone)]
pub struct BistableModel {
    f: Arc<dyn Nonlinearity>,
    pub u_minus: f64,
    /// Unstable zero of `f(., 0)`.
    pub a: f64,
    pub u_plus: f64,
    /// `f'(a)`.
    pub mu: f64,
    /// Outer decay constant: `f' <= -m` on the outer bands of width `b`.
    pub m: f64,
    pub b: f64,
    /// Interior slope floor of the standing wave; known once a profile exists.
    pub a1: Option<f64>,
    /// `sup |f'|` on `[-1, 1]`.
    pub f1: f64,
    /// Max Hessian entry on `[-3, 3] x [-1, 1]`.
    pub hessian_bound: f64,
    /// Initial-data bound `C0`.
    pub initial_bound: f64,
    pub domain_area: f64,
    /// Nonlocal perturbation bound `2 C0 |Omega| max |df/dv|`.
    pub g_const: f64,
    /// Safe perturbation range for the bistable ODE (dyadic scan, halved).
    pub delta0: f64,
    /// `f(., 0) + delta` keeps three zeros iff `-delta_lower < delta < delta_upper`.
    pub delta_lower: f64,
    pub delta_upper: f64,
    balance_offset: f64,
}

impl fmt::Debug for BistableModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BistableModel")
            .field("f", &self.f)
            .field("a", &self.a)
            .field("mu", &self.mu)
            .field("m", &self.m)
            .field("b", &self.b)
            .field("a1", &self.a1)
            .field("f1", &self.f1)
            .field("hessian_bound", &self.hessian_bound)
            .field("g_const", &self.g_const)
            .field("delta0", &self.delta0)
            .finish()
    }
}

/// Zeros of `f(., 0) + delta` and the slope at the middle one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbedZeros {
    pub alpha_minus: f64,
    pub a_delta: f64,
    pub alpha_plus: f64,
    pub mu_delta: f64,
}

/// Sign changes of `g` on a lattice over `[lo, hi]`, refined by bisection.
fn lattice_roots<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    // offset lattice so that the usual zeros (-1, 0, 1) never sit on a node
    let h = (hi - lo) / n as f64;
    let mut brackets = Vec::new();
    let mut x0 = lo + 0.5 * h;
    let mut g0 = g(x0);
    for i in 1..n {
        let x1 = lo + (i as f64 + 0.5) * h;
        let g1 = g(x1);
        if g0 == 0.0 {
            brackets.push((x0, x0));
        } else if g0 * g1 < 0.0 {
            brackets.push((x0, x1));
        }
        x0 = x1;
        g0 = g1;
    }
    brackets
}

fn polish<G: Fn(f64) -> f64, D: Fn(f64) -> f64>(g: &G, dg: &D, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        safeguarded_newton(g, dg, lo, hi, 1e-15)
    }
}

impl BistableModel {
    pub fn nonlinearity(&self) -> &Arc<dyn Nonlinearity> {
        &self.f
    }

    #[inline]
    pub fn f(&self, u: f64, v: f64) -> f64 {
        self.f.value(u, v)
    }

    #[inline]
    pub fn f_tilde(&self, u: f64) -> f64 {
        self.f.value(u, 0.0)
    }

    #[inline]
    pub fn df_tilde(&self, u: f64) -> f64 {
        self.f.du(u, 0.0)
    }

    pub fn d2f_tilde(&self, u: f64) -> f64 {
        self.f.duu(u, 0.0)
    }

    pub fn df_dv(&self, u: f64, v: f64) -> f64 {
        self.f.dv(u, v)
    }

    /// `W(u) - W(-1)` where `f(u, 0) = -W'(u)`; nonnegative, zero at the wells.
    pub fn well_gap(&self, u: f64) -> f64 {
        let gap = if let Some(p_u) = self.f.primitive(u) {
            let p = |x: f64| self.f.primitive(x).unwrap_or(0.0);
            if u <= self.a {
                p(-1.0) - p_u
            } else {
                (p(1.0) - p_u) + self.balance_offset
            }
        } else if u <= self.a {
            integrate(|s| -self.f_tilde(s), -1.0, u, 1e-14)
        } else {
            integrate(|s| self.f_tilde(s), u, 1.0, 1e-14) + self.balance_offset
        };
        gap.max(0.0)
    }

    /// Swaps the reaction term but keeps every derived constant. Only for
    /// experiments that deliberately leave the bistable class (heat flow, blow-up).
    pub fn with_nonlinearity_unchecked(mut self, f: Arc<dyn Nonlinearity>) -> Self {
        self.f = f;
        self
    }

    /// Recompute the data-dependent constants for a new `C0`.
    pub fn with_initial_bound(mut self, initial_bound: f64) -> Self {
        self.initial_bound = initial_bound.max(1.0);
        self.g_const = g_constant(self.f.as_ref(), self.initial_bound, self.domain_area);
        self
    }

    pub fn with_domain_area(mut self, domain_area: f64) -> Self {
        self.domain_area = domain_area;
        self.g_const = g_constant(self.f.as_ref(), self.initial_bound, self.domain_area);
        self
    }

    /// Number of sign changes of `f(., 0) + delta` on `[-3, 3]`.
    pub fn root_count(&self, delta: f64) -> usize {
        lattice_roots(|u| self.f_tilde(u) + delta, -3.0, 3.0, 6000).len()
    }

    pub fn check_delta(&self, delta: f64) -> Result<()> {
        if delta <= -self.delta_lower || delta >= self.delta_upper || !delta.is_finite() {
            return Err(Error::DeltaTooLarge {
                delta,
                lower: -self.delta_lower,
                upper: self.delta_upper,
            });
        }
        Ok(())
    }

    /// Zeros of the perturbed nonlinearity `f(., 0) + delta` by safeguarded Newton.
    pub fn perturbed_zeros(&self, delta: f64) -> Result<PerturbedZeros> {
        self.check_delta(delta)?;
        let g = |u: f64| self.f_tilde(u) + delta;
        let dg = |u: f64| self.df_tilde(u);
        let brackets = lattice_roots(g, -3.0, 3.0, 6000);
        if brackets.len() != 3 {
            return Err(Error::DeltaTooLarge {
                delta,
                lower: -self.delta_lower,
                upper: self.delta_upper,
            });
        }
        let alpha_minus = polish(&g, &dg, brackets[0]);
        let a_delta = polish(&g, &dg, brackets[1]);
        let alpha_plus = polish(&g, &dg, brackets[2]);
        Ok(PerturbedZeros { alpha_minus, a_delta, alpha_plus, mu_delta: self.df_tilde(a_delta) })
    }

    /// `mu(delta) = f'(a(delta))`.
    pub fn mu_delta(&self, delta: f64) -> Result<f64> {
        if delta == 0.0 {
            return Ok(self.mu);
        }
        Ok(self.perturbed_zeros(delta)?.mu_delta)
    }

    /// `eta_0 = min(a + 1, 1 - a)`.
    pub fn eta0(&self) -> f64 {
        (self.a + 1.0).min(1.0 - self.a)
    }
}

fn g_constant(f: &dyn Nonlinearity, c0: f64, area: f64) -> f64 {
    let mut max_dv: f64 = 0.0;
    for i in 0..=400 {
        let u = -2.0 * c0 + 4.0 * c0 * i as f64 / 400.0;
        for j in 0..=40 {
            let v = -1.0 + 2.0 * j as f64 / 40.0;
            max_dv = max_dv.max(f.dv(u, v).abs());
        }
    }
    2.0 * c0 * area * max_dv
}

/// Largest `delta` with `f + delta` still having exactly the zero count
/// reached from `f`, found by sampling the extremum between two zeros.
fn extremum_between<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64) -> f64 {
    let n = 4000;
    let mut best = f64::NEG_INFINITY;
    let mut best_x = lo;
    for i in 1..n {
        let x = lo + (hi - lo) * i as f64 / n as f64;
        let v = g(x);
        if v > best {
            best = v;
            best_x = x;
        }
    }
    // golden-section polish around the best sample
    let step = (hi - lo) / n as f64;
    let (mut a, mut b) = (best_x - step, best_x + step);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if g(c) > g(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.max(g(0.5 * (a + b)))
}

/// Introspect a reaction term: zeros, slopes and the constants of the layer analysis.
///
/// Checks the balance condition first, then the sign pattern of the three zeros.
pub fn analyze_nonlinearity(
    f: Arc<dyn Nonlinearity>,
    opts: AnalysisOptions,
) -> Result<BistableModel> {
    let ft = |u: f64| f.value(u, 0.0);

    let balance = match (f.primitive(1.0), f.primitive(-1.0)) {
        (Some(p1), Some(pm1)) => p1 - pm1,
        _ => integrate(ft, -1.0, 1.0, 1e-14),
    };
    if balance.abs() > opts.balance_tol {
        return Err(Error::Unbalanced { integral: balance, tol: opts.balance_tol });
    }

    let brackets = lattice_roots(ft, -2.0, 2.0, 4000);
    if brackets.len() != 3 {
        return Err(Error::NotBistable(format!(
            "f(u,0) has {} sign changes on [-2, 2], expected 3",
            brackets.len()
        )));
    }
    let dft = |u: f64| f.du(u, 0.0);
    let zeros: Vec<f64> = brackets.iter().map(|&br| polish(&ft, &dft, br)).collect();
    let (u_minus, a, u_plus) = (zeros[0], zeros[1], zeros[2]);
    if (u_minus + 1.0).abs() > 1e3 * opts.zero_tol.max(1e-12)
        || (u_plus - 1.0).abs() > 1e3 * opts.zero_tol.max(1e-12)
    {
        return Err(Error::NotBistable(format!(
            "stable zeros must be -1 and +1, found {u_minus} and {u_plus}"
        )));
    }
    if ft(-1.0).abs() > opts.zero_tol || ft(1.0).abs() > opts.zero_tol {
        return Err(Error::NotBistable("f(+-1, 0) is not zero".into()));
    }
    let (s_minus, mu, s_plus) = (dft(-1.0), dft(a), dft(1.0));
    if !(s_minus < 0.0 && mu > 0.0 && s_plus < 0.0) {
        return Err(Error::NotBistable(format!(
            "slopes at the zeros are ({s_minus}, {mu}, {s_plus}), expected (-, +, -)"
        )));
    }

    let m = 0.5 * s_minus.abs().min(s_plus.abs());
    // widest outer band (<= 0.5) on which f' <= -m, scanned from each well
    let band = |start: f64, dir: f64| -> f64 {
        let n = 5000;
        let mut last_ok = 0.0;
        for i in 1..=n {
            let s = 0.5 * i as f64 / n as f64;
            if dft(start + dir * s) > -m {
                let lo = last_ok;
                return bisect(|s| dft(start + dir * s) + m, lo, s, 1e-13).min(0.5);
            }
            last_ok = s;
        }
        0.5
    };
    let b = band(-1.0, 1.0).min(band(1.0, -1.0));

    let f1 = (0..=4000)
        .map(|i| dft(-1.0 + 2.0 * i as f64 / 4000.0).abs())
        .fold(0.0, f64::max);

    let mut hessian_bound: f64 = 0.0;
    for i in 0..=400 {
        let u = -3.0 + 6.0 * i as f64 / 400.0;
        for j in 0..=40 {
            let v = -1.0 + 2.0 * j as f64 / 40.0;
            let entry = f.duu(u, v).abs().max(f.duv(u, v).abs()).max(f.dvv(u, v).abs());
            hessian_bound = hessian_bound.max(entry);
        }
    }

    let delta_upper = extremum_between(|u| -ft(u), u_minus, a);
    let delta_lower = extremum_between(ft, a, u_plus);

    let initial_bound = opts.initial_bound.max(1.0);
    let mut model = BistableModel {
        g_const: g_constant(f.as_ref(), initial_bound, opts.domain_area),
        f,
        u_minus: -1.0,
        a,
        u_plus: 1.0,
        mu,
        m,
        b,
        a1: None,
        f1,
        hessian_bound,
        initial_bound,
        domain_area: opts.domain_area,
        delta0: 0.0,
        delta_lower,
        delta_upper,
        balance_offset: -balance,
    };
    model.delta0 = (0..=40)
        .map(|k| 0.5f64.powi(k))
        .find(|&d| model.root_count(d) == 3 && model.root_count(-d) == 3)
        .map(|d| 0.5 * d)
        .unwrap_or(0.0);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic() -> BistableModel {
        analyze_nonlinearity(Arc::new(PolynomialNonlinearity::cubic()), AnalysisOptions::default())
            .unwrap()
    }

    #[test]
    fn cubic_zeros_and_slopes() {
        let m = cubic();
        assert!((m.u_minus + 1.0).abs() < 1e-14 && (m.u_plus - 1.0).abs() < 1e-14);
        assert!(m.a.abs() < 1e-14);
        assert!((m.mu - 1.0).abs() < 1e-14);
        // f'(+-1) = 1 - 3 = -2, half of it
        assert!((m.m - 1.0).abs() < 1e-14);
        // 1 - 3u^2 <= -1  <=>  |u| >= sqrt(2/3)
        assert!((m.b - (1.0 - (2.0f64 / 3.0).sqrt())).abs() < 1e-10);
        assert!((m.f1 - 2.0).abs() < 1e-12);
        assert!((m.hessian_bound - 18.0).abs() < 1e-12);
        assert!((m.g_const - 2.0).abs() < 1e-12);
        // u^3 - u peaks at 2 / (3 sqrt 3) on (-1, 0)
        let crit = 2.0 / (3.0 * 3f64.sqrt());
        assert!((m.delta_upper - crit).abs() < 1e-9);
        assert!((m.delta_lower - crit).abs() < 1e-9);
        assert_eq!(m.delta0, 0.125);
    }

    #[test]
    fn unbalanced_shift_rejected() {
        let shifted = PolynomialNonlinearity::new(vec![0.5, 1.0, 0.0, -1.0], 0.0);
        let err = analyze_nonlinearity(Arc::new(shifted), AnalysisOptions::default()).unwrap_err();
        match err {
            Error::Unbalanced { integral, .. } => assert!((integral - 1.0).abs() < 1e-12),
            other => panic!("expected Unbalanced, got {other:?}"),
        }
    }

    #[test]
    fn monostable_rejected() {
        // u - u^3 flipped: stable zero at 0, unstable at +-1
        let flipped = PolynomialNonlinearity::new(vec![0.0, -1.0, 0.0, 1.0], 0.0);
        assert!(matches!(
            analyze_nonlinearity(Arc::new(flipped), AnalysisOptions::default()),
            Err(Error::NotBistable(_))
        ));
    }

    #[test]
    fn closure_model_matches_polynomial() {
        let f = FnNonlinearity(|u: f64, v: f64| u - u * u * u - v);
        let m = analyze_nonlinearity(Arc::new(f), AnalysisOptions::default()).unwrap();
        let p = cubic();
        assert!((m.mu - p.mu).abs() < 1e-8);
        assert!((m.b - p.b).abs() < 1e-6);
        assert!((m.hessian_bound - 18.0).abs() < 1e-3);
        for u in [-0.9, -0.3, 0.2, 0.95] {
            assert!((m.well_gap(u) - p.well_gap(u)).abs() < 1e-12);
        }
    }

    #[test]
    fn well_gap_closed_form() {
        let m = cubic();
        for u in [-1.0, -0.999, -0.5, 0.0, 0.3, 0.9999, 1.0] {
            let exact = (1.0 - u * u) * (1.0 - u * u) / 4.0;
            assert!((m.well_gap(u) - exact).abs() < 1e-15, "u = {u}");
        }
    }

    #[test]
    fn perturbed_zeros_identity() {
        let m = cubic();
        let z = m.perturbed_zeros(0.0).unwrap();
        assert!((z.alpha_minus + 1.0).abs() < 1e-14);
        assert!(z.a_delta.abs() < 1e-14);
        assert!((z.alpha_plus - 1.0).abs() < 1e-14);
        assert!((z.mu_delta - 1.0).abs() < 1e-14);
    }

    #[test]
    fn perturbed_middle_zero_first_order() {
        let m = cubic();
        let delta = 0.01;
        let z = m.perturbed_zeros(delta).unwrap();
        // independent oracle: plain bisection on u - u^3 + delta around 0
        let oracle = bisect(|u| u - u * u * u + delta, -0.5, 0.5, 1e-16);
        assert!((z.a_delta - oracle).abs() < 1e-14);
        // a(delta) = -delta/mu + O(delta^2); here the remainder is ~delta^3
        assert!((z.a_delta + delta / m.mu).abs() <= delta * delta);
    }

    #[test]
    fn perturbed_outer_zeros_linear_in_delta() {
        let m = cubic();
        let deltas: Vec<f64> = (-5..=5).filter(|&k| k != 0).map(|k| 0.01 * k as f64).collect();
        let ratios: Vec<f64> = deltas
            .iter()
            .map(|&d| (m.perturbed_zeros(d).unwrap().alpha_plus - 1.0).abs() / d.abs())
            .collect();
        // one constant C bounds the whole sweep; linearization gives 1/|f'(1)| = 0.5
        let c = ratios.iter().cloned().fold(0.0, f64::max);
        assert!(c < 0.6 && c > 0.45, "C = {c}");
    }

    #[test]
    fn delta_too_large() {
        let m = cubic();
        assert!(matches!(m.perturbed_zeros(0.5), Err(Error::DeltaTooLarge { .. })));
        assert!(matches!(m.perturbed_zeros(-0.39), Err(Error::DeltaTooLarge { .. })));
        assert!(m.perturbed_zeros(0.38).is_ok());
    }
}
