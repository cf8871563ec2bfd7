//! Numerical checks of a sub/super-solution pair: residual signs, ordering,
//! and the sandwich around a computed solution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::constants::MotionConstants;
use super::pairs::SolutionPair;
use crate::error::{Error, Result};
use crate::grid::{Field2D, Grid2D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    Generation,
    Motion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Sample every `stride`-th interior node for the residuals.
    pub stride: usize,
    /// Nodes skipped next to the boundary.
    pub margin: usize,
    /// Spatial spacing of the difference stencils (fraction of the grid spacing).
    pub stencil_fraction: f64,
    /// Time spacing of the difference quotient.
    pub time_spacing: f64,
    /// `C_num` in the residual budget `C_num (h^2 + dt) / eps^2`.
    pub noise_constant: f64,
    /// Solver step entering the budget.
    pub solver_dt: f64,
    /// Pointwise tolerance of the ordering and sandwich comparisons.
    pub compare_tol: f64,
    pub min_residual_fraction: f64,
    pub min_sandwich_fraction: f64,
}

impl VerifyOptions {
    pub fn new(mode: PairMode, solver_dt: f64) -> Self {
        Self {
            stride: 4,
            margin: 2,
            stencil_fraction: 0.5,
            time_spacing: solver_dt,
            noise_constant: 1.0,
            solver_dt,
            compare_tol: 1e-9,
            min_residual_fraction: 0.99,
            min_sandwich_fraction: match mode {
                PairMode::Generation => 1.0,
                PairMode::Motion => 0.999,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub mode: PairMode,
    pub epsilon: f64,
    pub times: Vec<f64>,
    pub samples: usize,
    pub tol_residual: f64,
    /// Fraction of samples with `L+ upper >= -tol`.
    pub upper_residual_fraction: f64,
    /// Fraction of samples with `L- lower <= tol`.
    pub lower_residual_fraction: f64,
    /// Most negative `L+ upper` and most positive `L- lower`.
    pub worst_upper: f64,
    pub worst_lower: f64,
    /// Fraction of node-time pairs with `lower <= upper`.
    pub ordering_fraction: f64,
    /// `int lower <= int upper` at every time.
    pub integral_order: bool,
    /// `lower <= u <= upper` at the first time.
    pub initial_order: Option<bool>,
    pub sandwich_fraction: Option<f64>,
    /// Largest excursion of `u` outside `[lower, upper]`.
    pub sandwich_worst: Option<f64>,
    /// False when the nonlocal extremum was only sampled.
    pub nonlocal_exact: bool,
    pub residual_ok: bool,
    pub ordering_ok: bool,
    pub sandwich_ok: bool,
    pub passed: bool,
}

fn lap4(v: &[f64; 9], h: f64) -> f64 {
    // v = [c, x-2, x-1, x+1, x+2, y-2, y-1, y+1, y+2]
    let d2 = |m2: f64, m1: f64, p1: f64, p2: f64| (-m2 + 16.0 * m1 - 30.0 * v[0] + 16.0 * p1 - p2) / (12.0 * h * h);
    d2(v[1], v[2], v[3], v[4]) + d2(v[5], v[6], v[7], v[8])
}

/// Residual of both members at one point: `(L+ upper, L- lower)`.
fn residuals<P: SolutionPair>(
    pair: &P,
    x: f64,
    y: f64,
    t: f64,
    h: f64,
    ht: f64,
    masses: (f64, f64),
) -> Result<(f64, f64)> {
    let eps = pair.epsilon();
    let offsets = [(0.0, 0.0), (-2.0, 0.0), (-1.0, 0.0), (1.0, 0.0), (2.0, 0.0), (0.0, -2.0), (0.0, -1.0), (0.0, 1.0), (0.0, 2.0)];
    let mut lo = [0.0; 9];
    let mut hi = [0.0; 9];
    for (k, (dx, dy)) in offsets.iter().enumerate() {
        let (l, u) = pair.at(x + dx * h, y + dy * h, t)?;
        lo[k] = l;
        hi[k] = u;
    }
    let (lt, ut) = if t >= ht {
        let (l1, u1) = pair.at(x, y, t + ht)?;
        let (l0, u0) = pair.at(x, y, t - ht)?;
        ((l1 - l0) / (2.0 * ht), (u1 - u0) / (2.0 * ht))
    } else {
        let (l1, u1) = pair.at(x, y, t + ht)?;
        let (l2, u2) = pair.at(x, y, t + 2.0 * ht)?;
        ((-3.0 * lo[0] + 4.0 * l1 - l2) / (2.0 * ht), (-3.0 * hi[0] + 4.0 * u1 - u2) / (2.0 * ht))
    };
    let (m_lo, m_hi) = (masses.0.min(masses.1), masses.0.max(masses.1));
    let svals = [m_lo, 0.5 * (m_lo + m_hi), m_hi];
    let f = |u: f64, s: f64| pair.model().f(u, eps * s);
    let fmax = svals.iter().map(|&s| f(hi[0], s)).fold(f64::NEG_INFINITY, f64::max);
    let fmin = svals.iter().map(|&s| f(lo[0], s)).fold(f64::INFINITY, f64::min);
    let inv = 1.0 / (eps * eps);
    let upper = ut - lap4(&hi, h) - inv * fmax;
    let lower = lt - lap4(&lo, h) - inv * fmin;
    Ok((upper, lower))
}

/// Checks `pair` at `times` on `grid`. `solution`, when given, holds the
/// computed field at each of `times` (same grid) for the sandwich test.
pub fn verify_pair<P: SolutionPair>(
    pair: &P,
    grid: &Grid2D,
    times: &[f64],
    solution: Option<&[Field2D]>,
    mode: PairMode,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    if times.is_empty() {
        return Err(Error::InvalidArgument("no sample times".into()));
    }
    if let Some(s) = solution {
        if s.len() != times.len() || s.iter().any(|f| f.grid != *grid) {
            return Err(Error::InvalidArgument("solution snapshots do not match the sample times".into()));
        }
    }
    let eps = pair.epsilon();
    let h = grid.h_min();
    let tol_residual = opts.noise_constant * (h * h + opts.solver_dt) / (eps * eps);
    let sampled = pair.on_grid(grid, times)?;

    let mut ordered = 0usize;
    let mut integral_order = true;
    let mut masses = Vec::with_capacity(times.len());
    for (lo, hi) in &sampled {
        ordered += lo.iter().zip(hi).filter(|(l, u)| **l <= **u + opts.compare_tol).count();
        let (ml, mu) = (grid.integrate(lo), grid.integrate(hi));
        integral_order &= ml <= mu + opts.compare_tol;
        masses.push((ml, mu));
    }
    let ordering_fraction = ordered as f64 / (grid.len() * times.len()) as f64;

    let (mut initial_order, mut sandwich_fraction, mut sandwich_worst) = (None, None, None);
    if let Some(fields) = solution {
        let mut inside = 0usize;
        let mut worst: f64 = 0.0;
        for (k, ((lo, hi), f)) in sampled.iter().zip(fields).enumerate() {
            let mut inside_now = 0usize;
            for ((l, u), v) in lo.iter().zip(hi).zip(&f.values) {
                let excess = (l - v).max(v - u);
                worst = worst.max(excess);
                if excess <= opts.compare_tol {
                    inside_now += 1;
                }
            }
            if k == 0 {
                initial_order = Some(inside_now == grid.len());
            }
            inside += inside_now;
        }
        sandwich_fraction = Some(inside as f64 / (grid.len() * times.len()) as f64);
        sandwich_worst = Some(worst);
    }

    // residuals on a strided interior lattice
    let hs = opts.stencil_fraction * h;
    let m = opts.margin.max(1);
    let stride = opts.stride.max(1);
    let nodes: Vec<(usize, usize)> = (m..grid.ny - m)
        .step_by(stride)
        .flat_map(|j| (m..grid.nx - m).step_by(stride).map(move |i| (i, j)))
        .collect();
    let jobs: Vec<(usize, usize, usize)> =
        (0..times.len()).flat_map(|k| nodes.iter().map(move |&(i, j)| (k, i, j))).collect();
    let res: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|&(k, i, j)| residuals(pair, grid.x(i), grid.y(j), times[k], hs, opts.time_spacing, masses[k]))
        .collect::<Result<_>>()?;
    let samples = res.len();
    let up_ok = res.iter().filter(|r| r.0 >= -tol_residual).count();
    let lo_ok = res.iter().filter(|r| r.1 <= tol_residual).count();
    let upper_residual_fraction = up_ok as f64 / samples.max(1) as f64;
    let lower_residual_fraction = lo_ok as f64 / samples.max(1) as f64;
    let worst_upper = res.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let worst_lower = res.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);

    let residual_ok = upper_residual_fraction >= opts.min_residual_fraction
        && lower_residual_fraction >= opts.min_residual_fraction;
    // pointwise order, or the relaxed route: initial order plus ordered integrals
    let ordering_ok = ordering_fraction == 1.0 || (initial_order == Some(true) && integral_order);
    let sandwich_ok = sandwich_fraction.is_none_or(|f| f >= opts.min_sandwich_fraction);
    Ok(VerificationReport {
        mode,
        epsilon: eps,
        times: times.to_vec(),
        samples,
        tol_residual,
        upper_residual_fraction,
        lower_residual_fraction,
        worst_upper,
        worst_lower,
        ordering_fraction,
        integral_order,
        initial_order,
        sandwich_fraction,
        sandwich_worst,
        nonlocal_exact: pair.affine_coupling(),
        residual_ok,
        ordering_ok,
        sandwich_ok,
        passed: residual_ok && ordering_ok && sandwich_ok,
    })
}

/// Sandwich between the step functions built from the initial distance at the
/// end of the generation phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepBoundsReport {
    pub epsilon: f64,
    pub margin: f64,
    pub band: f64,
    pub checked: usize,
    pub exempt: usize,
    pub violations: usize,
    pub violation_fraction: f64,
    pub worst: f64,
    /// The band swallows one of the two phases, so the check says nothing.
    pub inconclusive: bool,
}

/// `H-(x) <= u(x) <= H+(x)` with margin `sigma beta / 2` and threshold lines at
/// `|d0| = M1 eps`; nodes within one grid spacing of those lines are exempt.
pub fn step_bounds_check(
    field: &Field2D,
    d0: &[f64],
    epsilon: f64,
    constants: &MotionConstants,
) -> Result<StepBoundsReport> {
    if d0.len() != field.values.len() {
        return Err(Error::InvalidArgument("distance field does not match the grid".into()));
    }
    let margin = 0.5 * constants.sigma * constants.beta;
    let band = constants.m1 * epsilon;
    let h = field.grid.h_max();
    let (mut checked, mut exempt, mut violations) = (0, 0, 0);
    let mut worst: f64 = 0.0;
    let (mut has_plus, mut has_minus) = (false, false);
    for (&u, &d) in field.values.iter().zip(d0) {
        if (d.abs() - band).abs() < h {
            exempt += 1;
            continue;
        }
        has_plus |= d >= band;
        has_minus |= d <= -band;
        let upper = if d > -band { 1.0 + margin } else { -1.0 + margin };
        let lower = if d >= band { 1.0 - margin } else { -1.0 - margin };
        checked += 1;
        let excess = (lower - u).max(u - upper);
        if excess > 0.0 {
            violations += 1;
            worst = worst.max(excess);
        }
    }
    Ok(StepBoundsReport {
        epsilon,
        margin,
        band,
        checked,
        exempt,
        violations,
        violation_fraction: violations as f64 / checked.max(1) as f64,
        worst,
        inconclusive: !(has_plus && has_minus),
    })
}
