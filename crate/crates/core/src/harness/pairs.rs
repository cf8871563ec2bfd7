//! The two sub/super-solution pairs: the flow-based pair for the generation
//! phase and the layer-profile pair for the motion phase.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::constants::MotionConstants;
use crate::error::{Error, Result};
use crate::geometry::{cutoff, SignedDistanceField};
use crate::grid::Grid2D;
use crate::interface::RadialSeries;
use crate::model::BistableModel;
use crate::profile::{ode_flow, FlowTable, ProfileTable};
use crate::solver::InitialDataSpec;

/// Nodes of the `xi` lattice used when the pair is tabulated.
const FLOW_NODES: usize = 4001;

/// A pair `(lower, upper)` that can be sampled at points and on grids.
pub trait SolutionPair: Sync {
    fn epsilon(&self) -> f64;
    /// `(lower, upper)` at one point.
    fn at(&self, x: f64, y: f64, t: f64) -> Result<(f64, f64)>;
    /// `(lower, upper)` on every node at each of `times`.
    fn on_grid(&self, grid: &Grid2D, times: &[f64]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        times
            .iter()
            .map(|&t| {
                let pts: Vec<(f64, f64)> = (0..grid.len())
                    .into_par_iter()
                    .map(|k| self.at(grid.x(k % grid.nx), grid.y(k / grid.nx), t))
                    .collect::<Result<_>>()?;
                Ok(pts.into_iter().unzip())
            })
            .collect()
    }
    /// True when `f` is affine in its second argument, so the nonlocal
    /// extremum over an interval is attained at its ends.
    fn affine_coupling(&self) -> bool;
    fn model(&self) -> &BistableModel;
}

/// `w^-+(x, t) = Y(t/eps^2, u0(x) -+ eps^2 r(-+eps G, t/eps^2); -+eps G)` with
/// `r(delta, tau) = C_star (e^{mu(delta) tau} - 1)`.
#[derive(Debug, Clone)]
pub struct GenerationPair {
    pub model: BistableModel,
    pub spec: InitialDataSpec,
    pub lx: f64,
    pub ly: f64,
    pub epsilon: f64,
    pub cstar: f64,
    /// `eps G`.
    pub shift: f64,
    mu_lower: f64,
    mu_upper: f64,
}

pub fn build_generation_pair(
    model: &BistableModel,
    spec: &InitialDataSpec,
    grid: &Grid2D,
    epsilon: f64,
    cstar: f64,
) -> Result<GenerationPair> {
    if !(cstar > 0.0 && epsilon > 0.0) {
        return Err(Error::InvalidArgument("C_star and epsilon must be positive".into()));
    }
    let shift = epsilon * model.g_const;
    Ok(GenerationPair {
        model: model.clone(),
        spec: spec.clone(),
        lx: grid.lx,
        ly: grid.ly,
        epsilon,
        cstar,
        shift,
        mu_lower: model.mu_delta(-shift)?,
        mu_upper: model.mu_delta(shift)?,
    })
}

impl GenerationPair {
    /// `mu^{-1} eps^2 |ln eps|`.
    pub fn generation_time(&self) -> f64 {
        self.epsilon * self.epsilon * self.epsilon.ln().abs() / self.model.mu
    }

    fn offsets(&self, t: f64) -> (f64, f64) {
        let e2 = self.epsilon * self.epsilon;
        let tau = t / e2;
        (
            e2 * self.cstar * (self.mu_lower * tau).exp_m1(),
            e2 * self.cstar * (self.mu_upper * tau).exp_m1(),
        )
    }

    fn u0(&self, x: f64, y: f64) -> f64 {
        self.spec.value(self.model.a, self.lx, self.ly, x, y)
    }
}

impl SolutionPair for GenerationPair {
    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn at(&self, x: f64, y: f64, t: f64) -> Result<(f64, f64)> {
        if t < 0.0 {
            return Err(Error::InvalidArgument(format!("negative time {t}")));
        }
        let tau = t / (self.epsilon * self.epsilon);
        let u0 = self.u0(x, y);
        let (rl, ru) = self.offsets(t);
        let lo = ode_flow(&self.model, tau, u0 - rl, -self.shift)?.y;
        let hi = ode_flow(&self.model, tau, u0 + ru, self.shift)?.y;
        Ok((lo, hi))
    }

    fn on_grid(&self, grid: &Grid2D, times: &[f64]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        if times.iter().any(|&t| t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("times must be nonnegative and sorted".into()));
        }
        let u0 = grid.sample(|x, y| self.u0(x, y));
        let e2 = self.epsilon * self.epsilon;
        let taus: Vec<f64> = times.iter().map(|t| t / e2).collect();
        let t_last = times.last().copied().unwrap_or(0.0);
        let (rl, ru) = self.offsets(t_last);
        let lo_min = u0.iter().fold(f64::INFINITY, |m, &v| m.min(v)) - rl - 1e-3;
        let hi_max = u0.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)) + ru + 1e-3;
        let lower = FlowTable::build(&self.model, &taus, lo_min, hi_max, FLOW_NODES, -self.shift)?;
        let upper = FlowTable::build(&self.model, &taus, lo_min, hi_max, FLOW_NODES, self.shift)?;
        Ok(times
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let (rl, ru) = self.offsets(t);
                let lo = u0.iter().map(|&v| lower.eval(k, v - rl)).collect();
                let hi = u0.iter().map(|&v| upper.eval(k, v + ru)).collect();
                (lo, hi)
            })
            .collect())
    }

    fn affine_coupling(&self) -> bool {
        self.model.nonlinearity().as_polynomial().is_some()
    }

    fn model(&self) -> &BistableModel {
        &self.model
    }
}

/// A reference interface moving in time: cut-off signed distance and the
/// area difference `gamma`.
pub trait MovingInterface: Sync {
    fn distance(&self, x: f64, y: f64, t: f64) -> f64;
    fn gamma(&self, t: f64) -> f64;
}

/// A circle following the radial law.
#[derive(Debug, Clone)]
pub struct RadialInterface {
    pub center: [f64; 2],
    pub series: RadialSeries,
    pub d0: f64,
}

impl RadialInterface {
    pub fn radius(&self, t: f64) -> f64 {
        self.series.radius_at(t).unwrap_or(0.0)
    }
}

impl MovingInterface for RadialInterface {
    fn distance(&self, x: f64, y: f64, t: f64) -> f64 {
        let rho = (x - self.center[0]).hypot(y - self.center[1]);
        cutoff(rho - self.radius(t), self.d0)
    }

    fn gamma(&self, t: f64) -> f64 {
        let r = self.radius(t);
        self.series.domain_area - 2.0 * PI * r * r
    }
}

/// A frozen interface given by a sampled distance field.
#[derive(Debug, Clone)]
pub struct FrozenInterface {
    pub field: SignedDistanceField,
    pub gamma: f64,
}

impl MovingInterface for FrozenInterface {
    fn distance(&self, x: f64, y: f64, _t: f64) -> f64 {
        self.field.grid.interpolate(&self.field.d, x, y)
    }

    fn gamma(&self, _t: f64) -> f64 {
        self.gamma
    }
}

/// `u^-+ = U0(z) + eps gamma V(z) -+ q` with `z = (d -+ eps p) / eps`.
pub struct MotionPair<'a, I: MovingInterface> {
    pub model: &'a BistableModel,
    pub profile: &'a ProfileTable,
    pub constants: MotionConstants,
    pub epsilon: f64,
    pub interface: &'a I,
}

pub fn build_motion_pair<'a, I: MovingInterface>(
    model: &'a BistableModel,
    profile: &'a ProfileTable,
    constants: MotionConstants,
    interface: &'a I,
    epsilon: f64,
) -> MotionPair<'a, I> {
    MotionPair { model, profile, constants, epsilon, interface }
}

impl<I: MovingInterface> MotionPair<'_, I> {
    fn layer(&self, d: f64, gamma: f64, shift: f64) -> f64 {
        let z = (d + shift) / self.epsilon;
        self.profile.wave.u0_at(z) + self.epsilon * gamma * self.profile.v_at(z)
    }
}

impl<I: MovingInterface> SolutionPair for MotionPair<'_, I> {
    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn at(&self, x: f64, y: f64, t: f64) -> Result<(f64, f64)> {
        let eps = self.epsilon;
        let d = self.interface.distance(x, y, t);
        let gamma = self.interface.gamma(t);
        let p = self.constants.p(eps, t);
        let q = self.constants.q(eps, t);
        Ok((self.layer(d, gamma, -eps * p) - q, self.layer(d, gamma, eps * p) + q))
    }

    fn affine_coupling(&self) -> bool {
        self.model.nonlinearity().as_polynomial().is_some()
    }

    fn model(&self) -> &BistableModel {
        self.model
    }
}

/// Exchanges the roles of the two members of a pair (a negative control).
pub struct Swapped<'a, P: SolutionPair>(pub &'a P);

impl<P: SolutionPair> SolutionPair for Swapped<'_, P> {
    fn epsilon(&self) -> f64 {
        self.0.epsilon()
    }

    fn at(&self, x: f64, y: f64, t: f64) -> Result<(f64, f64)> {
        self.0.at(x, y, t).map(|(a, b)| (b, a))
    }

    fn on_grid(&self, grid: &Grid2D, times: &[f64]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        Ok(self.0.on_grid(grid, times)?.into_iter().map(|(a, b)| (b, a)).collect())
    }

    fn affine_coupling(&self) -> bool {
        self.0.affine_coupling()
    }

    fn model(&self) -> &BistableModel {
        self.0.model()
    }
}
