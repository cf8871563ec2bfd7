//! Time stepping for `u_t = Δu + ε⁻² f(u, ε∫u)` with zero Neumann data.

mod init;

pub use init::{init_field, InitialDataSpec, InitialField, LevelForm, Shape};

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field2D, Grid2D};
use crate::model::{BistableModel, Nonlinearity, PolynomialNonlinearity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Explicit,
    Imex,
}

/// Divergence guard on `max |u|`.
pub const DIVERGENCE_BOUND: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub t_end: f64,
    /// Emit a snapshot every this many steps (0: only first and last).
    pub snapshot_every: usize,
    pub model: BistableModel,
}

/// `0.2 min(h^2/4, ε^2/F1)`.
pub fn default_dt(grid: &Grid2D, epsilon: f64, model: &BistableModel) -> f64 {
    let h = grid.h_min();
    0.2 * (h * h / 4.0).min(epsilon * epsilon / model.f1)
}

impl SolverConfig {
    pub fn new(model: BistableModel, grid: &Grid2D, epsilon: f64, t_end: f64) -> Self {
        Self {
            dt: default_dt(grid, epsilon, &model),
            epsilon,
            scheme: Scheme::Explicit,
            t_end,
            snapshot_every: 0,
            model,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    /// Stability and resolution checks against `grid`.
    pub fn validate(&self, grid: &Grid2D) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end >= 0.0) {
            return bad(format!("t_end must be nonnegative, got {}", self.t_end));
        }
        if grid.h_max() > 0.25 * self.epsilon * (1.0 + 1e-9) {
            return bad(format!(
                "grid spacing {} does not resolve the layer (need <= epsilon/4 = {})",
                grid.h_max(),
                0.25 * self.epsilon
            ));
        }
        let reaction_limit = 0.2 * self.epsilon * self.epsilon / self.model.f1;
        let limit = match self.scheme {
            Scheme::Explicit => {
                let h = grid.h_min();
                (0.8 * h * h / 4.0).min(reaction_limit)
            }
            Scheme::Imex => reaction_limit,
        };
        if self.dt > limit * (1.0 + 1e-12) {
            return bad(format!("dt = {} exceeds the stability limit {}", self.dt, limit));
        }
        Ok(())
    }
}

enum Reaction {
    Poly(PolynomialNonlinearity),
    General(Arc<dyn Nonlinearity>),
}

impl Reaction {
    fn of(model: &BistableModel) -> Self {
        match model.nonlinearity().as_polynomial() {
            Some(p) => Reaction::Poly(p.clone()),
            None => Reaction::General(model.nonlinearity().clone()),
        }
    }
}

/// A field advancing in time under one configuration.
pub struct Simulation {
    pub field: Field2D,
    pub cfg: SolverConfig,
    pub steps: usize,
    reaction: Reaction,
    next: Vec<f64>,
    scratch: Vec<f64>,
    cg: Option<CgWork>,
}

struct CgWork {
    r: Vec<f64>,
    p: Vec<f64>,
    ap: Vec<f64>,
}

/// Conjugate-gradient tolerance for the Crank-Nicolson solve.
const CG_TOL: f64 = 1e-10;

impl Simulation {
    pub fn new(field: Field2D, cfg: SolverConfig) -> Result<Self> {
        cfg.validate(&field.grid)?;
        let n = field.grid.len();
        Ok(Self {
            reaction: Reaction::of(&cfg.model),
            next: vec![0.0; n],
            scratch: vec![0.0; n],
            cg: None,
            steps: 0,
            field,
            cfg,
        })
    }

    pub fn time(&self) -> f64 {
        self.field.time
    }

    pub fn mass(&self) -> f64 {
        self.field.mass()
    }

    /// One step of size `dt` (at most the configured step).
    pub fn step_by(&mut self, dt: f64) -> Result<()> {
        let v = self.cfg.epsilon * self.field.mass();
        match self.cfg.scheme {
            Scheme::Explicit => self.explicit(dt, v),
            Scheme::Imex => self.imex(dt, v)?,
        }
        std::mem::swap(&mut self.field.values, &mut self.next);
        self.field.time += dt;
        self.steps += 1;
        let max_abs = self.field.max_abs();
        if !(max_abs <= DIVERGENCE_BOUND) {
            return Err(Error::Diverged { time: self.field.time, max_abs });
        }
        Ok(())
    }

    pub fn step(&mut self) -> Result<()> {
        self.step_by(self.cfg.dt)
    }

    /// Steps until `t`, shortening the final step to land on it.
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        let dt = self.cfg.dt;
        while self.field.time < t {
            let remaining = t - self.field.time;
            if remaining <= 1e-12 * dt {
                self.field.time = t;
                break;
            }
            if remaining < dt * (1.0 + 1e-9) {
                self.step_by(remaining)?;
                self.field.time = t;
            } else {
                self.step_by(dt)?;
            }
        }
        Ok(())
    }

    fn explicit(&mut self, dt: f64, v: f64) {
        let grid = self.field.grid;
        let nx = grid.nx;
        let inv_eps2 = 1.0 / (self.cfg.epsilon * self.cfg.epsilon);
        let u = &self.field.values;
        let reaction = &self.reaction;
        self.next.par_chunks_mut(nx).enumerate().for_each(|(j, out)| {
            grid.laplacian_row(u, j, out);
            let row = &u[j * nx..(j + 1) * nx];
            match reaction {
                Reaction::Poly(p) => {
                    let shift = p.coupling * v;
                    for (o, &ui) in out.iter_mut().zip(row) {
                        *o = ui + dt * (*o + inv_eps2 * (p.poly(ui) + shift));
                    }
                }
                Reaction::General(f) => {
                    for (o, &ui) in out.iter_mut().zip(row) {
                        *o = ui + dt * (*o + inv_eps2 * f.value(ui, v));
                    }
                }
            }
        });
    }

    // Crank-Nicolson diffusion, explicit reaction:
    // (I - dt/2 Δ) u+ = (I + dt/2 Δ) u + dt ε⁻² f(u, v).
    // The Neumann Laplacian is self-adjoint in the trapezoid inner product,
    // so CG runs in that inner product.
    fn imex(&mut self, dt: f64, v: f64) -> Result<()> {
        let grid = self.field.grid;
        let nx = grid.nx;
        let n = grid.len();
        let inv_eps2 = 1.0 / (self.cfg.epsilon * self.cfg.epsilon);
        let half = 0.5 * dt;
        let u = &self.field.values;
        let reaction = &self.reaction;
        // rhs into scratch
        self.scratch.par_chunks_mut(nx).enumerate().for_each(|(j, out)| {
            grid.laplacian_row(u, j, out);
            let row = &u[j * nx..(j + 1) * nx];
            for (o, &ui) in out.iter_mut().zip(row) {
                let f = match reaction {
                    Reaction::Poly(p) => p.value(ui, v),
                    Reaction::General(f) => f.value(ui, v),
                };
                *o = ui + half * *o + dt * inv_eps2 * f;
            }
        });
        let work = self.cg.get_or_insert_with(|| CgWork {
            r: vec![0.0; n],
            p: vec![0.0; n],
            ap: vec![0.0; n],
        });
        let apply = |x: &[f64], out: &mut [f64]| {
            out.par_chunks_mut(nx).enumerate().for_each(|(j, o)| {
                grid.laplacian_row(x, j, o);
                let row = &x[j * nx..(j + 1) * nx];
                for (oi, &xi) in o.iter_mut().zip(row) {
                    *oi = xi - half * *oi;
                }
            });
        };
        // initial guess: current field
        self.next.copy_from_slice(u);
        apply(&self.next, &mut work.ap);
        work.r.par_iter_mut().zip(&self.scratch).zip(&work.ap).for_each(|((r, b), a)| *r = b - a);
        work.p.copy_from_slice(&work.r);
        let b_norm = grid.dot(&self.scratch, &self.scratch).sqrt().max(1e-300);
        let mut rr = grid.dot(&work.r, &work.r);
        let mut iterations = 0;
        while rr.sqrt() > CG_TOL * b_norm {
            if iterations >= 2000 {
                return Err(Error::LinearSolveFailed { iterations, residual: rr.sqrt() / b_norm });
            }
            apply(&work.p, &mut work.ap);
            let alpha = rr / grid.dot(&work.p, &work.ap);
            self.next.par_iter_mut().zip(&work.p).for_each(|(x, p)| *x += alpha * p);
            work.r.par_iter_mut().zip(&work.ap).for_each(|(r, a)| *r -= alpha * a);
            let rr_new = grid.dot(&work.r, &work.r);
            let beta = rr_new / rr;
            rr = rr_new;
            work.p.par_iter_mut().zip(&work.r).for_each(|(p, r)| *p = r + beta * *p);
            iterations += 1;
        }
        Ok(())
    }
}

/// Snapshots plus the mass series of a run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<Field2D>,
    /// `(t, int u)` after every step, starting at `t = 0`.
    pub mass: Vec<(f64, f64)>,
}

impl Trajectory {
    pub fn write_mass_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "mass"])?;
        for (t, m) in &self.mass {
            w.write_record([format!("{t:.17e}"), format!("{m:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs from `u0` to `cfg.t_end`, keeping a snapshot every `snapshot_every`
/// steps plus the first and last states.
pub fn run(u0: Field2D, cfg: SolverConfig) -> Result<Trajectory> {
    let every = cfg.snapshot_every;
    let t_end = cfg.t_end;
    let mut sim = Simulation::new(u0, cfg)?;
    let mut snapshots = vec![sim.field.clone()];
    let mut mass = vec![(sim.time(), sim.mass())];
    let dt = sim.cfg.dt;
    while sim.time() < t_end {
        let remaining = t_end - sim.time();
        if remaining <= 1e-12 * dt {
            break;
        }
        if remaining < dt * (1.0 + 1e-9) {
            sim.step_by(remaining)?;
            sim.field.time = t_end;
        } else {
            sim.step()?;
        }
        mass.push((sim.time(), sim.mass()));
        if every > 0 && sim.steps % every == 0 && sim.time() < t_end {
            snapshots.push(sim.field.clone());
        }
    }
    if sim.steps > 0 {
        snapshots.push(sim.field.clone());
    }
    Ok(Trajectory { snapshots, mass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{analyze_nonlinearity, AnalysisOptions, FnNonlinearity};

    fn cubic() -> BistableModel {
        analyze_nonlinearity(Arc::new(PolynomialNonlinearity::cubic()), AnalysisOptions::default())
            .unwrap()
    }

    // reaction-free model sharing the cubic's constants
    fn heat() -> BistableModel {
        cubic().with_nonlinearity_unchecked(Arc::new(FnNonlinearity(|_u: f64, _v: f64| 0.0)))
    }

    #[test]
    fn constant_is_fixed_point_of_heat() {
        let g = Grid2D::unit(33).unwrap();
        let field = Field2D::new(g, vec![0.3; g.len()], 0.0).unwrap();
        for scheme in [Scheme::Explicit, Scheme::Imex] {
            let cfg = SolverConfig::new(heat(), &g, 0.2, 0.01).with_scheme(scheme);
            let traj = run(field.clone(), cfg).unwrap();
            let last = traj.snapshots.last().unwrap();
            assert!(last.values.iter().all(|&u| (u - 0.3).abs() < 1e-13));
        }
    }

    #[test]
    fn cosine_mode_decays() {
        let g = Grid2D::unit(65).unwrap();
        let pi = std::f64::consts::PI;
        let field = Field2D::from_fn(g, |x, _| (pi * x).cos());
        for scheme in [Scheme::Explicit, Scheme::Imex] {
            let cfg = SolverConfig::new(heat(), &g, 0.1, 0.0).with_scheme(scheme);
            let mut sim = Simulation::new(field.clone(), cfg).unwrap();
            let dt = sim.cfg.dt;
            sim.step().unwrap();
            let factor = sim.field.at(0, 5) / field.at(0, 5);
            let exact = (-pi * pi * dt).exp();
            assert!((factor - exact).abs() < 1e-3 * pi * pi * dt, "{scheme:?}: {factor} vs {exact}");
        }
    }

    #[test]
    fn heat_conserves_mass() {
        let g = Grid2D::unit(41).unwrap();
        let field = Field2D::from_fn(g, |x, y| (x * 7.0).sin() * y + x * x);
        for scheme in [Scheme::Explicit, Scheme::Imex] {
            let cfg = SolverConfig::new(heat(), &g, 0.1, 0.02).with_scheme(scheme);
            let traj = run(field.clone(), cfg).unwrap();
            let m0 = traj.mass[0].1;
            let drift = traj.mass.iter().map(|(_, m)| (m - m0).abs()).fold(0.0, f64::max);
            assert!(drift < 1e-10 * 0.02, "{scheme:?} drift {drift}");
        }
    }

    #[test]
    fn zero_end_time_single_snapshot() {
        let g = Grid2D::unit(33).unwrap();
        let field = Field2D::from_fn(g, |x, y| x - y);
        let traj = run(field.clone(), SolverConfig::new(cubic(), &g, 0.2, 0.0)).unwrap();
        assert_eq!(traj.snapshots.len(), 1);
        assert_eq!(traj.snapshots[0], field);
    }

    #[test]
    fn rejects_unstable_step_and_coarse_grid() {
        let g = Grid2D::unit(33).unwrap();
        let cfg = SolverConfig::new(cubic(), &g, 0.2, 0.1);
        let dt = cfg.dt;
        assert!(cfg.clone().with_dt(10.0 * dt).validate(&g).is_err());
        assert!(SolverConfig::new(cubic(), &g, 0.04, 0.1).validate(&g).is_err());
    }

    #[test]
    fn divergence_detected() {
        let g = Grid2D::unit(33).unwrap();
        let field = Field2D::new(g, vec![9.99; g.len()], 0.0).unwrap();
        let growth = Arc::new(FnNonlinearity(|u: f64, _v: f64| u * u));
        let m = cubic().with_nonlinearity_unchecked(growth);
        let cfg = SolverConfig::new(m, &g, 0.5, 1.0);
        assert!(matches!(run(field, cfg), Err(Error::Diverged { .. })));
    }
}
