//! Level-set evolution `phi_t = |grad phi| div(grad phi / |grad phi|) - c0 gamma |grad phi|`,
//! `phi < 0` on the enclosed side.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{extract_contour, signed_distance_raw, Contour};
use crate::grid::Grid2D;

const REG: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct LevelSetState {
    pub grid: Grid2D,
    pub phi: Vec<f64>,
    pub time: f64,
    pub c0: f64,
    pub domain_area: f64,
    /// Reinitialize after this many steps (0 disables).
    pub reinit_every: usize,
    pub steps: usize,
}

/// Smoothed Heaviside of half-width `w`.
pub fn smoothed_heaviside(phi: f64, w: f64) -> f64 {
    if phi <= -w {
        0.0
    } else if phi >= w {
        1.0
    } else {
        0.5 * (1.0 + phi / w + (std::f64::consts::PI * phi / w).sin() / std::f64::consts::PI)
    }
}

impl LevelSetState {
    pub fn new(grid: Grid2D, phi: Vec<f64>, c0: f64) -> Result<Self> {
        if phi.len() != grid.len() {
            return Err(Error::InvalidArgument("level function does not match the grid".into()));
        }
        Ok(Self { domain_area: grid.area(), grid, phi, time: 0.0, c0, reinit_every: 20, steps: 0 })
    }

    /// `|Omega+| - |Omega-|` from a smoothed Heaviside of width `1.5 h`.
    pub fn gamma(&self) -> f64 {
        let w = 1.5 * self.grid.h_max();
        let plus: Vec<f64> = self.phi.iter().map(|&p| 2.0 * smoothed_heaviside(p, w) - 1.0).collect();
        self.grid.integrate(&plus)
    }

    pub fn contour(&self) -> Result<Contour> {
        extract_contour(&self.grid, &self.phi, 0.0)
    }

    /// Largest step the explicit scheme accepts.
    pub fn max_dt(&self) -> f64 {
        let h = self.grid.h_min();
        let cfl = if self.c0 != 0.0 { h / (self.c0.abs() * self.domain_area) } else { f64::INFINITY };
        (0.25 * h * h).min(cfl)
    }

    /// Default step `0.2 h^2 / 4`.
    pub fn default_dt(&self) -> f64 {
        let h = self.grid.h_min();
        (0.05 * h * h).min(self.max_dt())
    }

    /// Rebuilds `phi` as the signed distance to its zero contour. Nodes next to a
    /// sign change are only rescaled by their gradient so the zero set does not
    /// creep inward by the polygon sag.
    pub fn reinitialize(&mut self) -> Result<()> {
        let c = self.contour()?;
        let mut d = signed_distance_raw(&c, &self.grid);
        let g = self.grid;
        let phi = &self.phi;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.idx(i, j);
                let e = if i + 1 < g.nx { phi[k + 1] } else { phi[k - 1] };
                let w = if i > 0 { phi[k - 1] } else { phi[k + 1] };
                let n = if j + 1 < g.ny { phi[k + g.nx] } else { phi[k - g.nx] };
                let s = if j > 0 { phi[k - g.nx] } else { phi[k + g.nx] };
                let p = phi[k];
                if [e, w, n, s].iter().any(|&q| q * p <= 0.0) {
                    let gx = (e - w) / (2.0 * g.hx);
                    let gy = (n - s) / (2.0 * g.hy);
                    let norm = gx.hypot(gy);
                    if norm > 1e-12 {
                        d[k] = p / norm;
                    }
                }
            }
        }
        self.phi = d;
        Ok(())
    }

    fn check_alive(&self) -> Result<()> {
        let neg = self.phi.iter().any(|&p| p < 0.0);
        let pos = self.phi.iter().any(|&p| p > 0.0);
        if !(neg && pos) {
            return Err(Error::InterfaceVanished { time: self.time });
        }
        Ok(())
    }

    /// One explicit step; reinitializes on schedule.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        if dt > self.max_dt() * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "level-set step {dt} exceeds the limit {}",
                self.max_dt()
            )));
        }
        self.check_alive()?;
        let speed = self.c0 * self.gamma();
        let g = self.grid;
        let (nx, ny) = (g.nx, g.ny);
        let phi = &self.phi;
        // mirror ghost nodes: zero normal derivative at the box edges
        let at = |i: isize, j: isize| -> f64 {
            let i = if i < 0 { -i } else if i >= nx as isize { 2 * (nx as isize - 1) - i } else { i };
            let j = if j < 0 { -j } else if j >= ny as isize { 2 * (ny as isize - 1) - j } else { j };
            phi[j as usize * nx + i as usize]
        };
        let (hx, hy) = (g.hx, g.hy);
        let mut next = vec![0.0; g.len()];
        next.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
            let j = j as isize;
            for (i, out) in row.iter_mut().enumerate() {
                let i = i as isize;
                let c = at(i, j);
                let (e, w, n, s) = (at(i + 1, j), at(i - 1, j), at(i, j + 1), at(i, j - 1));
                let px = (e - w) / (2.0 * hx);
                let py = (n - s) / (2.0 * hy);
                let pxx = (e - 2.0 * c + w) / (hx * hx);
                let pyy = (n - 2.0 * c + s) / (hy * hy);
                let pxy = (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) + at(i - 1, j - 1))
                    / (4.0 * hx * hy);
                let curv = (pxx * py * py - 2.0 * px * py * pxy + pyy * px * px)
                    / (px * px + py * py + REG * REG);
                // Godunov upwinding for phi_t + speed |grad phi| = 0
                let dxm = (c - w) / hx;
                let dxp = (e - c) / hx;
                let dym = (c - s) / hy;
                let dyp = (n - c) / hy;
                let grad = if speed > 0.0 {
                    (dxm.max(0.0).powi(2) + dxp.min(0.0).powi(2) + dym.max(0.0).powi(2)
                        + dyp.min(0.0).powi(2))
                    .sqrt()
                } else {
                    (dxm.min(0.0).powi(2) + dxp.max(0.0).powi(2) + dym.min(0.0).powi(2)
                        + dyp.max(0.0).powi(2))
                    .sqrt()
                };
                *out = c + dt * (curv - speed * grad);
            }
        });
        self.phi = next;
        self.time += dt;
        self.steps += 1;
        if self.reinit_every > 0 && self.steps.is_multiple_of(self.reinit_every) {
            self.reinitialize()?;
        }
        self.check_alive()
    }

    /// Steps to `t` with steps of at most `dt`.
    pub fn advance_to(&mut self, t: f64, dt: f64) -> Result<()> {
        while self.time < t {
            let remaining = t - self.time;
            if remaining <= 1e-12 * dt {
                self.time = t;
                break;
            }
            if remaining < dt * (1.0 + 1e-9) {
                self.step(remaining)?;
                self.time = t;
            } else {
                self.step(dt)?;
            }
        }
        Ok(())
    }
}

/// Convenience single step on a state value.
pub fn levelset_step(mut state: LevelSetState, dt: f64) -> Result<LevelSetState> {
    state.step(dt)?;
    Ok(state)
}
