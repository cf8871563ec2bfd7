//! Epsilon sweeps: generation time, layer thickness and interface position,
//! plus the sandwich drivers for the two solution pairs.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::constants::{
    compute_motion_constants, flow_lattice, flow_reach, FlowLattice, generation_cstar, layer_half_width,
    MotionConstants,
};
use super::pairs::{build_generation_pair, build_motion_pair, RadialInterface, Swapped};
use super::report::{ExperimentReport, NamedFit, SweepRow};
use super::verify::{verify_pair, PairMode, VerificationReport, VerifyOptions};
use crate::error::{Error, Result};
use crate::geometry::{extract_contour, hausdorff, signed_distance_raw, transition_width, Contour};
use crate::grid::{Field2D, Grid2D};
use crate::interface::{radial_evolve, RadialSeries};
use crate::model::{analyze_nonlinearity, AnalysisOptions, BistableModel, PolynomialNonlinearity};
use crate::profile::{build_profile, ProfileTable};
use crate::solver::{init_field, InitialDataSpec, InitialField, LevelForm, Scheme, Shape, Simulation, SolverConfig};

/// Everything a study depends on. Serialized canonically for the report hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySetup {
    /// Coefficients of `f(u, 0)` in powers of `u`, lowest first.
    pub coefficients: Vec<f64>,
    /// `f(u, v) = poly(u) + coupling * v`.
    pub coupling: f64,
    pub lx: f64,
    pub ly: f64,
    pub initial: InitialDataSpec,
    /// Swept values, any order; at least three.
    pub epsilons: Vec<f64>,
    pub eta: f64,
    /// Grid spacing as a fraction of epsilon.
    pub resolution: f64,
    pub scheme: Scheme,
    /// Horizon `T` as a fraction of the radial extinction time.
    pub horizon_fraction: f64,
    /// Fixed horizon used when the reference circle does not vanish.
    pub horizon: Option<f64>,
    /// Probe times for the motion study as fractions of `T`.
    pub probe_fractions: Vec<f64>,
    /// Nodes of the profile table.
    pub profile_nodes: usize,
}

impl Default for StudySetup {
    fn default() -> Self {
        Self {
            coefficients: vec![0.0, 1.0, 0.0, -1.0],
            coupling: -1.0,
            lx: 1.0,
            ly: 1.0,
            initial: InitialDataSpec::circle([0.5, 0.5], 0.4, 1.0)
                .with_level_form(LevelForm::Quadratic)
                .with_cutoff(Some(0.08)),
            epsilons: vec![0.08, 0.04, 0.02],
            eta: 0.2,
            resolution: 0.25,
            scheme: Scheme::Explicit,
            horizon_fraction: 0.6,
            horizon: None,
            probe_fractions: vec![0.5, 1.0],
            profile_nodes: 4001,
        }
    }
}

impl StudySetup {
    /// Circle next to the stable steady radius of a 2x2 box, so the interface
    /// barely moves while the layer forms. Used for the generation sweep.
    pub fn steady() -> Self {
        let mut s = Self::default();
        s.lx = 2.0;
        s.ly = 2.0;
        s.initial = InitialDataSpec::circle([1.0, 1.0], 0.7, 1.0)
            .with_level_form(LevelForm::Quadratic)
            .with_cutoff(Some(0.2));
        s.horizon = Some(0.04);
        s
    }

    /// Data for the generation pair: a small amplitude keeps `C0`, and with it
    /// the perturbation `eps G`, inside the admissible range.
    pub fn gentle() -> Self {
        let mut s = Self::default();
        s.initial = InitialDataSpec::circle([0.5, 0.5], 0.3, 1.0)
            .with_level_form(LevelForm::Quadratic)
            .with_cutoff(Some(0.2))
            .with_amplitude(0.3);
        s
    }

    pub fn validate_sweep(&self) -> Result<()> {
        if self.epsilons.len() < 3 {
            return Err(Error::SweepTooShort(self.epsilons.len()));
        }
        if self.epsilons.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(Error::InvalidArgument("epsilon values must lie in (0, 1)".into()));
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        if !(self.lx > 0.0 && self.ly > 0.0) {
            return Err(Error::InvalidArgument("domain sides must be positive".into()));
        }
        if !(self.resolution > 0.0 && self.resolution <= 0.25) {
            return Err(Error::InvalidArgument("resolution must lie in (0, 0.25]".into()));
        }
        if !(self.horizon_fraction > 0.0 && self.horizon_fraction < 1.0) {
            return Err(Error::InvalidArgument("horizon_fraction must lie in (0, 1)".into()));
        }
        if self.probe_fractions.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::InvalidArgument("probe fractions must lie in (0, 1]".into()));
        }
        if self.profile_nodes < 2001 || self.profile_nodes.is_multiple_of(2) {
            return Err(Error::InvalidArgument("profile_nodes must be odd and at least 2001".into()));
        }
        Ok(())
    }

    /// Grid with spacing at most `resolution * eps` on both axes.
    pub fn grid(&self, eps: f64) -> Result<Grid2D> {
        let h = self.resolution * eps;
        let n = |l: f64| (l / h - 1e-9).ceil() as usize + 1;
        Grid2D::new(n(self.lx), n(self.ly), self.lx, self.ly)
    }
}

/// The model and 1D profile shared by every run of a setup.
#[derive(Debug, Clone)]
pub struct Lab {
    pub setup: StudySetup,
    pub model: BistableModel,
    pub profile: ProfileTable,
    /// Bounds of the initial data measured on a 201-node reference grid.
    pub initial_bound: f64,
}

impl Lab {
    pub fn new(setup: StudySetup) -> Result<Self> {
        setup.validate()?;
        let nl = Arc::new(PolynomialNonlinearity::new(setup.coefficients.clone(), setup.coupling));
        let area = setup.lx * setup.ly;
        let probe = analyze_nonlinearity(nl.clone(), AnalysisOptions { domain_area: area, ..Default::default() })?;
        let reference = Grid2D::new(201, 201, setup.lx, setup.ly)?;
        let initial_bound = init_field(&setup.initial, reference, &probe)?.c0;
        let model = analyze_nonlinearity(
            nl,
            AnalysisOptions { domain_area: area, initial_bound, ..Default::default() },
        )?;
        let profile = build_profile(&model, None, setup.profile_nodes)?;
        Ok(Self { setup, model, profile, initial_bound })
    }

    /// `mu^{-1} eps^2 |ln eps|`.
    pub fn generation_time(&self, eps: f64) -> f64 {
        eps * eps * eps.ln().abs() / self.model.mu
    }

    pub fn initial(&self, grid: Grid2D) -> Result<InitialField> {
        init_field(&self.setup.initial, grid, &self.model)
    }

    pub fn solver(&self, grid: &Grid2D, eps: f64, t_end: f64) -> SolverConfig {
        SolverConfig::new(self.model.clone(), grid, eps, t_end).with_scheme(self.setup.scheme)
    }

    fn circle(&self) -> Result<([f64; 2], f64)> {
        match self.setup.initial.shape {
            Shape::Circle { center, radius } => Ok((center, radius)),
            _ => Err(Error::InvalidArgument("this study needs circular initial data".into())),
        }
    }

    /// Radial reference from the initial circle and the horizon `T`.
    pub fn reference(&self) -> Result<(RadialSeries, f64)> {
        let (center, r0) = self.circle()?;
        let s = &self.setup;
        let max_radius = center[0].min(center[1]).min(s.lx - center[0]).min(s.ly - center[1]);
        let c0 = self.profile.c0();
        let area = s.lx * s.ly;
        let probe = radial_evolve(r0, c0, area, 10.0, 1e-3, max_radius)?;
        let horizon = match (probe.extinction, s.horizon) {
            (_, Some(t)) => t,
            (Some(te), None) => s.horizon_fraction * te,
            (None, None) => {
                return Err(Error::InvalidArgument(
                    "the reference circle does not vanish; set an explicit horizon".into(),
                ))
            }
        };
        let series = radial_evolve(r0, c0, area, horizon, horizon / 20_000.0, max_radius)?;
        Ok((series, horizon))
    }

    /// Band constant `M1` for the generation criterion: the larger of the
    /// layer half-width at tolerance `eta/2` and the initial band
    /// `{|u0 - a| < M0 eps}` with `M0` the flow reach.
    pub fn generation_band(&self, init: &InitialField, d0: &[f64], eps: f64, eta: f64) -> Result<f64> {
        let layer = layer_half_width(&self.profile.wave, 0.5 * eta)?;
        let m0 = flow_reach(&self.model, eps, eta)?;
        let a = self.model.a;
        let band = init
            .field
            .values
            .iter()
            .zip(d0)
            .filter(|(u, _)| (**u - a).abs() < m0 * eps)
            .map(|(_, d)| d.abs() / eps)
            .fold(0.0, f64::max);
        Ok(layer.max(band))
    }
}

fn initial_distance(lab: &Lab, init: &InitialField) -> Result<(Contour, Vec<f64>)> {
    let g = init.field.grid;
    let contour = extract_contour(&g, &init.field.values, lab.model.a)?;
    let d0 = signed_distance_raw(&contour, &g);
    Ok((contour, d0))
}

/// First time at which the solution sits within `eta` of the wells outside the
/// `M1 eps` band around the initial interface.
pub fn generation_time(lab: &Lab, eps: f64, eta: f64) -> Result<(f64, f64)> {
    let grid = lab.setup.grid(eps)?;
    let init = lab.initial(grid)?;
    let (_, d0) = initial_distance(lab, &init)?;
    let m1 = lab.generation_band(&init, &d0, eps, eta)?;
    let band = m1 * eps;
    let plus: Vec<usize> = (0..grid.len()).filter(|&k| d0[k] >= band).collect();
    let minus: Vec<usize> = (0..grid.len()).filter(|&k| d0[k] <= -band).collect();
    if plus.is_empty() || minus.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "band M1 eps = {band} covers a whole phase at eps = {eps}"
        )));
    }
    let t_max = 10.0 * lab.generation_time(eps);
    let mut sim = Simulation::new(init.field, lab.solver(&grid, eps, t_max))?;
    let done = |u: &[f64]| {
        plus.iter().all(|&k| (u[k] - 1.0).abs() <= eta) && minus.iter().all(|&k| (u[k] + 1.0).abs() <= eta)
    };
    while !done(&sim.field.values) {
        if sim.time() >= t_max {
            return Err(Error::NeverGenerated { t_max });
        }
        sim.step()?;
    }
    Ok((sim.time(), m1))
}

/// Generation time over the sweep, compared with `mu^{-1} eps^2 |ln eps|`.
pub fn generation_study(lab: &Lab) -> Result<ExperimentReport> {
    let s = &lab.setup;
    s.validate_sweep()?;
    let mut report = ExperimentReport::new("generation", s)?;
    let rows: Vec<(f64, f64, f64)> = s
        .epsilons
        .par_iter()
        .map(|&eps| generation_time(lab, eps, s.eta).map(|(t, m1)| (eps, t, m1)))
        .collect::<Result<_>>()?;
    report.push_rows(rows.iter().map(|&(eps, t, _)| SweepRow::new(eps, None, t, lab.generation_time(eps))));
    for &(eps, _, m1) in &rows {
        report.diagnostic(format!("band_m1_eps_{eps}"), m1);
    }
    let ratios_ok = report.sweep.iter().all(|r| (0.3..=3.0).contains(&r.ratio));
    let detail = report.sweep.iter().map(|r| format!("{:.4}", r.ratio)).collect::<Vec<_>>().join(", ");
    report.criterion("ratio_in_band", ratios_ok, format!("t*/t_eps = [{detail}], band [0.3, 3]"));
    let xs: Vec<f64> = report.sweep.iter().map(|r| r.reference).collect();
    let ys: Vec<f64> = report.sweep.iter().map(|r| r.measured).collect();
    match NamedFit::loglog("t_star_vs_eps2_ln_eps", &xs, &ys) {
        Some(fit) => {
            let ok = (0.8..=1.2).contains(&fit.slope);
            report.criterion("loglog_slope", ok, format!("slope {:.4}, band [0.8, 1.2]", fit.slope));
            report.fits.push(fit);
        }
        None => report.criterion("loglog_slope", false, "fit needs three positive points"),
    }
    Ok(report)
}

/// Layer width at `t_eps + T/2` over the sweep.
pub fn thickness_study(lab: &Lab) -> Result<ExperimentReport> {
    let s = &lab.setup;
    s.validate_sweep()?;
    let (_, horizon) = lab.reference()?;
    let mut report = ExperimentReport::new("thickness", s)?;
    report.diagnostic("horizon", horizon);
    let rows: Vec<SweepRow> = s
        .epsilons
        .par_iter()
        .map(|&eps| {
            let grid = s.grid(eps)?;
            let init = lab.initial(grid)?;
            let probe = lab.generation_time(eps) + 0.5 * horizon;
            let mut sim = Simulation::new(init.field, lab.solver(&grid, eps, probe))?;
            sim.advance_to(probe)?;
            let contour = extract_contour(&grid, &sim.field.values, lab.model.a)?;
            let w = transition_width(&grid, &sim.field.values, s.eta, &contour)?;
            Ok(SweepRow::new(eps, Some(probe - lab.generation_time(eps)), w.width, eps))
        })
        .collect::<Result<_>>()?;
    report.push_rows(rows);
    thickness_verdict(&mut report);
    Ok(report)
}

fn thickness_verdict(report: &mut ExperimentReport) {
    let xs: Vec<f64> = report.sweep.iter().map(|r| r.epsilon).collect();
    let ys: Vec<f64> = report.sweep.iter().map(|r| r.measured).collect();
    match NamedFit::loglog("width_vs_eps", &xs, &ys) {
        Some(fit) => {
            let ok = (0.8..=1.2).contains(&fit.slope);
            report.criterion("loglog_slope", ok, format!("slope {:.4}, band [0.8, 1.2]", fit.slope));
            report.fits.push(fit);
        }
        None => report.criterion("loglog_slope", false, "fit needs three positive points"),
    }
}

/// Width of the synthetic field `U0(d/eps)` around a centred circle, as a
/// check of the estimator itself.
pub fn synthetic_thickness(lab: &Lab) -> Result<ExperimentReport> {
    let s = &lab.setup;
    s.validate_sweep()?;
    // centred circle whose layer stays clear of the walls at every swept eps
    let center = [0.5 * s.lx, 0.5 * s.ly];
    let r0 = 0.25 * s.lx.min(s.ly);
    let mut report = ExperimentReport::new("synthetic_thickness", s)?;
    let rows: Vec<SweepRow> = s
        .epsilons
        .par_iter()
        .map(|&eps| {
            let grid = s.grid(eps)?;
            let wave = &lab.profile.wave;
            let values = grid.sample(|x, y| wave.u0_at(((x - center[0]).hypot(y - center[1]) - r0) / eps));
            let contour = extract_contour(&grid, &values, lab.model.a)?;
            let w = transition_width(&grid, &values, s.eta, &contour)?;
            Ok(SweepRow::new(eps, None, w.width, eps))
        })
        .collect::<Result<_>>()?;
    report.push_rows(rows);
    thickness_verdict(&mut report);
    Ok(report)
}

/// Polygon of a circle with vertex spacing at most `spacing`.
pub fn circle_contour(center: [f64; 2], radius: f64, spacing: f64, level: f64) -> Contour {
    let n = ((2.0 * PI * radius / spacing).ceil() as usize).max(64);
    let pts = (0..n)
        .map(|k| {
            let th = 2.0 * PI * k as f64 / n as f64;
            [center[0] + radius * th.cos(), center[1] + radius * th.sin()]
        })
        .collect();
    Contour { level, loops: vec![pts], open: Vec::new() }
}

/// Hausdorff distance between the `a`-level of the solution at `t + t_eps` and
/// the radial reference at `t`, for each probe time.
pub fn motion_study(lab: &Lab) -> Result<ExperimentReport> {
    let s = &lab.setup;
    s.validate_sweep()?;
    let (center, _) = lab.circle()?;
    let (series, horizon) = lab.reference()?;
    let probes: Vec<f64> = s.probe_fractions.iter().map(|f| f * horizon).collect();
    let mut report = ExperimentReport::new("motion", s)?;
    report.diagnostic("horizon", horizon);
    report.diagnostic("c0", lab.profile.c0());
    let per_eps: Vec<Vec<(SweepRow, f64)>> = s
        .epsilons
        .par_iter()
        .map(|&eps| {
            let grid = s.grid(eps)?;
            let init = lab.initial(grid)?;
            let t_eps = lab.generation_time(eps);
            let end = t_eps + probes.iter().cloned().fold(0.0, f64::max);
            let mut sim = Simulation::new(init.field, lab.solver(&grid, eps, end))?;
            let mut out = Vec::new();
            for &t in &probes {
                sim.advance_to(t + t_eps)?;
                let contour = extract_contour(&grid, &sim.field.values, lab.model.a)?;
                let r = series.radius_at(t).ok_or(Error::InvalidArgument("probe beyond the reference".into()))?;
                let reference = circle_contour(center, r, 0.25 * grid.h_min(), lab.model.a);
                let d = hausdorff(&contour, &reference, 0.5 * grid.h_min())?;
                let gamma_ref = series.domain_area - 2.0 * PI * r * r;
                out.push((SweepRow::new(eps, Some(t), d, eps), (sim.mass() - gamma_ref).abs()));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut gamma_gap: f64 = 0.0;
    let mut gamma_scaled: f64 = 0.0;
    for (row, g) in per_eps.iter().flatten() {
        gamma_gap = gamma_gap.max(*g);
        gamma_scaled = gamma_scaled.max(g / row.epsilon);
    }
    report.push_rows(per_eps.into_iter().flatten().map(|(r, _)| r));
    report.diagnostic("gamma_gap_max", gamma_gap);
    report.diagnostic("gamma_gap_over_eps_max", gamma_scaled);
    let band_constant = report.sweep.iter().map(|r| r.ratio).fold(0.0, f64::max);
    report.diagnostic("distance_over_eps_max", band_constant);
    for &t in &probes {
        let rows = report.rows_at(Some(t));
        let xs: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.measured).collect();
        match NamedFit::loglog(format!("hausdorff_vs_eps_t_{t:.6}"), &xs, &ys) {
            Some(fit) => {
                let ok = fit.slope >= 0.8;
                report.criterion(format!("loglog_slope_t_{t:.6}"), ok, format!("slope {:.4}, need >= 0.8", fit.slope));
                report.fits.push(fit);
            }
            None => report.criterion(format!("loglog_slope_t_{t:.6}"), false, "fit needs three positive points"),
        }
    }
    Ok(report)
}

/// Snapshots of a run at the given (sorted) times.
pub fn snapshots(lab: &Lab, grid: Grid2D, eps: f64, times: &[f64]) -> Result<Vec<Field2D>> {
    let init = lab.initial(grid)?;
    let end = times.last().copied().unwrap_or(0.0);
    let mut sim = Simulation::new(init.field, lab.solver(&grid, eps, end))?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        sim.advance_to(t)?;
        out.push(sim.field.clone());
    }
    Ok(out)
}

/// Outcome of a sandwich run together with its negative control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichOutcome {
    pub report: VerificationReport,
    /// The same checks with the two members exchanged.
    pub swapped: VerificationReport,
    /// The same checks against the trajectory scaled by 1.5.
    pub perturbed: VerificationReport,
}

fn scaled(fields: &[Field2D], factor: f64) -> Vec<Field2D> {
    fields
        .iter()
        .map(|f| {
            let mut g = f.clone();
            g.values.iter_mut().for_each(|v| *v *= factor);
            g
        })
        .collect()
}

/// Flow lattice over `|xi| <= 2 C0`, `|delta| <= max(eps G, delta0)` and five
/// times up to `t_eps / eps^2`.
pub fn generation_lattice(lab: &Lab, eps: f64, n_xi: usize, n_delta: usize) -> Result<FlowLattice> {
    let tau_end = lab.generation_time(eps) / (eps * eps);
    let taus: Vec<f64> = (1..=5).map(|k| tau_end * k as f64 / 5.0).collect();
    let delta_bound = (eps * lab.model.g_const).max(lab.model.delta0);
    flow_lattice(&lab.model, 2.0 * lab.initial_bound, delta_bound, n_xi, n_delta, &taus)
}

/// Generation pair against the solution on `[0, t_eps]`.
pub fn generation_sandwich(lab: &Lab, eps: f64, samples: usize) -> Result<SandwichOutcome> {
    let grid = lab.setup.grid(eps)?;
    let init = lab.initial(grid)?;
    let t_eps = lab.generation_time(eps);
    let lattice = generation_lattice(lab, eps, 12, 5)?;
    let cstar = generation_cstar(&lab.model, lattice.constant, init.grad_sup, init.laplacian_sup);
    let pair = build_generation_pair(&lab.model, &lab.setup.initial, &grid, eps, cstar)?;
    let times: Vec<f64> = (0..=samples).map(|k| t_eps * k as f64 / samples.max(1) as f64).collect();
    let fields = snapshots(lab, grid, eps, &times)?;
    let dt = lab.solver(&grid, eps, t_eps).dt;
    let opts = VerifyOptions::new(PairMode::Generation, dt);
    let report = verify_pair(&pair, &grid, &times, Some(&fields), PairMode::Generation, &opts)?;
    let swapped = verify_pair(&Swapped(&pair), &grid, &times, Some(&fields), PairMode::Generation, &opts)?;
    let perturbed = verify_pair(&pair, &grid, &times, Some(&scaled(&fields, 1.5)), PairMode::Generation, &opts)?;
    Ok(SandwichOutcome { report, swapped, perturbed })
}

/// Motion constants for a run at `eps`; `M1` is the layer half-width at
/// tolerance `sigma beta / 4`: half the step margin goes to the layer, half to
/// the interface displacement during generation.
pub fn motion_constants(lab: &Lab, horizon: f64) -> Result<MotionConstants> {
    let (center, r0) = lab.circle()?;
    let s = &lab.setup;
    let gap = center[0].min(center[1]).min(s.lx - center[0]).min(s.ly - center[1]) - r0;
    let d0 = gap / 3.0;
    let first = compute_motion_constants(&lab.model, &lab.profile, horizon, s.eta, d0, 0.0)?;
    let m1 = layer_half_width(&lab.profile.wave, 0.25 * first.sigma * first.beta)?;
    compute_motion_constants(&lab.model, &lab.profile, horizon, s.eta, d0, m1)
}

/// Motion pair against the solution shifted by `t_eps`, on `[0, T]`.
pub fn motion_sandwich(lab: &Lab, eps: f64, samples: usize) -> Result<SandwichOutcome> {
    let (center, _) = lab.circle()?;
    let (series, horizon) = lab.reference()?;
    let constants = motion_constants(lab, horizon)?;
    let interface = RadialInterface { center, series, d0: constants.d0 };
    let pair = build_motion_pair(&lab.model, &lab.profile, constants, &interface, eps);
    let grid = lab.setup.grid(eps)?;
    let t_eps = lab.generation_time(eps);
    let times: Vec<f64> = (0..=samples).map(|k| horizon * k as f64 / samples.max(1) as f64).collect();
    let shifted: Vec<f64> = times.iter().map(|t| t + t_eps).collect();
    let fields = snapshots(lab, grid, eps, &shifted)?;
    let dt = lab.solver(&grid, eps, horizon).dt;
    let opts = VerifyOptions::new(PairMode::Motion, dt);
    let report = verify_pair(&pair, &grid, &times, Some(&fields), PairMode::Motion, &opts)?;
    let swapped = verify_pair(&Swapped(&pair), &grid, &times, Some(&fields), PairMode::Motion, &opts)?;
    let perturbed = verify_pair(&pair, &grid, &times, Some(&scaled(&fields, 1.5)), PairMode::Motion, &opts)?;
    Ok(SandwichOutcome { report, swapped, perturbed })
}
