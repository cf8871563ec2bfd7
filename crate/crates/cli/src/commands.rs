use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use nalab_core::geometry::{extract_contour, region_areas, signed_distance_raw};
use nalab_core::grid::Grid2D;
use nalab_core::harness::{
    generation_sandwich, generation_study, motion_sandwich, motion_study, synthetic_thickness,
    thickness_study, ExperimentReport, Lab, SCHEMA_VERSION,
};
use nalab_core::interface::{radial_evolve, LevelSetState};
use nalab_core::profile::{intrinsic_c0, wave_c0};
use nalab_core::solver::{run, Shape};
use nalab_core::Error;
use serde_json::json;

use crate::config::{InterfaceMethod, RunConfig, StudyKind, VerifyMode};

#[derive(Debug)]
pub enum Failure {
    /// A pass/fail criterion failed.
    Study(String),
    Config(String),
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Study(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Study(m) | Failure::Config(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::NotBistable(_)
            | Error::Unbalanced { .. }
            | Error::DeltaTooLarge { .. }
            | Error::BadInterface(_)
            | Error::InvalidArgument(_)
            | Error::SweepTooShort(_)
            | Error::Json(_) => Failure::Config(msg),
            _ => Failure::Numerical(msg),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numerical(format!("output failed: {e}"))
    }
}

pub type Outcome = Result<Vec<PathBuf>, Failure>;

pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
    pub hash: String,
}

impl Context {
    fn path(&self, stem: &str, ext: &str) -> PathBuf {
        self.out.join(format!("{stem}_{}.{ext}", self.hash))
    }

    fn create(&self, stem: &str, ext: &str) -> Result<(PathBuf, BufWriter<File>), Failure> {
        let p = self.path(stem, ext);
        Ok((p.clone(), BufWriter::new(File::create(p)?)))
    }

    fn write_json(&self, stem: &str, value: &serde_json::Value) -> Result<PathBuf, Failure> {
        let p = self.path(stem, "json");
        std::fs::write(&p, serde_json::to_string_pretty(value).map_err(Error::from)?)?;
        Ok(p)
    }

    fn lab(&self) -> Result<Lab, Failure> {
        Ok(Lab::new(self.config.setup())?)
    }

    fn grid(&self, lab: &Lab) -> Result<Grid2D, Failure> {
        let (nx, ny) = self.config.grid_size(&lab.setup);
        Ok(Grid2D::new(nx, ny, lab.setup.lx, lab.setup.ly)?)
    }

    fn save_report(&self, stem: &str, report: &ExperimentReport) -> Result<Vec<PathBuf>, Failure> {
        let (json_path, w) = self.create(stem, "json")?;
        report.write_json(w)?;
        let (csv_path, w) = self.create(stem, "csv")?;
        report.write_csv(w)?;
        Ok(vec![json_path, csv_path])
    }
}

pub fn profile(cx: &Context) -> Outcome {
    let lab = cx.lab()?;
    let (csv_path, w) = cx.create("profile", "csv")?;
    lab.profile.write_csv(w)?;
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "config_hash": cx.hash,
        "a": lab.model.a,
        "mu": lab.model.mu,
        "c0_wave": wave_c0(&lab.model, &lab.profile.wave),
        "c0_intrinsic": intrinsic_c0(&lab.model),
        "lambda": lab.profile.wave.lambda,
        "M": lab.profile.corrector.m_bound,
    });
    Ok(vec![csv_path, cx.write_json("profile_summary", &summary)?])
}

pub fn simulate(cx: &Context) -> Outcome {
    let lab = cx.lab()?;
    let grid = cx.grid(&lab)?;
    let eps = cx.config.epsilon();
    let t_end = cx.config.t_end.unwrap_or_else(|| lab.generation_time(eps));
    let init = lab.initial(grid)?;
    let mut cfg = lab.solver(&grid, eps, t_end);
    if let Some(dt) = cx.config.dt {
        cfg = cfg.with_dt(dt);
    }
    cfg.snapshot_every = cx.config.snapshot_every.unwrap_or(0);
    cfg.validate(&grid)?;
    let traj = run(init.field, cfg)?;
    let mut written = Vec::new();
    let mut times = Vec::new();
    for (k, snap) in traj.snapshots.iter().enumerate() {
        let stem = cx.out.join(format!("snapshot_{}_{k:04}", cx.hash));
        let (bin, meta) = snap.write_snapshot(&stem, eps)?;
        written.extend([bin, meta]);
        times.push(snap.time);
    }
    let (mass_path, w) = cx.create("mass", "csv")?;
    traj.write_mass_csv(w)?;
    written.push(mass_path);
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "config_hash": cx.hash,
        "epsilon": eps,
        "nx": grid.nx,
        "ny": grid.ny,
        "snapshot_times": times,
        "steps": traj.mass.len() - 1,
    });
    written.push(cx.write_json("simulate_summary", &summary)?);
    Ok(written)
}

pub fn interface(cx: &Context) -> Outcome {
    let lab = cx.lab()?;
    let s = &lab.setup;
    let c0 = lab.profile.c0();
    let t_end = cx.config.t_end.unwrap_or(0.02);
    match cx.config.interface_method.unwrap_or(InterfaceMethod::Radial) {
        InterfaceMethod::Radial => {
            let Shape::Circle { center, radius } = s.initial.shape else {
                return Err(Failure::Config("the radial method needs circular initial data".into()));
            };
            let max_radius = center[0].min(center[1]).min(s.lx - center[0]).min(s.ly - center[1]);
            let dt = cx.config.dt.unwrap_or(t_end.max(1e-12) / 2000.0);
            let series = radial_evolve(radius, c0, s.lx * s.ly, t_end, dt, max_radius)?;
            let (p, w) = cx.create("radial", "csv")?;
            series.write_csv(w)?;
            let summary = json!({
                "schema_version": SCHEMA_VERSION,
                "config_hash": cx.hash,
                "c0": c0,
                "extinction": series.extinction,
                "final_radius": series.r.last(),
            });
            Ok(vec![p, cx.write_json("radial_summary", &summary)?])
        }
        InterfaceMethod::Levelset => {
            let grid = cx.grid(&lab)?;
            let init = lab.initial(grid)?;
            let contour = extract_contour(&grid, &init.field.values, lab.model.a)?;
            let phi = signed_distance_raw(&contour, &grid);
            let mut state = LevelSetState::new(grid, phi, c0)?;
            let dt = cx.config.dt.unwrap_or_else(|| state.default_dt());
            let chunks = 20;
            let (series_path, w) = cx.create("levelset", "csv")?;
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(["t", "gamma", "area_minus"]).map_err(Error::from)?;
            for k in 0..=chunks {
                if k > 0 {
                    state.advance_to(t_end * k as f64 / chunks as f64, dt)?;
                }
                let areas = region_areas(&state.contour()?, grid.area())?;
                csv.write_record([state.time, state.gamma(), areas.area_minus].map(|v| format!("{v:.17e}")))
                    .map_err(Error::from)?;
            }
            csv.flush()?;
            let (contour_path, w) = cx.create("levelset_contour", "csv")?;
            state.contour()?.write_csv(w)?;
            Ok(vec![series_path, contour_path])
        }
    }
}

pub fn study(cx: &Context) -> Outcome {
    let lab = cx.lab()?;
    let kind = cx.config.study.ok_or_else(|| Failure::Config("missing key `study`".into()))?;
    lab.setup.validate_sweep()?;
    let report = match kind {
        StudyKind::Generation => generation_study(&lab)?,
        StudyKind::Thickness => thickness_study(&lab)?,
        StudyKind::SyntheticThickness => synthetic_thickness(&lab)?,
        StudyKind::Motion => motion_study(&lab)?,
    };
    let written = cx.save_report(&format!("study_{}", report.kind), &report)?;
    if report.passed {
        Ok(written)
    } else {
        let failed: Vec<_> = report.criteria.iter().filter(|c| !c.passed).map(|c| format!("{}: {}", c.name, c.detail)).collect();
        Err(Failure::Study(format!("{} study failed: {}", report.kind, failed.join("; "))))
    }
}

pub fn verify(cx: &Context) -> Outcome {
    let lab = cx.lab()?;
    let eps = cx.config.epsilon();
    let samples = cx.config.samples.unwrap_or(8);
    let mode = cx.config.verify_mode.unwrap_or(VerifyMode::Generation);
    let outcome = match mode {
        VerifyMode::Generation => generation_sandwich(&lab, eps, samples)?,
        VerifyMode::Motion => motion_sandwich(&lab, eps, samples)?,
    };
    let swapped = cx.config.swapped.unwrap_or(false);
    let (primary, control) = if swapped {
        (&outcome.swapped, &outcome.report)
    } else {
        (&outcome.report, &outcome.swapped)
    };
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "config_hash": cx.hash,
        "mode": mode,
        "epsilon": eps,
        "swapped": swapped,
        "report": primary,
        "control_swapped": control,
        "control_perturbed": outcome.perturbed,
        "controls_fail": !control.passed && !outcome.perturbed.passed,
        "passed": primary.passed,
    });
    let p = cx.write_json("verify", &doc)?;
    if primary.passed {
        Ok(vec![p])
    } else {
        Err(Failure::Study(format!(
            "pair checks failed: residual {}, ordering {}, sandwich {}",
            primary.residual_ok, primary.ordering_ok, primary.sandwich_ok
        )))
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("cannot create {}: {e}", dir.display())))
}
