//! The JSON run configuration. Every key is optional; unset study keys fall
//! back to the chosen preset.

use std::path::PathBuf;

use nalab_core::harness::{config_hash, StudySetup};
use nalab_core::solver::{InitialDataSpec, Scheme};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Unit square, circle of radius 0.4.
    #[default]
    Default,
    /// 2x2 box, circle next to the stable steady radius.
    Steady,
    /// Unit square, small-amplitude circle for the generation pair.
    Gentle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Generation,
    Thickness,
    SyntheticThickness,
    Motion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterfaceMethod {
    Radial,
    Levelset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyMode {
    Generation,
    Motion,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct RunConfig {
    pub preset: Option<Preset>,
    /// Coefficients of `f(u, 0)` in powers of `u`, lowest first.
    pub coefficients: Option<Vec<f64>>,
    pub coupling: Option<f64>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    #[serde(rename = "Lx")]
    pub lx: Option<f64>,
    #[serde(rename = "Ly")]
    pub ly: Option<f64>,
    pub epsilon: Option<f64>,
    /// Fixed time step; unset picks the stable default.
    pub dt: Option<f64>,
    pub scheme: Option<Scheme>,
    pub t_end: Option<f64>,
    /// Keep a snapshot every this many steps (0: first and last only).
    pub snapshot_every: Option<usize>,
    pub initial: Option<InitialDataSpec>,

    pub study: Option<StudyKind>,
    pub eps_list: Option<Vec<f64>>,
    pub eta: Option<f64>,
    /// Grid spacing of study runs as a fraction of epsilon.
    pub resolution: Option<f64>,
    pub horizon_fraction: Option<f64>,
    pub horizon: Option<f64>,
    pub probe_fractions: Option<Vec<f64>>,
    pub profile_nodes: Option<usize>,

    pub interface_method: Option<InterfaceMethod>,

    pub verify_mode: Option<VerifyMode>,
    pub samples: Option<usize>,
    /// Verify the pair with its members exchanged (a negative control).
    pub swapped: Option<bool>,

    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Hash of everything that can change an output; the output directory and
    /// worker count are left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = None;
        c.workers = None;
        config_hash(&c).expect("config serializes")[..16].to_string()
    }

    pub fn setup(&self) -> StudySetup {
        let mut s = match self.preset.unwrap_or_default() {
            Preset::Default => StudySetup::default(),
            Preset::Steady => StudySetup::steady(),
            Preset::Gentle => StudySetup::gentle(),
        };
        macro_rules! take {
            ($field:ident, $target:expr) => {
                if let Some(v) = &self.$field {
                    $target = v.clone();
                }
            };
        }
        take!(coefficients, s.coefficients);
        take!(coupling, s.coupling);
        take!(lx, s.lx);
        take!(ly, s.ly);
        take!(initial, s.initial);
        take!(eps_list, s.epsilons);
        take!(eta, s.eta);
        take!(resolution, s.resolution);
        take!(scheme, s.scheme);
        take!(horizon_fraction, s.horizon_fraction);
        take!(probe_fractions, s.probe_fractions);
        take!(profile_nodes, s.profile_nodes);
        if self.horizon.is_some() {
            s.horizon = self.horizon;
        }
        s
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(0.04)
    }

    /// Grid for single runs: explicit `nx`/`ny`, else spacing `resolution * epsilon`.
    pub fn grid_size(&self, setup: &StudySetup) -> (usize, usize) {
        let h = setup.resolution * self.epsilon();
        let n = |l: f64| (l / h - 1e-9).ceil() as usize + 1;
        (self.nx.unwrap_or(n(setup.lx)), self.ny.unwrap_or(n(setup.ly)))
    }
}
