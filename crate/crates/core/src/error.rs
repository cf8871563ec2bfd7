use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("nonlinearity is not bistable: {0}")]
    NotBistable(String),
    #[error("wells are unbalanced: integral of f(u,0) over [-1,1] is {integral:.3e} (tolerance {tol:.1e})")]
    Unbalanced { integral: f64, tol: f64 },
    #[error("perturbation delta = {delta} changes the root structure (admissible range ({lower}, {upper}))")]
    DeltaTooLarge { delta: f64, lower: f64, upper: f64 },
    #[error("ODE step size underflow at t = {t}")]
    StiffnessFailure { t: f64 },
    #[error("standing-wave quadrature failed: {0}")]
    QuadratureSingular(String),
    #[error("corrector solvability violated: |<U0', g>| = {residual:.3e}")]
    FredholmViolation { residual: f64 },
    #[error("corrector linear solve residual {residual:.3e} exceeds tolerance")]
    IllConditioned { residual: f64 },
    #[error("initial interface is invalid: {0}")]
    BadInterface(String),
    #[error("solution diverged at t = {time}: max |u| = {max_abs}")]
    Diverged { time: f64, max_abs: f64 },
    #[error("linear solve did not converge after {iterations} iterations (residual {residual:.3e})")]
    LinearSolveFailed { iterations: usize, residual: f64 },
    #[error("contour is empty")]
    EmptyContour,
    #[error("interface vanished at t = {time}")]
    InterfaceVanished { time: f64 },
    #[error("circle extinct at t = {time}")]
    Extinction { time: f64 },
    #[error("radius {radius} left the admissible range (0, {max_radius})")]
    LeftDomain { radius: f64, max_radius: f64 },
    #[error("no admissible K within the profile table (needed |z| = {needed}, table half-width {half_width})")]
    NoAdmissibleK { needed: f64, half_width: f64 },
    #[error("argument {z} outside the profile table")]
    OutOfTable { z: f64 },
    #[error("generation criterion not reached by t = {t_max}")]
    NeverGenerated { t_max: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("study needs at least 3 epsilon values, got {0}")]
    SweepTooShort(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad inputs).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StiffnessFailure { .. }
                | Error::QuadratureSingular(_)
                | Error::IllConditioned { .. }
                | Error::Diverged { .. }
                | Error::LinearSolveFailed { .. }
                | Error::InterfaceVanished { .. }
                | Error::NeverGenerated { .. }
                | Error::FredholmViolation { .. }
        )
    }
}
