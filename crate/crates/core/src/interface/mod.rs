//! The sharp-interface limit: level sets and the radial reference.

mod levelset;
mod radial;

pub use levelset::{levelset_step, smoothed_heaviside, LevelSetState};
pub use radial::{
    radial_evolve, radial_steady_states, radial_velocity, RadialSeries, Stability, SteadyState,
};
