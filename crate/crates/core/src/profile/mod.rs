//! One-dimensional layer machinery: the bistable flow, the standing wave and
//! the corrector.

mod corrector;
mod flow;
mod wave;

pub use corrector::{build_profile, corrector, intrinsic_c0, wave_c0, Corrector, ProfileTable};
pub use flow::{flow_series, ode_flow, FlowState, FlowTable};
pub use wave::{default_half_width, standing_wave, StandingWave};
