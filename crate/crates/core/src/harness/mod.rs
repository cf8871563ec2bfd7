//! Verification studies: constants of the sub/super-solution pairs, the pairs
//! themselves, their numerical checks and the epsilon sweeps.

mod constants;
mod pairs;
mod report;
mod studies;
mod verify;

pub use constants::{
    compute_motion_constants, flow_lattice, flow_reach, generation_cstar, layer_half_width,
    FlowLattice, MotionConstants,
};
pub use pairs::{
    build_generation_pair, build_motion_pair, FrozenInterface, GenerationPair, MotionPair,
    MovingInterface, RadialInterface, SolutionPair, Swapped,
};
pub use report::{config_hash, Criterion, ExperimentReport, NamedFit, SweepRow, SCHEMA_VERSION};
pub use studies::{
    circle_contour, generation_lattice, generation_sandwich, generation_study, generation_time, motion_constants,
    motion_sandwich, motion_study, snapshots, synthetic_thickness, thickness_study, Lab,
    SandwichOutcome, StudySetup,
};
pub use verify::{
    step_bounds_check, verify_pair, PairMode, StepBoundsReport, VerificationReport, VerifyOptions,
};
