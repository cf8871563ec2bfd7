//! Interface extraction and measurement.

mod contour;
mod distance;
mod measure;

pub use contour::{extract_contour, Contour, Point};
pub use distance::{
    cutoff, default_cutoff, signed_distance, signed_distance_raw, signed_distance_to,
    SignedDistanceField,
};
pub use measure::{
    circumcurvature, curvature_samples, hausdorff, region_areas, resample_loop,
    transition_width, CurvatureSample, RegionAreas, TransitionWidth,
};
