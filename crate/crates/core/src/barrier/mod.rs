//! Barrier shapes, local scaling frames, piecewise-parabolic approximations
//! of the semicircle, and the regime classifier for general profiles.

mod approx;
mod classify;
mod shape;

pub use approx::{
    approx_discrepancy, build_lower_approx, build_upper_approx, circle_frame, left_half, local_chord_frame,
    measured_coefficients, predicted_coefficients, Discrepancy, LocalChordFrame, Side,
};
pub use classify::{
    canonical, classify, classify_with, curvature_jump_density, ridge_density, ClassifyOptions, Regime,
};
pub use shape::{
    containment_check, power_parabola, scaling_frame, semicircle, ContainmentReport, ParabolicPiece,
    PieceFnBox, PiecewiseShape, ScalingFrame, ShapeFunction,
};
