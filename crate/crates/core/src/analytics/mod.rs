//! Closed forms, conserved curves, limits, curvature traces and fate classification.

mod closed_form;
mod curvature;
mod fate;
mod s3;

pub use closed_form::{
    closed_form_state, conserved_residual, conserved_residual_with_gap, eta, kappa, kappa_limits,
    ConservedCurveId, KappaForm, L1_RATE,
};
pub use curvature::{curvature_at, curvature_trace, user_curvature_trace, CurvaturePoint};
pub use fate::{
    applicable_curves, attach_observation, canonical_prediction, classify_and_observe, classify_fate, compare, curve_residuals,
    observe, observed_only_report, predicted_limits, s3_bc, ClassifyOptions, Fate, FateReport, Limit, Observed, Predicted, S3Stratum,
    Trend, SETTLED_SLOPE,
};
pub use s3::{
    boundary_fate, stable_manifold_point, stable_manifold_s3, BoundaryFate, BoundaryFlow, ManifoldPoint,
    BISECTION_RTOL, ESCAPE_MARGIN, P0_SPREAD,
};
