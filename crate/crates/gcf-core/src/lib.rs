//! Numerical laboratory for the Gauss curvature flow of convex bodies.
//!
//! Convex bodies in R^2 and R^3 are represented by support or radial
//! functions sampled on sphere grids. The crate time-steps the support-form
//! contraction, its radial-chart equivalent, and the induced expansion of
//! the polar bodies, and computes the diagnostics that tie the three
//! together: the pointwise duality product, the cone-angle ratio gamma,
//! the maximum-principle field chi with its admissible coefficient, and
//! extinction-scaled curvature tracks.

pub mod body;
pub mod error;
pub mod flow;
pub mod grid;
pub mod interp;
pub mod monitors;
pub mod suite;

pub use body::{
    boundary_points, build_support, geometry_from_radial, geometry_from_support, polar,
    radial_from_support, radial_from_support_brute, recentre, sigma_from_support, steiner_point,
    support_from_radial, support_to_spec, translate, volume, BodyGeometry, BodySpec, RadialField,
    RadialGeometry, SupportField,
};
pub use error::{GcfError, Result};
pub use flow::{
    estimate_extinction, normalize, run_flow, run_flow_from_config, step_dual, step_primal,
    step_radial, BodyRep, Extinction, FlowConfig, FlowKind, FlowState, Snapshot, Termination,
    Trajectory,
};
pub use grid::{make_grid, GradientField, ScalarField, SphereGrid, SymTensorField};
pub use monitors::{
    bound_tracks, chi_field, chi_lambda0, duality_report, gamma_of, lambda_threshold,
    polar_hessian_check, roundness, BandRow, BoundTracks, DiagnosticsRecord, DualityReport,
};
