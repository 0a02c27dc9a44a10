//! Numerical thresholds shared by every module.

/// Finite-difference step for derivative fallbacks and checks.
pub const FD_STEP: f64 = 1e-6;
/// Relative error allowed between analytic and finite-difference derivatives.
pub const FD_REL_TOL: f64 = 1e-6;
/// Slack for the submodularity inequality.
pub const SUBMODULARITY_SLACK: f64 = 1e-10;
/// Allowed energy increase per accepted integrator step.
pub const ENERGY_RISE_SLACK: f64 = 1e-10;
/// Maximum number of step halvings before a step is rejected.
pub const MAX_HALVINGS: usize = 20;
/// Default l2 gradient threshold declaring a field stationary.
pub const STATIONARITY_TOL: f64 = 1e-10;
/// l-infinity distance under which two stationary fields are identified.
pub const DEDUP_TOL: f64 = 1e-6;
/// Slack for the invariant gap box.
pub const BOX_TOL: f64 = 1e-10;
/// Slack for the clipping inequality.
pub const CLIP_SLACK: f64 = 1e-10;
/// Relative slack for the cell-count scaling of periodic minima.
pub const SCALING_REL_TOL: f64 = 1e-8;
/// Sup-norm residual accepted for a refined critical point.
pub const SADDLE_TOL: f64 = 1e-8;
/// Adjacent path nodes closer than this are a collapse.
pub const NODE_COLLAPSE_TOL: f64 = 1e-12;
/// Sitewise equality tolerance used by order comparisons.
pub const ORDER_TOL: f64 = 1e-12;
/// Tail bound that stops window doubling for strip problems.
pub const TAIL_TOL: f64 = 1e-10;
/// Initial and maximal half-width of the strip window.
pub const WINDOW_START: usize = 20;
pub const WINDOW_CAP: usize = 640;
