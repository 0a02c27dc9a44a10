//! Independent checks: a grid oracle for the two-cell landscape, the property
//! suite and cross-checks of the mountain-pass modes.

mod cross;
mod oracle;
mod suite;

pub use cross::{cross_check_mountain_pass, landscape_grid, reduced_landscape, CrossCheck, OracleRow};
pub use oracle::{bottleneck_minimax_2d, example_landscape, OracleGrid2D, OracleResult, MIN_RESOLUTION};
pub use suite::{run_property_suite, scaling_periods, PropertyReport, PROPERTIES};
