//! Invariant and standard extended Kalman filtering for a planar car with
//! odometry and position fixes, the scalar theory of their straight-line
//! behaviour, and factor-graph smoothing under four state parametrizations.

pub mod analysis;
pub mod experiments;
pub mod filters;
pub mod se2;
pub mod sim;
pub mod smoothing;

pub use experiments::{run_experiment, Experiment, ExperimentError, ExperimentSpec, Summary};
pub use filters::{run_filter, EstimateTrace, FilterConfig, FilterKind, RunOptions, StateEstimate};
pub use se2::{Rotation2, Se2, Tangent3};
pub use sim::{simulate, Integrator, Profile, ScenarioConfig, Trajectory};
pub use smoothing::{gn_solve, sliding_window_run, FactorGraphProblem, Parametrization, Prior};
