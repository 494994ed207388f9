//! Every pass/fail bound used by the experiments and the acceptance suite.

/// Largest allowed `|R(theta_hat)^T x_hat - b|` along an invariant-filter run.
pub const MANIFOLD_RESIDUAL: f64 = 1e-9;
/// Simulation steps per run of the manifold-residual sweep.
pub const MANIFOLD_STEPS: usize = 10_000;
/// Number of random initial headings in the manifold-residual sweep.
pub const MANIFOLD_HEADINGS: usize = 20;
/// Noisy seeds per heading and profile in the manifold-residual sweep.
pub const MANIFOLD_NOISY_SEEDS: usize = 5;
/// The two other sign patterns of the error dynamics must leave the curve by
/// more than this.
pub const FLIPPED_JACOBIAN_RESIDUAL: f64 = 1e-3;

/// Largest allowed `|C x - alpha|` and `|C P C^T|` for the linear filter.
pub const LINEAR_CONSTRAINT: f64 = 1e-9;
pub const LINEAR_STEPS: usize = 1_000;

/// Relative gap between recursive and closed-form `a(t_n)`.
pub const RICCATI_RELATIVE: f64 = 1e-12;
pub const RICCATI_UPDATES: usize = 100_000;
/// Gap between the full filter and the scalar heading recursion.
pub const SCALAR_AGREEMENT: f64 = 1e-9;
pub const SCALAR_UPDATES: usize = 1_000;

/// Fitted log-log slope windows.
pub const HEADING_SLOPE: (f64, f64) = (-3.2, -2.8);
pub const POSITION_SLOPE: (f64, f64) = (-2.2, -1.8);
pub const RATE_UPDATES: usize = 100_000;
/// The fit spans the last two decades of updates.
pub const RATE_WINDOW_DECADES: u32 = 2;
/// A heading error of exactly pi must stay there to this precision.
pub const ANTIPODE_DRIFT: f64 = 4.0 * f64::EPSILON;

/// Final position error ratio between the small-error EKF and the invariant
/// filter.
pub const CONVERGENCE_RATIO: f64 = 10.0;
pub const CONVERGENCE_UPDATES: usize = 1_000_000;

/// Odometric distance: invariant filter exact, EKF off by at least this within
/// the first updates.
pub const ODOMETER_IEKF: f64 = 1e-9;
pub const ODOMETER_EKF: f64 = 1e-3;
pub const ODOMETER_EKF_UPDATES: usize = 50;

/// The EKF leaves the curve by at least this within the first updates.
pub const EKF_LEAVES_MANIFOLD: f64 = 0.01;
pub const EKF_LEAVES_MANIFOLD_UPDATES: usize = 20;

/// Left-invariance: invariant-filter iterates reproduced to this precision;
/// EKF gains, innovations and covariances differ by at least the witness.
pub const LEFT_INVARIANCE: f64 = 1e-10;
pub const EKF_WITNESS: f64 = 1e-3;

/// The cost plateau is reached once within this fraction of the final cost.
pub const PLATEAU_FRACTION: f64 = 0.01;
pub const PLATEAU_SEEDS: usize = 10;
/// Analytic versus central-difference Jacobians.
pub const JACOBIAN_FD: f64 = 1e-6;
/// Relative variation of the invariant information matrix across estimates.
pub const INFORMATION_INVARIANCE: f64 = 1e-12;

pub const WINDOW_SEEDS: usize = 100;
