//! Kalman-type estimators for the car: a generic linear Kalman filter, the
//! classical EKF on `(theta, x)` and the left-invariant EKF on SE(2).
//!
//! None of the filters carries process noise by default; the odometry is
//! treated as exact and the covariance evolves by the pure Riccati flow
//! `P' = A P + P A^T` between position fixes.

pub mod ekf;
pub mod iekf;
pub mod linear_kf;
mod runner;

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Matrix3x2, Vector2};
use thiserror::Error;

use crate::se2::Se2;
use crate::sim::Integrator;

pub use runner::{run_filter, write_trace_csv, EstimateTrace, FilterKind, RunOptions, TraceRecord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("innovation covariance is singular")]
    SingularInnovation,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<FilterError>,
    },
}

/// How the covariance of an estimate should be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorConvention {
    /// Plain difference of `(theta, x)` coordinates.
    Linear,
    /// `log(mean^-1 * truth)`, invariant to left multiplication.
    LeftInvariant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateEstimate {
    pub mean: Se2,
    pub cov: Matrix3<f64>,
    convention: ErrorConvention,
}

impl StateEstimate {
    pub fn new(mean: Se2, cov: Matrix3<f64>, convention: ErrorConvention) -> Self {
        Self {
            mean,
            cov: condition_covariance(&cov),
            convention,
        }
    }

    pub fn convention(&self) -> ErrorConvention {
        self.convention
    }

    /// Known position, uncertain heading: `P0 = diag(p0, 0, 0)`.
    pub fn heading_only(theta: f64, heading_variance: f64, convention: ErrorConvention) -> Self {
        Self::new(
            Se2::new(theta, 0.0, 0.0),
            Matrix3::from_diagonal(&nalgebra::Vector3::new(heading_variance, 0.0, 0.0)),
            convention,
        )
    }

    /// `|R(theta)^T x - b|`, the distance to the reachable-set curve.
    pub fn manifold_residual(&self, b: &Vector2<f64>) -> f64 {
        (self.mean.rot.inverse().rotate(&self.mean.pos) - b).norm()
    }
}

/// The initial heading variance used throughout the experiments.
pub const DEFAULT_HEADING_VARIANCE: f64 = PI / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceUpdate {
    /// `(I - K H) P`
    #[default]
    Standard,
    /// `(I - K H) P (I - K H)^T + K N K^T`
    Joseph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RiccatiScheme {
    /// Closed-form transition over each step where one exists, RK4 otherwise.
    #[default]
    Exact,
    Rk4,
}

/// The error-dynamics matrix used by the invariant filter.
///
/// Only [`IekfJacobian::Adjoint`] is consistent with the error
/// `log(mean^-1 truth)` and the body-frame innovation; the two other sign
/// patterns are kept so the discrepancy can be measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IekfJacobian {
    /// `[[0,0,0],[0,0,w],[u,-w,0]]`, i.e. `-ad_(w, u, 0)`.
    #[default]
    Adjoint,
    /// `[[0,0,0],[0,0,w],[-u,-w,0]]`.
    FlippedTranslation,
    /// `[[0,0,0],[0,0,-w],[-u,w,0]]`, i.e. `+ad_(w, u, 0)`.
    FlippedSign,
}

impl IekfJacobian {
    pub fn matrix(&self, omega: f64, u: f64) -> Matrix3<f64> {
        match self {
            IekfJacobian::Adjoint => Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, omega, u, -omega, 0.0),
            IekfJacobian::FlippedTranslation => {
                Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, omega, -u, -omega, 0.0)
            }
            IekfJacobian::FlippedSign => {
                Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -omega, -u, omega, 0.0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub covariance_update: CovarianceUpdate,
    pub riccati: RiccatiScheme,
    pub mean_integrator: Integrator,
    /// Continuous process-noise density added to the Riccati flow. `None` keeps
    /// the odometry exact.
    pub process_noise: Option<Matrix3<f64>>,
    pub iekf_jacobian: IekfJacobian,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            covariance_update: CovarianceUpdate::Standard,
            riccati: RiccatiScheme::Exact,
            mean_integrator: Integrator::Exact,
            process_noise: None,
            iekf_jacobian: IekfJacobian::Adjoint,
        }
    }
}

/// Position-fix observation matrix, angle-first ordering.
pub fn observation_matrix() -> Matrix2x3<f64> {
    Matrix2x3::new(0.0, 1.0, 0.0, 0.0, 0.0, 1.0)
}

/// What an update step saw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateInfo {
    pub innovation: Vector2<f64>,
    pub gain: Matrix3x2<f64>,
}

pub(crate) fn kalman_gain(
    cov: &Matrix3<f64>,
    noise: &Matrix2<f64>,
) -> Result<Matrix3x2<f64>, FilterError> {
    let h = observation_matrix();
    let s = h * cov * h.transpose() + noise;
    let s_inv = s.try_inverse().ok_or(FilterError::SingularInnovation)?;
    if !s_inv.iter().all(|v| v.is_finite()) {
        return Err(FilterError::SingularInnovation);
    }
    Ok(cov * h.transpose() * s_inv)
}

pub(crate) fn updated_covariance(
    cov: &Matrix3<f64>,
    gain: &Matrix3x2<f64>,
    noise: &Matrix2<f64>,
    form: CovarianceUpdate,
) -> Matrix3<f64> {
    let ikh = Matrix3::identity() - gain * observation_matrix();
    let p = match form {
        CovarianceUpdate::Standard => ikh * cov,
        CovarianceUpdate::Joseph => ikh * cov * ikh.transpose() + gain * noise * gain.transpose(),
    };
    condition_covariance(&p)
}

/// One RK4 step of `P' = A(s) P + P A(s)^T + Q` over `[0, dt]`.
pub(crate) fn riccati_rk4(
    cov: &Matrix3<f64>,
    dt: f64,
    q: Option<&Matrix3<f64>>,
    a_at: impl Fn(f64) -> Matrix3<f64>,
) -> Matrix3<f64> {
    let f = |s: f64, p: &Matrix3<f64>| {
        let a = a_at(s);
        let mut d = a * p + p * a.transpose();
        if let Some(q) = q {
            d += q;
        }
        d
    };
    let k1 = f(0.0, cov);
    let k2 = f(0.5 * dt, &(cov + k1 * (0.5 * dt)));
    let k3 = f(0.5 * dt, &(cov + k2 * (0.5 * dt)));
    let k4 = f(dt, &(cov + k3 * dt));
    cov + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// Floor applied to negative covariance eigenvalues.
pub const EIGENVALUE_FLOOR: f64 = -1e-10;

/// Symmetrises, and clamps eigenvalues when they drop below
/// [`EIGENVALUE_FLOOR`].
pub fn condition_covariance(p: &Matrix3<f64>) -> Matrix3<f64> {
    let sym = (p + p.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    if eig.eigenvalues.min() >= EIGENVALUE_FLOOR {
        return sym;
    }
    let clamped = eig.eigenvalues.map(|v| v.max(0.0));
    let q = eig.eigenvectors;
    let p = q * Matrix3::from_diagonal(&clamped) * q.transpose();
    (p + p.transpose()) * 0.5
}
