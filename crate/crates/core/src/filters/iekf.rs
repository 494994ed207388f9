//! Left-invariant EKF on SE(2).
//!
//! The covariance describes `xi = log(mean^-1 truth)`. Innovations are taken in
//! the car frame and corrections are applied by right multiplication,
//! `mean <- mean * exp(K z)`.

use nalgebra::{Matrix2, Matrix3, Vector2};

use super::{
    kalman_gain, riccati_rk4, updated_covariance, ErrorConvention, FilterConfig, FilterError,
    IekfJacobian, RiccatiScheme, StateEstimate, UpdateInfo,
};
use crate::se2::{Se2, Tangent3};
use crate::sim::Integrator;

/// The increment the mean is multiplied by over one step.
pub fn step_increment(omega: f64, u: f64, dt: f64, integrator: Integrator) -> Se2 {
    match integrator {
        Integrator::Exact => Se2::exp(&Tangent3::new(omega * dt, u * dt, 0.0)),
        Integrator::Euler => Se2::new(omega * dt, u * dt, 0.0),
    }
}

/// Error transition over one step. For the adjoint Jacobian this is
/// `Ad(U^-1)`, the exact propagation of the invariant error.
pub fn transition_matrix(omega: f64, u: f64, dt: f64, config: &FilterConfig) -> Matrix3<f64> {
    match config.iekf_jacobian {
        IekfJacobian::Adjoint => step_increment(omega, u, dt, config.mean_integrator)
            .inverse()
            .adjoint(),
        other => (other.matrix(omega, u) * dt).exp(),
    }
}

pub fn propagate(
    est: &StateEstimate,
    omega: f64,
    u: f64,
    dt: f64,
    config: &FilterConfig,
) -> StateEstimate {
    assert_eq!(
        est.convention(),
        ErrorConvention::LeftInvariant,
        "IEKF needs a left-invariant estimate"
    );
    let mean = est.mean * step_increment(omega, u, dt, config.mean_integrator);
    let cov = match config.riccati {
        RiccatiScheme::Exact => {
            let phi = transition_matrix(omega, u, dt, config);
            let mut p = phi * est.cov * phi.transpose();
            if let Some(q) = &config.process_noise {
                p += q * dt;
            }
            p
        }
        RiccatiScheme::Rk4 => {
            let a = config.iekf_jacobian.matrix(omega, u);
            riccati_rk4(&est.cov, dt, config.process_noise.as_ref(), |_| a)
        }
    };
    StateEstimate::new(mean, cov, ErrorConvention::LeftInvariant)
}

/// Position-fix update. The fix covariance is expressed in the car frame,
/// `R^T N R`, which equals `N` for isotropic noise.
pub fn update(
    est: &StateEstimate,
    y: &Vector2<f64>,
    noise: &Matrix2<f64>,
    config: &FilterConfig,
) -> Result<(StateEstimate, UpdateInfo), FilterError> {
    assert_eq!(
        est.convention(),
        ErrorConvention::LeftInvariant,
        "IEKF needs a left-invariant estimate"
    );
    let rt = est.mean.rotation_matrix().transpose();
    let body_noise = rt * noise * rt.transpose();
    let gain = kalman_gain(&est.cov, &body_noise)?;
    let innovation = rt * (y - est.mean.pos);
    let correction = Tangent3::from_vector(&(gain * innovation));
    let mean = est.mean.retract(&correction);
    let cov = updated_covariance(&est.cov, &gain, &body_noise, config.covariance_update);
    Ok((
        StateEstimate::new(mean, cov, ErrorConvention::LeftInvariant),
        UpdateInfo { innovation, gain },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se2::{ad, j_matrix};
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn prior(p0: f64) -> StateEstimate {
        StateEstimate::heading_only(0.0, p0, ErrorConvention::LeftInvariant)
    }

    #[test]
    fn standing_still_changes_nothing() {
        let est = StateEstimate::new(
            Se2::new(0.4, 1.0, 2.0),
            Matrix3::from_diagonal(&Vector3::new(0.3, 0.2, 0.1)),
            ErrorConvention::LeftInvariant,
        );
        let out = propagate(&est, 0.0, 0.0, 0.1, &FilterConfig::default());
        assert_eq!(out.mean, est.mean);
        assert_relative_eq!(out.cov, est.cov, epsilon = 1e-15);
    }

    #[test]
    fn straight_line_covariance_closed_form() {
        let p0 = 0.8;
        for riccati in [RiccatiScheme::Exact, RiccatiScheme::Rk4] {
            let cfg = FilterConfig {
                riccati,
                ..Default::default()
            };
            let mut est = prior(p0);
            for _ in 0..300 {
                est = propagate(&est, 0.0, 1.0, 0.01, &cfg);
            }
            let t = 3.0;
            let expected = Matrix3::new(p0, 0.0, t * p0, 0.0, 0.0, 0.0, t * p0, 0.0, t * t * p0);
            assert_relative_eq!(est.cov, expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn jacobian_does_not_depend_on_estimate() {
        let cfg = FilterConfig::default();
        let a = prior(1.0);
        let mut b = prior(1.0);
        b.mean = Se2::new(1.3, 4.0, -2.0);
        let pa = propagate(&a, 0.2, 1.1, 0.05, &cfg);
        let pb = propagate(&b, 0.2, 1.1, 0.05, &cfg);
        assert_eq!(pa.cov, pb.cov);
        assert_eq!(
            transition_matrix(0.2, 1.1, 0.05, &cfg),
            transition_matrix(0.2, 1.1, 0.05, &cfg)
        );
    }

    #[test]
    fn adjoint_transition_is_matrix_exponential_of_jacobian() {
        let (omega, u, dt) = (0.7, 1.3, 0.1);
        let closed = transition_matrix(omega, u, dt, &FilterConfig::default());
        let expm = (IekfJacobian::Adjoint.matrix(omega, u) * dt).exp();
        assert_relative_eq!(closed, expm, epsilon = 1e-13);
        let v = Tangent3::new(omega, u, 0.0);
        assert_relative_eq!(
            IekfJacobian::Adjoint.matrix(omega, u),
            -ad(&v),
            epsilon = 0.0
        );
        assert_relative_eq!(
            IekfJacobian::FlippedSign.matrix(omega, u),
            ad(&v),
            epsilon = 0.0
        );
    }

    #[test]
    fn zero_innovation_keeps_mean() {
        let mut est = prior(1.0);
        for _ in 0..10 {
            est = propagate(&est, 0.1, 1.0, 0.01, &FilterConfig::default());
        }
        let y = est.mean.pos;
        let (out, info) = update(&est, &y, &Matrix2::identity(), &FilterConfig::default()).unwrap();
        assert_eq!(info.innovation, Vector2::zeros());
        assert_eq!(out.mean, est.mean);
    }

    #[test]
    fn gain_image_follows_reference_curve() {
        // Image of K is spanned by (1, J b).
        let cfg = FilterConfig::default();
        let mut est = StateEstimate::heading_only(0.9, 1.5, ErrorConvention::LeftInvariant);
        let mut b = Vector2::zeros();
        let dt = 0.01;
        for k in 0..400 {
            let omega = 0.3 * (0.01 * k as f64).cos();
            est = propagate(&est, omega, 1.0, dt, &cfg);
            b = crate::sim::reference_step(&b, omega, 1.0, dt, Integrator::Exact);
        }
        let (_, info) = update(
            &est,
            &Vector2::new(2.0, 3.0),
            &(Matrix2::identity() * 0.3),
            &cfg,
        )
        .unwrap();
        let jb = j_matrix() * b;
        let dir = Vector3::new(1.0, jb[0], jb[1]);
        for c in 0..2 {
            let col = info.gain.column(c).into_owned();
            let cross = col.cross(&dir).norm() / dir.norm();
            assert!(
                cross < 1e-12,
                "column {c} off the gain direction by {cross}"
            );
        }
    }
}
