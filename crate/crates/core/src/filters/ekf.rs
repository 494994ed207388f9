//! Classical EKF on the coordinates `(theta, x1, x2)`.

use nalgebra::{Matrix2, Matrix3, Vector2};

use super::{
    kalman_gain, riccati_rk4, updated_covariance, ErrorConvention, FilterConfig, FilterError,
    StateEstimate, UpdateInfo,
};
use crate::se2::Se2;
use crate::sim::integrate_pose;

/// Linearised dynamics of `(theta, x)` at heading `theta_hat`.
pub fn propagation_matrix(theta_hat: f64, u: f64) -> Matrix3<f64> {
    let (s, c) = theta_hat.sin_cos();
    Matrix3::new(0.0, 0.0, 0.0, -s * u, 0.0, 0.0, c * u, 0.0, 0.0)
}

/// Integrates mean and covariance over one odometry step.
pub fn propagate(
    est: &StateEstimate,
    omega: f64,
    u: f64,
    dt: f64,
    config: &FilterConfig,
) -> StateEstimate {
    assert_eq!(
        est.convention(),
        ErrorConvention::Linear,
        "EKF needs a linear-error estimate"
    );
    let mean = integrate_pose(&est.mean, omega, u, dt, config.mean_integrator);
    let theta0 = est.mean.heading();
    // A(theta) is nilpotent, so RK4 is exact whenever the heading is frozen.
    let cov = riccati_rk4(&est.cov, dt, config.process_noise.as_ref(), |s| {
        propagation_matrix(theta0 + omega * s, u)
    });
    StateEstimate::new(mean, cov, ErrorConvention::Linear)
}

/// Position-fix update with additive correction of `(theta, x)`.
pub fn update(
    est: &StateEstimate,
    y: &Vector2<f64>,
    noise: &Matrix2<f64>,
    config: &FilterConfig,
) -> Result<(StateEstimate, UpdateInfo), FilterError> {
    assert_eq!(
        est.convention(),
        ErrorConvention::Linear,
        "EKF needs a linear-error estimate"
    );
    let gain = kalman_gain(&est.cov, noise)?;
    let innovation = y - est.mean.pos;
    let dx = gain * innovation;
    let mean = Se2::from_parts(
        est.mean.heading() + dx[0],
        est.mean.pos + Vector2::new(dx[1], dx[2]),
    );
    let cov = updated_covariance(&est.cov, &gain, noise, config.covariance_update);
    Ok((
        StateEstimate::new(mean, cov, ErrorConvention::Linear),
        UpdateInfo { innovation, gain },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::DEFAULT_HEADING_VARIANCE;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn prior() -> StateEstimate {
        StateEstimate::heading_only(0.0, DEFAULT_HEADING_VARIANCE, ErrorConvention::Linear)
    }

    #[test]
    fn standing_still_changes_nothing() {
        let est = StateEstimate::new(
            Se2::new(0.4, 1.0, 2.0),
            Matrix3::from_diagonal(&Vector3::new(0.3, 0.2, 0.1)),
            ErrorConvention::Linear,
        );
        let out = propagate(&est, 0.0, 0.0, 0.1, &FilterConfig::default());
        assert_eq!(out, est);
    }

    #[test]
    fn straight_line_covariance_closed_form() {
        let p0 = DEFAULT_HEADING_VARIANCE;
        let mut est = prior();
        let dt = 0.01;
        for _ in 0..250 {
            est = propagate(&est, 0.0, 1.0, dt, &FilterConfig::default());
        }
        let t = 2.5;
        assert_relative_eq!(est.cov[(2, 2)], t * t * p0, epsilon = 1e-10);
        assert_relative_eq!(est.cov[(0, 2)], t * p0, epsilon = 1e-10);
        assert_relative_eq!(est.cov[(1, 1)], 0.0, epsilon = 1e-15);
        assert_eq!(est.cov, est.cov.transpose());
    }

    #[test]
    fn covariance_stays_symmetric_while_turning() {
        let mut est = prior();
        for k in 0..500 {
            est = propagate(
                &est,
                0.3 * (k as f64 * 0.01).sin(),
                1.5,
                0.01,
                &FilterConfig::default(),
            );
            assert!((est.cov - est.cov.transpose()).abs().max() < 1e-12);
        }
    }

    #[test]
    fn zero_innovation_keeps_mean_and_shrinks_covariance() {
        let mut est = prior();
        for _ in 0..100 {
            est = propagate(&est, 0.0, 1.0, 0.01, &FilterConfig::default());
        }
        let y = est.mean.pos;
        let (out, info) = update(&est, &y, &Matrix2::identity(), &FilterConfig::default()).unwrap();
        assert_eq!(info.innovation, Vector2::zeros());
        assert_eq!(out.mean, est.mean);
        assert!(out.cov.trace() < est.cov.trace());
    }

    #[test]
    fn heading_untouched_without_coupling() {
        let est = StateEstimate::new(
            Se2::new(0.5, 0.0, 0.0),
            Matrix3::from_diagonal(&Vector3::new(0.7, 1.0, 1.0)),
            ErrorConvention::Linear,
        );
        let (out, info) = update(
            &est,
            &Vector2::new(3.0, -1.0),
            &Matrix2::identity(),
            &FilterConfig::default(),
        )
        .unwrap();
        assert_eq!(info.gain.row(0).norm(), 0.0);
        assert_eq!(out.mean.heading(), 0.5);
        assert_relative_eq!(out.mean.pos, Vector2::new(1.5, -0.5), epsilon = 1e-15);
    }

    #[test]
    fn joseph_and_standard_agree_for_optimal_gain() {
        let mut est = prior();
        for _ in 0..100 {
            est = propagate(&est, 0.1, 1.0, 0.01, &FilterConfig::default());
        }
        let n = Matrix2::identity() * 0.5;
        let y = Vector2::new(0.7, 0.4);
        let (a, _) = update(&est, &y, &n, &FilterConfig::default()).unwrap();
        let joseph = FilterConfig {
            covariance_update: crate::filters::CovarianceUpdate::Joseph,
            ..Default::default()
        };
        let (b, _) = update(&est, &y, &n, &joseph).unwrap();
        assert_relative_eq!(a.cov, b.cov, epsilon = 1e-12);
    }

    #[test]
    #[should_panic]
    fn rejects_invariant_estimate() {
        let est = StateEstimate::heading_only(0.0, 1.0, ErrorConvention::LeftInvariant);
        propagate(&est, 0.0, 1.0, 0.1, &FilterConfig::default());
    }
}
