//! Linear Kalman filter for deterministic dynamics `x' = A x`, together with a
//! linear constraint `C_t x_t = alpha` that the dynamics preserve when
//! `C' = -C A`.

use nalgebra::{DMatrix, DVector};

use super::FilterError;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearKfState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub constraint: DMatrix<f64>,
    pub alpha: DVector<f64>,
}

/// A single measurement `y = H x + v`, `v ~ N(0, noise)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearObservation {
    pub h: DMatrix<f64>,
    pub y: DVector<f64>,
    pub noise: DMatrix<f64>,
}

impl LinearKfState {
    pub fn new(
        mean: DVector<f64>,
        cov: DMatrix<f64>,
        constraint: DMatrix<f64>,
        alpha: DVector<f64>,
    ) -> Result<Self, FilterError> {
        let n = mean.len();
        if cov.shape() != (n, n) {
            return Err(FilterError::Dimension(format!(
                "covariance is {:?}, state has {n}",
                cov.shape()
            )));
        }
        if constraint.ncols() != n || constraint.nrows() != alpha.len() {
            return Err(FilterError::Dimension(format!(
                "constraint is {:?}, alpha has {}",
                constraint.shape(),
                alpha.len()
            )));
        }
        Ok(Self {
            mean,
            cov,
            constraint,
            alpha,
        })
    }

    /// `C x - alpha`.
    pub fn constraint_residual(&self) -> DVector<f64> {
        &self.constraint * &self.mean - &self.alpha
    }

    /// `C P C^T`.
    pub fn constrained_covariance(&self) -> DMatrix<f64> {
        &self.constraint * &self.cov * self.constraint.transpose()
    }
}

/// Propagates over `dt` with constant `A`, then applies `obs` if present.
pub fn linear_kf_step(
    state: &LinearKfState,
    a: &DMatrix<f64>,
    dt: f64,
    obs: Option<&LinearObservation>,
) -> Result<LinearKfState, FilterError> {
    let n = state.mean.len();
    if a.shape() != (n, n) {
        return Err(FilterError::Dimension(format!(
            "A is {:?}, state has {n}",
            a.shape()
        )));
    }
    let phi = (a * dt).exp();
    let phi_back = (a * -dt).exp();
    let mut mean = &phi * &state.mean;
    let mut cov = &phi * &state.cov * phi.transpose();
    let constraint = &state.constraint * phi_back;

    if let Some(obs) = obs {
        let m = obs.y.len();
        if obs.h.shape() != (m, n) || obs.noise.shape() != (m, m) {
            return Err(FilterError::Dimension(format!(
                "H is {:?}, N is {:?}",
                obs.h.shape(),
                obs.noise.shape()
            )));
        }
        let s = &obs.h * &cov * obs.h.transpose() + &obs.noise;
        let s_inv = s.try_inverse().ok_or(FilterError::SingularInnovation)?;
        let gain = &cov * obs.h.transpose() * s_inv;
        mean += &gain * (&obs.y - &obs.h * &mean);
        cov = (DMatrix::identity(n, n) - &gain * &obs.h) * cov;
        cov = (&cov + cov.transpose()) * 0.5;
    }

    Ok(LinearKfState {
        mean,
        cov,
        constraint,
        alpha: state.alpha.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn double_integrator() -> (LinearKfState, DMatrix<f64>, DMatrix<f64>) {
        let state = LinearKfState::new(
            DVector::from_vec(vec![2.0, 0.0]),
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0])),
            dmatrix![1.0, 0.0],
            DVector::from_vec(vec![2.0]),
        )
        .unwrap();
        (state, dmatrix![0.0, 1.0; 0.0, 0.0], dmatrix![1.0, 0.0])
    }

    #[test]
    fn constraint_survives_updates() {
        let (mut state, a, h) = double_integrator();
        for k in 0..200 {
            let obs = LinearObservation {
                h: h.clone(),
                y: DVector::from_vec(vec![(k as f64 * 0.37).sin() * 3.0]),
                noise: dmatrix![0.5],
            };
            state = linear_kf_step(&state, &a, 0.1, Some(&obs)).unwrap();
            assert!(state.constraint_residual().norm() < 1e-10);
            assert!(state.constrained_covariance().norm() < 1e-10);
        }
    }

    #[test]
    fn huge_noise_leaves_mean() {
        let (state, a, h) = double_integrator();
        let prop = linear_kf_step(&state, &a, 0.1, None).unwrap();
        let obs = LinearObservation {
            h,
            y: DVector::from_vec(vec![100.0]),
            noise: dmatrix![1e12],
        };
        let upd = linear_kf_step(&state, &a, 0.1, Some(&obs)).unwrap();
        assert!((&upd.mean - &prop.mean).norm() <= 1e-6 * prop.mean.norm());
    }

    #[test]
    fn scalar_update_matches_hand_gain() {
        let (p, r, x, y) = (2.0, 3.0, 1.0, 4.0);
        let state = LinearKfState::new(
            DVector::from_vec(vec![x]),
            dmatrix![p],
            DMatrix::zeros(0, 1),
            DVector::zeros(0),
        )
        .unwrap();
        let obs = LinearObservation {
            h: dmatrix![1.0],
            y: DVector::from_vec(vec![y]),
            noise: dmatrix![r],
        };
        let out = linear_kf_step(&state, &dmatrix![0.0], 1.0, Some(&obs)).unwrap();
        let k = p / (p + r);
        assert_relative_eq!(out.mean[0], x + k * (y - x), epsilon = 1e-15);
        assert_relative_eq!(out.cov[(0, 0)], (1.0 - k) * p, epsilon = 1e-15);
    }

    #[test]
    fn singular_innovation_is_reported() {
        let state = LinearKfState::new(
            DVector::from_vec(vec![0.0]),
            dmatrix![0.0],
            DMatrix::zeros(0, 1),
            DVector::zeros(0),
        )
        .unwrap();
        let obs = LinearObservation {
            h: dmatrix![1.0],
            y: DVector::from_vec(vec![1.0]),
            noise: dmatrix![0.0],
        };
        assert_eq!(
            linear_kf_step(&state, &dmatrix![0.0], 1.0, Some(&obs)),
            Err(FilterError::SingularInnovation)
        );
    }

    #[test]
    fn dimension_errors() {
        assert!(matches!(
            LinearKfState::new(
                DVector::zeros(2),
                DMatrix::zeros(3, 3),
                DMatrix::zeros(0, 2),
                DVector::zeros(0)
            ),
            Err(FilterError::Dimension(_))
        ));
        let (state, _, _) = double_integrator();
        assert!(matches!(
            linear_kf_step(&state, &DMatrix::zeros(3, 3), 0.1, None),
            Err(FilterError::Dimension(_))
        ));
    }
}
