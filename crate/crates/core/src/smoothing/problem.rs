use nalgebra::{Matrix2, Matrix3, Vector2};

use super::SmoothingError;
use crate::filters::iekf::step_increment;
use crate::se2::Se2;
use crate::sim::{Integrator, Trajectory};

/// Gaussian prior on the first state, stored as a square-root information
/// matrix `W` with `W^T W = P^-1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prior {
    pub mean: Se2,
    pub sqrt_info: Matrix3<f64>,
}

impl Prior {
    pub fn from_covariance(mean: Se2, cov: &Matrix3<f64>) -> Result<Self, SmoothingError> {
        Ok(Self {
            mean,
            sqrt_info: inverse_sqrt(cov).ok_or_else(|| {
                SmoothingError::BadProblem("prior covariance is not positive definite".into())
            })?,
        })
    }

    pub fn from_information(mean: Se2, info: &Matrix3<f64>) -> Self {
        let eig = ((info + info.transpose()) * 0.5).symmetric_eigen();
        let d = Matrix3::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
        Self {
            mean,
            sqrt_info: d * eig.eigenvectors.transpose(),
        }
    }

    pub fn information(&self) -> Matrix3<f64> {
        self.sqrt_info.transpose() * self.sqrt_info
    }
}

/// `W` with `W^T W = cov^-1`, or `None` when `cov` is not positive definite.
pub(crate) fn inverse_sqrt<const D: usize>(
    cov: &nalgebra::SMatrix<f64, D, D>,
) -> Option<nalgebra::SMatrix<f64, D, D>> {
    let sym = (cov + cov.transpose()) * 0.5;
    let chol = sym.cholesky()?;
    chol.l().try_inverse()
}

/// Motion between consecutive states, `chi_{i+1} = chi_i * U * exp(w)`,
/// `w ~ N(0, Q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationFactor {
    pub increment: Se2,
    pub sqrt_info: Matrix3<f64>,
}

impl PropagationFactor {
    pub fn new(increment: Se2, cov: &Matrix3<f64>) -> Result<Self, SmoothingError> {
        Ok(Self {
            increment,
            sqrt_info: inverse_sqrt(cov).ok_or_else(|| {
                SmoothingError::BadProblem("odometry covariance is not positive definite".into())
            })?,
        })
    }
}

/// Position fix `y = x_index + v`, `v ~ N(0, cov)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationFactor {
    pub index: usize,
    pub y: Vector2<f64>,
    pub cov: Matrix2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorGraphProblem {
    pub prior: Prior,
    pub propagation: Vec<PropagationFactor>,
    pub observations: Vec<ObservationFactor>,
}

impl FactorGraphProblem {
    pub fn new(
        prior: Prior,
        propagation: Vec<PropagationFactor>,
        observations: Vec<ObservationFactor>,
    ) -> Result<Self, SmoothingError> {
        let problem = Self {
            prior,
            propagation,
            observations,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn n_states(&self) -> usize {
        self.propagation.len() + 1
    }

    pub fn validate(&self) -> Result<(), SmoothingError> {
        let n = self.n_states();
        for o in &self.observations {
            if o.index >= n {
                return Err(SmoothingError::BadProblem(format!(
                    "observation of state {} outside a window of {n}",
                    o.index
                )));
            }
            if inverse_sqrt(&o.cov).is_none() {
                return Err(SmoothingError::BadProblem(format!(
                    "fix covariance of state {} is not positive definite",
                    o.index
                )));
            }
        }
        Ok(())
    }

    /// Builds the full-trajectory problem. `step_cov` is the covariance of the
    /// per-step increment noise.
    pub fn from_trajectory(
        traj: &Trajectory,
        integrator: Integrator,
        prior: Prior,
        step_cov: &Matrix3<f64>,
    ) -> Result<Self, SmoothingError> {
        let propagation = traj
            .inputs
            .iter()
            .map(|i| {
                PropagationFactor::new(step_increment(i.omega, i.u, traj.dt, integrator), step_cov)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let observations = traj
            .measurements
            .iter()
            .map(|m| ObservationFactor {
                index: m.step,
                y: m.y,
                cov: m.cov,
            })
            .collect();
        Self::new(prior, propagation, observations)
    }

    /// Integrates the increments from the prior mean.
    pub fn dead_reckoning(&self) -> Vec<Se2> {
        let mut out = Vec::with_capacity(self.n_states());
        let mut chi = self.prior.mean;
        out.push(chi);
        for f in &self.propagation {
            chi = chi * f.increment;
            out.push(chi);
        }
        out
    }

    /// Moves prior and fixes by `gamma`; increments are body-frame and stay.
    pub fn left_transform(&self, gamma: &Se2) -> Self {
        let rot = gamma.rotation_matrix();
        let mut out = self.clone();
        out.prior.mean = gamma.compose(&self.prior.mean);
        for o in &mut out.observations {
            o.y = gamma.act(&o.y);
            o.cov = rot * o.cov * rot.transpose();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    #[test]
    fn square_root_information_round_trips() {
        let cov = Matrix3::new(2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 0.5);
        let prior = Prior::from_covariance(Se2::identity(), &cov).unwrap();
        assert_relative_eq!(
            prior.information(),
            cov.try_inverse().unwrap(),
            epsilon = 1e-12
        );
        let again = Prior::from_information(Se2::identity(), &prior.information());
        assert_relative_eq!(again.information(), prior.information(), epsilon = 1e-12);
        let flat = Matrix3::from_diagonal(&Vector3::new(1.0, 0.0, 1.0));
        assert!(Prior::from_covariance(Se2::identity(), &flat).is_err());
    }

    #[test]
    fn rejects_out_of_window_fix() {
        let prior = Prior::from_covariance(Se2::identity(), &Matrix3::identity()).unwrap();
        let obs = ObservationFactor {
            index: 1,
            y: Vector2::zeros(),
            cov: Matrix2::identity(),
        };
        assert!(matches!(
            FactorGraphProblem::new(prior, vec![], vec![obs]),
            Err(SmoothingError::BadProblem(_))
        ));
    }

    #[test]
    fn dead_reckoning_chains_increments() {
        let prior = Prior::from_covariance(Se2::new(0.5, 1.0, 2.0), &Matrix3::identity()).unwrap();
        let inc = Se2::new(0.1, 0.7, 0.0);
        let f = PropagationFactor::new(inc, &Matrix3::identity()).unwrap();
        let p = FactorGraphProblem::new(prior, vec![f; 3], vec![]).unwrap();
        let states = p.dead_reckoning();
        assert_eq!(states.len(), 4);
        assert_relative_eq!(
            states[3].matrix(),
            (prior.mean * inc * inc * inc).matrix(),
            epsilon = 1e-14
        );
    }
}
