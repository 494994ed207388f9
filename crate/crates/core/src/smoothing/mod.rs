//! Gauss-Newton MAP smoothing of car trajectories on SE(2).
//!
//! Four parametrizations of the same estimation problem are available. They
//! differ in how a state is perturbed, how each factor's residual is written
//! and therefore in the Jacobians handed to the linear solver:
//!
//! | parametrization | perturbation of `(theta, x)`            |
//! |-----------------|-----------------------------------------|
//! | `Invariant`     | `chi * exp(xi)`                         |
//! | `Linear`        | `(theta + d_theta, x + d_x)`            |
//! | `Grisetti`      | `(theta + d_theta, x + d_x)`            |
//! | `Forster`       | `(theta + d_theta, x + R(theta) d_x)`   |
//!
//! All tangent vectors are ordered angle first.

mod linearize;
mod problem;
mod solver;
mod window;

use thiserror::Error;

use crate::se2::{wrap_angle, Se2, Tangent3};

pub use linearize::{
    build_linearization, evaluate_factor, finite_difference_gap, total_cost, FactorBlock, FactorId,
    LinearizedSystem,
};
pub use problem::{FactorGraphProblem, ObservationFactor, Prior, PropagationFactor};
pub use solver::{gn_solve, plateau_iteration, GnOptions, GnResult, IterationRecord};
pub use window::{sliding_window_run, SmootherTrace, WindowOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmoothingError {
    #[error("window has {expected} states but {got} estimates were given")]
    WindowMismatch { expected: usize, got: usize },
    #[error("normal equations are singular at iteration {iteration}")]
    SingularNormalEquations { iteration: usize },
    #[error("invalid problem: {0}")]
    BadProblem(String),
    #[error("step {step} (t = {time}): {source}")]
    AtStep {
        step: usize,
        time: f64,
        #[source]
        source: Box<SmoothingError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parametrization {
    Invariant,
    Linear,
    Grisetti,
    Forster,
}

impl Parametrization {
    pub const ALL: [Parametrization; 4] = [
        Parametrization::Invariant,
        Parametrization::Linear,
        Parametrization::Grisetti,
        Parametrization::Forster,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Parametrization::Invariant => "invariant",
            Parametrization::Linear => "linear",
            Parametrization::Grisetti => "grisetti",
            Parametrization::Forster => "forster",
        }
    }

    /// Applies a perturbation to a state.
    pub fn retract(self, state: &Se2, delta: &Tangent3) -> Se2 {
        match self {
            Parametrization::Invariant => state.retract(delta),
            Parametrization::Linear | Parametrization::Grisetti => {
                Se2::from_parts(state.heading() + delta.theta, state.pos + delta.x)
            }
            Parametrization::Forster => Se2::from_parts(
                state.heading() + delta.theta,
                state.pos + state.rot.rotate(&delta.x),
            ),
        }
    }

    /// Inverse of [`Parametrization::retract`]: the perturbation taking
    /// `anchor` to `state`, with headings wrapped for the additive forms.
    pub fn local(self, anchor: &Se2, state: &Se2) -> Tangent3 {
        match self {
            Parametrization::Invariant => anchor.between(state),
            Parametrization::Linear | Parametrization::Grisetti => Tangent3 {
                theta: wrap_angle(state.heading() - anchor.heading()),
                x: state.pos - anchor.pos,
            },
            Parametrization::Forster => Tangent3 {
                theta: wrap_angle(state.heading() - anchor.heading()),
                x: anchor.rot.inverse().rotate(&(state.pos - anchor.pos)),
            },
        }
    }
}

impl std::fmt::Display for Parametrization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Parametrization {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Parametrization::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown parametrization `{s}`"))
    }
}

/// How the invariant propagation factor is linearized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JacobianMode {
    /// `-Ad(U^-1)` and `I`: first order in both the perturbation and the
    /// residual, independent of the estimate.
    #[default]
    FirstOrder,
    /// Includes the inverse SE(2) Jacobians of the residual.
    Exact,
}

/// Options shared by linearization and the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinearizationOptions {
    pub mode: JacobianMode,
    /// Replace the prior Jacobian of the invariant form by the identity.
    pub approx_identity_prior: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn local_inverts_retract() {
        let anchor = Se2::new(2.9, 1.0, -3.0);
        let delta = Tangent3::new(0.4, -0.2, 0.7);
        for p in Parametrization::ALL {
            let moved = p.retract(&anchor, &delta);
            let back = p.local(&anchor, &moved);
            assert_relative_eq!(back.to_vector(), delta.to_vector(), epsilon = 1e-12);
        }
    }

    #[test]
    fn names_round_trip() {
        for p in Parametrization::ALL {
            assert_eq!(p.name().parse::<Parametrization>().unwrap(), p);
        }
        assert!("lie".parse::<Parametrization>().is_err());
    }
}
