//! The special Euclidean group SE(2).
//!
//! Elements are planar rigid motions `(R(theta), x)` with the homogeneous matrix
//! form `[[R, x], [0, 1]]`. Tangent vectors are always ordered angle first,
//! `(theta, x1, x2)`, and every 3x3 matrix acting on tangent vectors in this crate
//! (adjoints, Jacobians, covariances) uses that ordering.

use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use thiserror::Error;

/// Below this angle the trigonometric ratios switch to their Taylor series.
pub const SMALL_ANGLE: f64 = 1e-4;

/// Distance to +-pi under which `log` refuses to pick a branch.
pub const ANTIPODAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LieError {
    #[error("heading {theta} is antipodal (|theta| = pi), logarithm branch is ambiguous")]
    AntipodalHeading { theta: f64 },
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// The 90 degree rotation generator `[[0, -1], [1, 0]]`.
pub fn j_matrix() -> Matrix2<f64> {
    Matrix2::new(0.0, -1.0, 1.0, 0.0)
}

fn rotation_matrix(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// `sin(t)/t` and `(1 - cos(t))/t`, continuous at zero.
fn sinc_pair(theta: f64) -> (f64, f64) {
    if theta.abs() < SMALL_ANGLE {
        let t2 = theta * theta;
        (
            1.0 - t2 / 6.0 + t2 * t2 / 120.0,
            theta * (0.5 - t2 / 24.0 + t2 * t2 / 720.0),
        )
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta)
    }
}

/// `(1 - cos(t))/t^2` and `(t - sin(t))/t^2`, continuous at zero.
fn second_order_pair(theta: f64) -> (f64, f64) {
    if theta.abs() < SMALL_ANGLE {
        let t2 = theta * theta;
        (
            0.5 - t2 / 24.0 + t2 * t2 / 720.0,
            theta * (1.0 / 6.0 - t2 / 120.0),
        )
    } else {
        let t2 = theta * theta;
        ((1.0 - theta.cos()) / t2, (theta - theta.sin()) / t2)
    }
}

/// The translation block of the exponential,
/// `B(t) = (sin(t) I + (1 - cos(t)) J) / t`.
pub fn b_matrix(theta: f64) -> Matrix2<f64> {
    let (a, b) = sinc_pair(theta);
    Matrix2::new(a, -b, b, a)
}

/// Closed-form inverse of [`b_matrix`]: `(t/2) (cot(t/2) I - J)`.
pub fn b_matrix_inverse(theta: f64) -> Matrix2<f64> {
    let half = 0.5 * theta;
    let diag = if theta.abs() < SMALL_ANGLE {
        let t2 = theta * theta;
        1.0 - t2 / 12.0 - t2 * t2 / 720.0
    } else {
        half / half.tan()
    };
    Matrix2::new(diag, half, -half, diag)
}

fn w_matrix(theta: f64) -> Matrix2<f64> {
    let (a, b) = second_order_pair(theta);
    Matrix2::new(a, -b, b, a)
}

/// Planar rotation stored by its (unwrapped) angle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rotation2 {
    pub theta: f64,
}

impl Rotation2 {
    pub fn new(theta: f64) -> Self {
        Self { theta }
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        rotation_matrix(self.theta)
    }

    /// Angle in `(-pi, pi]`.
    pub fn canonical(&self) -> f64 {
        wrap_angle(self.theta)
    }

    pub fn inverse(&self) -> Self {
        Self::new(-self.theta)
    }

    pub fn rotate(&self, v: &Vector2<f64>) -> Vector2<f64> {
        self.matrix() * v
    }
}

impl Mul for Rotation2 {
    type Output = Rotation2;

    /// Rotations compose by adding their angles.
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: Rotation2) -> Rotation2 {
        Rotation2::new(self.theta + rhs.theta)
    }
}

/// Lie algebra coordinates, angle first.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Tangent3 {
    pub theta: f64,
    pub x: Vector2<f64>,
}

impl Tangent3 {
    pub fn new(theta: f64, x1: f64, x2: f64) -> Self {
        Self {
            theta,
            x: Vector2::new(x1, x2),
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.theta, self.x[0], self.x[1])
    }

    /// The 3x3 Lie algebra matrix `[[theta J, x], [0, 0]]`.
    pub fn wedge(&self) -> Matrix3<f64> {
        Matrix3::new(
            0.0,
            -self.theta,
            self.x[0], //
            self.theta,
            0.0,
            self.x[1], //
            0.0,
            0.0,
            0.0,
        )
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }
}

/// Small adjoint `ad_xi`, so that `[xi^, eta^] = (ad_xi eta)^`.
pub fn ad(xi: &Tangent3) -> Matrix3<f64> {
    let jr = j_matrix() * xi.x;
    Matrix3::new(
        0.0, 0.0, 0.0, //
        -jr[0], 0.0, -xi.theta, //
        -jr[1], xi.theta, 0.0,
    )
}

/// Right Jacobian: `exp(xi + d) ~ exp(xi) exp(J_r(xi) d)`.
pub fn right_jacobian(xi: &Tangent3) -> Matrix3<f64> {
    let col = w_matrix(-xi.theta) * j_matrix() * xi.x;
    let b = b_matrix(-xi.theta);
    Matrix3::new(
        1.0,
        0.0,
        0.0, //
        col[0],
        b[(0, 0)],
        b[(0, 1)], //
        col[1],
        b[(1, 0)],
        b[(1, 1)],
    )
}

/// Left Jacobian: `exp(xi + d) ~ exp(J_l(xi) d) exp(xi)`.
pub fn left_jacobian(xi: &Tangent3) -> Matrix3<f64> {
    right_jacobian(&Tangent3 {
        theta: -xi.theta,
        x: -xi.x,
    })
}

fn block_lower_inverse(m: &Matrix3<f64>, theta_block: f64) -> Matrix3<f64> {
    // m = [[1, 0], [c, B(theta_block)]]  =>  inverse = [[1, 0], [-B^-1 c, B^-1]]
    let binv = b_matrix_inverse(theta_block);
    let c = Vector2::new(m[(1, 0)], m[(2, 0)]);
    let lower = -(binv * c);
    Matrix3::new(
        1.0,
        0.0,
        0.0, //
        lower[0],
        binv[(0, 0)],
        binv[(0, 1)], //
        lower[1],
        binv[(1, 0)],
        binv[(1, 1)],
    )
}

/// `log(exp(xi) exp(d)) ~ xi + J_r^{-1}(xi) d`.
pub fn right_jacobian_inverse(xi: &Tangent3) -> Matrix3<f64> {
    block_lower_inverse(&right_jacobian(xi), -xi.theta)
}

/// `log(exp(d) exp(xi)) ~ xi + J_l^{-1}(xi) d`.
pub fn left_jacobian_inverse(xi: &Tangent3) -> Matrix3<f64> {
    block_lower_inverse(&left_jacobian(xi), xi.theta)
}

/// A rigid motion of the plane: heading plus position.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Se2 {
    pub rot: Rotation2,
    pub pos: Vector2<f64>,
}

impl Se2 {
    pub fn new(theta: f64, x1: f64, x2: f64) -> Self {
        Self {
            rot: Rotation2::new(theta),
            pos: Vector2::new(x1, x2),
        }
    }

    pub fn from_parts(theta: f64, pos: Vector2<f64>) -> Self {
        Self {
            rot: Rotation2::new(theta),
            pos,
        }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn heading(&self) -> f64 {
        self.rot.theta
    }

    pub fn rotation_matrix(&self) -> Matrix2<f64> {
        self.rot.matrix()
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        let r = self.rot.matrix();
        Matrix3::new(
            r[(0, 0)],
            r[(0, 1)],
            self.pos[0], //
            r[(1, 0)],
            r[(1, 1)],
            self.pos[1], //
            0.0,
            0.0,
            1.0,
        )
    }

    pub fn compose(&self, other: &Se2) -> Se2 {
        Se2 {
            rot: self.rot * other.rot,
            pos: self.pos + self.rot.rotate(&other.pos),
        }
    }

    pub fn inverse(&self) -> Se2 {
        let rinv = self.rot.inverse();
        Se2 {
            rot: rinv,
            pos: -rinv.rotate(&self.pos),
        }
    }

    /// Image of a point: `R p + x`.
    pub fn act(&self, point: &Vector2<f64>) -> Vector2<f64> {
        self.rot.rotate(point) + self.pos
    }

    pub fn exp(xi: &Tangent3) -> Se2 {
        Se2 {
            rot: Rotation2::new(xi.theta),
            pos: b_matrix(xi.theta) * xi.x,
        }
    }

    /// Logarithm with the heading taken in `(-pi, pi)`.
    ///
    /// Fails when the heading sits at +-pi, where the sign of the angle is not
    /// determined by the element.
    pub fn log(&self) -> Result<Tangent3, LieError> {
        let theta = self.rot.canonical();
        if (theta.abs() - PI).abs() < ANTIPODAL_TOLERANCE {
            return Err(LieError::AntipodalHeading { theta });
        }
        Ok(self.log_principal())
    }

    /// Total version of [`Se2::log`]; at the antipode it returns `theta = +pi`.
    pub fn log_principal(&self) -> Tangent3 {
        let theta = self.rot.canonical();
        Tangent3 {
            theta,
            x: b_matrix_inverse(theta) * self.pos,
        }
    }

    /// `Ad_g` in angle-first coordinates: `g exp(u) g^-1 = exp(Ad_g u)`.
    pub fn adjoint(&self) -> Matrix3<f64> {
        let r = self.rot.matrix();
        let c = -(j_matrix() * self.pos);
        Matrix3::new(
            1.0,
            0.0,
            0.0, //
            c[0],
            r[(0, 0)],
            r[(0, 1)], //
            c[1],
            r[(1, 0)],
            r[(1, 1)],
        )
    }

    /// `self * exp(xi)`.
    pub fn retract(&self, xi: &Tangent3) -> Se2 {
        self.compose(&Se2::exp(xi))
    }

    /// `log(self^-1 other)`, the left-invariant discrepancy.
    pub fn between(&self, other: &Se2) -> Tangent3 {
        self.inverse().compose(other).log_principal()
    }
}

impl Mul for Se2 {
    type Output = Se2;

    fn mul(self, rhs: Se2) -> Se2 {
        self.compose(&rhs)
    }
}

impl Mul<&Se2> for &Se2 {
    type Output = Se2;

    fn mul(self, rhs: &Se2) -> Se2 {
        self.compose(rhs)
    }
}
