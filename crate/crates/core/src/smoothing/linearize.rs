use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2, Vector3};

use crate::se2::Tangent3;

use super::problem::inverse_sqrt;
use super::{
    FactorGraphProblem, JacobianMode, LinearizationOptions, Parametrization, SmoothingError,
};
use crate::se2::{
    j_matrix, left_jacobian_inverse, right_jacobian_inverse, wrap_angle, Rotation2, Se2,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FactorId {
    Prior,
    Propagation(usize),
    Observation(usize),
}

/// One factor linearized at a point: `r(x + d) ~ r + sum_j J_j d_j`, with
/// cost `|W r|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorBlock {
    pub id: FactorId,
    pub residual: DVector<f64>,
    pub sqrt_info: DMatrix<f64>,
    pub jacobians: Vec<(usize, DMatrix<f64>)>,
}

impl FactorBlock {
    pub fn cost(&self) -> f64 {
        (&self.sqrt_info * &self.residual).norm_squared()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedSystem {
    pub n_states: usize,
    pub blocks: Vec<FactorBlock>,
}

impl LinearizedSystem {
    pub fn cost(&self) -> f64 {
        self.blocks.iter().map(FactorBlock::cost).sum()
    }

    /// Stacked whitened Jacobian `A` and residual `b`; the step minimises
    /// `|b + A d|^2`.
    pub fn whitened(&self) -> (DMatrix<f64>, DVector<f64>) {
        let rows: usize = self.blocks.iter().map(|b| b.residual.len()).sum();
        let mut a = DMatrix::zeros(rows, 3 * self.n_states);
        let mut b = DVector::zeros(rows);
        let mut row = 0;
        for block in &self.blocks {
            let m = block.residual.len();
            b.rows_mut(row, m)
                .copy_from(&(&block.sqrt_info * &block.residual));
            for (idx, jac) in &block.jacobians {
                let w = &block.sqrt_info * jac;
                let mut dst = a.view_mut((row, 3 * idx), (m, 3));
                dst += w;
            }
            row += m;
        }
        (a, b)
    }

    /// `A^T A`.
    pub fn information(&self) -> DMatrix<f64> {
        let (a, _) = self.whitened();
        a.transpose() * a
    }
}

fn dvec2(v: Vector2<f64>) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

fn dvec3(v: Vector3<f64>) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

fn dmat<const R: usize, const C: usize>(m: &nalgebra::SMatrix<f64, R, C>) -> DMatrix<f64> {
    DMatrix::from_column_slice(R, C, m.as_slice())
}

/// `[[a, 0], [col, B]]` in angle-first layout.
fn block3(a: f64, col: Vector2<f64>, b: Matrix2<f64>) -> Matrix3<f64> {
    let mut m = Matrix3::zeros();
    m[(0, 0)] = a;
    m.fixed_view_mut::<2, 1>(1, 0).copy_from(&col);
    m.fixed_view_mut::<2, 2>(1, 1).copy_from(&b);
    m
}

/// `[0, B]`, the Jacobian of a position fix.
fn position_row(b: Matrix2<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2, 3);
    m.view_mut((0, 1), (2, 2)).copy_from(&b);
    m
}

/// Evaluates one factor at `states`. The invariant position fix is expressed
/// in the body frame of `frame`, which is the linearization point.
pub fn evaluate_factor(
    problem: &FactorGraphProblem,
    states: &[Se2],
    frame: &[Se2],
    param: Parametrization,
    opts: &LinearizationOptions,
    id: FactorId,
) -> FactorBlock {
    match id {
        FactorId::Prior => {
            let prior = &problem.prior;
            let chi = &states[0];
            let r = param.local(&prior.mean, chi);
            let jac = match param {
                Parametrization::Invariant if opts.approx_identity_prior => Matrix3::identity(),
                Parametrization::Invariant => right_jacobian_inverse(&r),
                Parametrization::Linear | Parametrization::Grisetti => Matrix3::identity(),
                Parametrization::Forster => block3(
                    1.0,
                    Vector2::zeros(),
                    prior.mean.rotation_matrix().transpose() * chi.rotation_matrix(),
                ),
            };
            FactorBlock {
                id,
                residual: dvec3(r.to_vector()),
                sqrt_info: dmat(&prior.sqrt_info),
                jacobians: vec![(0, dmat(&jac))],
            }
        }
        FactorId::Propagation(i) => {
            let f = &problem.propagation[i];
            let (a, b) = (&states[i], &states[i + 1]);
            let omega = f.increment.heading();
            let shift = f.increment.pos;
            let ra = a.rotation_matrix();
            let dx = b.pos - a.pos;
            let jm = j_matrix();
            let (r, ja, jb) = match param {
                Parametrization::Invariant => {
                    let u_inv = f.increment.inverse();
                    let r = u_inv.compose(&a.inverse()).compose(b).log_principal();
                    let ad = u_inv.adjoint();
                    let (ja, jb) = match opts.mode {
                        JacobianMode::FirstOrder => (-ad, Matrix3::identity()),
                        JacobianMode::Exact => {
                            (-left_jacobian_inverse(&r) * ad, right_jacobian_inverse(&r))
                        }
                    };
                    (r.to_vector(), ja, jb)
                }
                Parametrization::Linear => {
                    let r = Vector3::new(
                        wrap_angle(b.heading() - a.heading() - omega),
                        dx[0] - (ra * shift)[0],
                        dx[1] - (ra * shift)[1],
                    );
                    let ja = block3(-1.0, -(ra * jm * shift), -Matrix2::identity());
                    (r, ja, Matrix3::identity())
                }
                Parametrization::Grisetti => {
                    let rw_t = Rotation2::new(omega).matrix().transpose();
                    let body = ra.transpose() * dx;
                    let e = rw_t * (body - shift);
                    let r = Vector3::new(wrap_angle(b.heading() - a.heading() - omega), e[0], e[1]);
                    let ja = block3(-1.0, -(rw_t * jm * body), -(rw_t * ra.transpose()));
                    let jb = block3(1.0, Vector2::zeros(), rw_t * ra.transpose());
                    (r, ja, jb)
                }
                Parametrization::Forster => {
                    let body = ra.transpose() * dx;
                    let e = shift - body;
                    let r =
                        Vector3::new(wrap_angle(omega - (b.heading() - a.heading())), e[0], e[1]);
                    let ja = block3(1.0, jm * body, Matrix2::identity());
                    let jb = block3(
                        -1.0,
                        Vector2::zeros(),
                        -(ra.transpose() * b.rotation_matrix()),
                    );
                    (r, ja, jb)
                }
            };
            FactorBlock {
                id,
                residual: dvec3(r),
                sqrt_info: dmat(&f.sqrt_info),
                jacobians: vec![(i, dmat(&ja)), (i + 1, dmat(&jb))],
            }
        }
        FactorId::Observation(k) => {
            let o = &problem.observations[k];
            let chi = &states[o.index];
            let (r, jac, cov) = match param {
                Parametrization::Invariant => {
                    let rf_t = frame[o.index].rotation_matrix().transpose();
                    (
                        rf_t * (chi.pos - o.y),
                        rf_t * chi.rotation_matrix(),
                        rf_t * o.cov * rf_t.transpose(),
                    )
                }
                Parametrization::Linear | Parametrization::Grisetti => {
                    (chi.pos - o.y, Matrix2::identity(), o.cov)
                }
                Parametrization::Forster => (chi.pos - o.y, chi.rotation_matrix(), o.cov),
            };
            // Validated when the problem was built.
            let w = inverse_sqrt(&cov).expect("fix covariance is positive definite");
            FactorBlock {
                id,
                residual: dvec2(r),
                sqrt_info: dmat(&w),
                jacobians: vec![(o.index, position_row(jac))],
            }
        }
    }
}

fn factor_ids(problem: &FactorGraphProblem) -> impl Iterator<Item = FactorId> + '_ {
    std::iter::once(FactorId::Prior)
        .chain((0..problem.propagation.len()).map(FactorId::Propagation))
        .chain((0..problem.observations.len()).map(FactorId::Observation))
}

fn check_window(problem: &FactorGraphProblem, states: &[Se2]) -> Result<(), SmoothingError> {
    if states.len() != problem.n_states() {
        return Err(SmoothingError::WindowMismatch {
            expected: problem.n_states(),
            got: states.len(),
        });
    }
    Ok(())
}

/// Linearizes every factor of `problem` at `states`.
pub fn build_linearization(
    problem: &FactorGraphProblem,
    states: &[Se2],
    param: Parametrization,
    opts: &LinearizationOptions,
) -> Result<LinearizedSystem, SmoothingError> {
    check_window(problem, states)?;
    let blocks = factor_ids(problem)
        .map(|id| evaluate_factor(problem, states, states, param, opts, id))
        .collect();
    Ok(LinearizedSystem {
        n_states: states.len(),
        blocks,
    })
}

/// Nonlinear cost of `states` under the residuals of `param`.
pub fn total_cost(
    problem: &FactorGraphProblem,
    states: &[Se2],
    param: Parametrization,
    opts: &LinearizationOptions,
) -> Result<f64, SmoothingError> {
    check_window(problem, states)?;
    Ok(factor_ids(problem)
        .map(|id| evaluate_factor(problem, states, states, param, opts, id).cost())
        .sum())
}

/// Largest entry of the gap between the analytic Jacobians of every factor and
/// central differences of the residuals under the parametrization's own
/// retraction, taken at `states`.
pub fn finite_difference_gap(
    problem: &FactorGraphProblem,
    states: &[Se2],
    param: Parametrization,
    opts: &LinearizationOptions,
) -> Result<f64, SmoothingError> {
    check_window(problem, states)?;
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for id in factor_ids(problem) {
        let block = evaluate_factor(problem, states, states, param, opts, id);
        for (idx, jac) in &block.jacobians {
            let mut fd = DMatrix::zeros(block.residual.len(), 3);
            for c in 0..3 {
                let mut d = Vector3::zeros();
                d[c] = h;
                let mut plus = states.to_vec();
                plus[*idx] = param.retract(&states[*idx], &Tangent3::from_vector(&d));
                let mut minus = states.to_vec();
                minus[*idx] = param.retract(&states[*idx], &Tangent3::from_vector(&-d));
                let rp = evaluate_factor(problem, &plus, states, param, opts, id).residual;
                let rm = evaluate_factor(problem, &minus, states, param, opts, id).residual;
                fd.set_column(c, &((rp - rm) / (2.0 * h)));
            }
            worst = worst.max((&fd - jac).abs().max());
        }
    }
    Ok(worst)
}
