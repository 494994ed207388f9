use std::io::{self, Write};

use nalgebra::{DMatrix, Matrix3, Vector3};

use super::linearize::{build_linearization, evaluate_factor, FactorId};
use super::problem::{FactorGraphProblem, ObservationFactor, Prior, PropagationFactor};
use super::solver::{gn_solve, marginal_covariance, solve_step, GnOptions};
use super::{LinearizationOptions, Parametrization, SmoothingError};
use crate::filters::{write_trace_csv, TraceRecord};
use crate::se2::{wrap_angle, Rotation2, Se2, Tangent3};
use crate::sim::{Integrator, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowOptions {
    /// Number of states kept in the window, at least 2.
    pub window_size: usize,
    pub param: Parametrization,
    pub gn_iters_per_step: usize,
    pub tol: f64,
    pub prior_mean: Se2,
    pub prior_cov: Matrix3<f64>,
    /// Covariance of the per-step increment noise.
    pub step_cov: Matrix3<f64>,
    pub integrator: Integrator,
    pub linearization: LinearizationOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmootherTrace {
    pub param: Parametrization,
    /// Estimate of the newest state after each arrival.
    pub records: Vec<TraceRecord>,
    /// Steps of the states left in the final window.
    pub final_steps: std::ops::RangeInclusive<usize>,
    pub final_window: Vec<Se2>,
}

impl SmootherTrace {
    /// Root mean square of the wrapped heading errors.
    pub fn heading_rmse(&self) -> f64 {
        rms(self.records.iter().map(|r| wrap_angle(r.heading_error)))
    }

    pub fn position_rmse(&self) -> f64 {
        rms(self.records.iter().map(|r| r.position_error))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        write_trace_csv(&self.records, w)
    }
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Replaces the oldest state of the window by a Gaussian prior on the next
/// one, obtained by the Schur complement of the factors touching it.
fn marginalize_oldest(
    problem: &FactorGraphProblem,
    states: &[Se2],
    param: Parametrization,
    lin: &LinearizationOptions,
) -> Option<Prior> {
    let mut ids = vec![FactorId::Prior, FactorId::Propagation(0)];
    ids.extend(
        problem
            .observations
            .iter()
            .enumerate()
            .filter(|(_, o)| o.index == 0)
            .map(|(k, _)| FactorId::Observation(k)),
    );
    let blocks: Vec<_> = ids
        .into_iter()
        .map(|id| evaluate_factor(problem, states, states, param, lin, id))
        .collect();
    let rows: usize = blocks.iter().map(|b| b.residual.len()).sum();
    let mut a = DMatrix::zeros(rows, 6);
    let mut b = nalgebra::DVector::zeros(rows);
    let mut row = 0;
    for block in &blocks {
        let m = block.residual.len();
        b.rows_mut(row, m)
            .copy_from(&(&block.sqrt_info * &block.residual));
        for (idx, jac) in &block.jacobians {
            let mut dst = a.view_mut((row, 3 * idx), (m, 3));
            dst += &block.sqrt_info * jac;
        }
        row += m;
    }
    let info = a.transpose() * &a;
    let eta = -(a.transpose() * b);
    let l_oo: Matrix3<f64> = info.fixed_view::<3, 3>(0, 0).into_owned();
    let l_on: Matrix3<f64> = info.fixed_view::<3, 3>(0, 3).into_owned();
    let l_nn: Matrix3<f64> = info.fixed_view::<3, 3>(3, 3).into_owned();
    let e_o: Vector3<f64> = eta.fixed_rows::<3>(0).into_owned();
    let e_n: Vector3<f64> = eta.fixed_rows::<3>(3).into_owned();
    let l_oo_inv = l_oo.try_inverse()?;
    let marg = l_nn - l_on.transpose() * l_oo_inv * l_on;
    let marg = (marg + marg.transpose()) * 0.5;
    let rhs = e_n - l_on.transpose() * l_oo_inv * e_o;
    let mean_offset = marg.try_inverse()? * rhs;
    let anchor = param.retract(&states[1], &Tangent3::from_vector(&mean_offset));
    Some(Prior::from_information(anchor, &marg))
}

/// Fixed-lag smoothing along a trajectory: each new state is appended, the
/// oldest is marginalized once the window is full, and a few Gauss-Newton
/// iterations are run on the window.
pub fn sliding_window_run(
    traj: &Trajectory,
    opts: &WindowOptions,
) -> Result<SmootherTrace, SmoothingError> {
    if opts.window_size < 2 {
        return Err(SmoothingError::BadProblem(
            "window size must be at least 2".into(),
        ));
    }
    if opts.gn_iters_per_step == 0 {
        return Err(SmoothingError::BadProblem(
            "at least one iteration per step is required".into(),
        ));
    }
    let step_factor = |k: usize| {
        let i = &traj.inputs[k];
        PropagationFactor::new(
            crate::filters::iekf::step_increment(i.omega, i.u, traj.dt, opts.integrator),
            &opts.step_cov,
        )
    };
    let gn = GnOptions {
        max_iters: opts.gn_iters_per_step,
        tol: opts.tol,
        damping: false,
        linearization: opts.linearization,
    };

    let mut problem = FactorGraphProblem::new(
        Prior::from_covariance(opts.prior_mean, &opts.prior_cov)?,
        vec![],
        vec![],
    )?;
    let mut states = vec![opts.prior_mean];
    let mut start = 0usize;
    let mut records = Vec::with_capacity(traj.steps());

    for k in 0..traj.steps() {
        let step = k + 1;
        let time = traj.states[step].time;
        let at = |e: SmoothingError| SmoothingError::AtStep {
            step,
            time,
            source: Box::new(e),
        };
        let factor = step_factor(k).map_err(at)?;
        states.push(*states.last().expect("window is never empty") * factor.increment);
        problem.propagation.push(factor);
        if let Some(m) = traj.measurement_at(step) {
            problem.observations.push(ObservationFactor {
                index: step - start,
                y: m.y,
                cov: m.cov,
            });
        }

        if states.len() > opts.window_size {
            let prior = marginalize_oldest(&problem, &states, opts.param, &opts.linearization)
                .ok_or_else(|| at(SmoothingError::SingularNormalEquations { iteration: 0 }))?;
            problem.prior = prior;
            problem.propagation.remove(0);
            problem.observations.retain(|o| o.index > 0);
            for o in &mut problem.observations {
                o.index -= 1;
            }
            states.remove(0);
            start += 1;
        }

        let result = gn_solve(&problem, &states, opts.param, &gn).map_err(at)?;
        states = result.states;

        let system =
            build_linearization(&problem, &states, opts.param, &opts.linearization).map_err(at)?;
        let head = states.len() - 1;
        let cov = solve_step(&system)
            .and_then(|(_, r)| marginal_covariance(&r, head))
            .ok_or_else(|| at(SmoothingError::SingularNormalEquations { iteration: 0 }))?;
        let truth = &traj.states[step];
        let mean = states[head];
        records.push(TraceRecord {
            step,
            t: time,
            mean,
            cov,
            innovation: None,
            gain: None,
            manifold_residual: (Rotation2::new(-mean.heading()).rotate(&mean.pos)
                - traj.reference[step])
                .norm(),
            heading_error: mean.heading() - truth.heading,
            position_error: (mean.pos - truth.position).norm(),
        });
    }

    Ok(SmootherTrace {
        param: opts.param,
        records,
        final_steps: start..=start + states.len() - 1,
        final_window: states,
    })
}
