use std::io::{self, Write};

use nalgebra::{DMatrix, DVector, Matrix3};

use super::linearize::{build_linearization, total_cost, LinearizedSystem};
use super::{FactorGraphProblem, LinearizationOptions, Parametrization, SmoothingError};
use crate::se2::{Se2, Tangent3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnOptions {
    pub max_iters: usize,
    /// Stop once the full step norm falls below this value.
    pub tol: f64,
    /// Halve the step while the cost increases.
    pub damping: bool,
    pub linearization: LinearizationOptions,
}

impl Default for GnOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tol: 1e-10,
            damping: false,
            linearization: LinearizationOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub cost: f64,
    pub step_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnResult {
    pub states: Vec<Se2>,
    /// Entry 0 is the initial guess; entry `k` the estimate after `k` steps.
    pub log: Vec<IterationRecord>,
    pub converged: bool,
    /// Every intermediate estimate, entry `k` matching `log[k]`.
    pub iterates: Vec<Vec<Se2>>,
}

impl GnResult {
    pub fn final_cost(&self) -> f64 {
        self.log.last().map_or(f64::NAN, |r| r.cost)
    }

    pub fn write_log<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "iter,cost,step_norm")?;
        for r in &self.log {
            writeln!(w, "{},{},{}", r.iter, r.cost, r.step_norm)?;
        }
        Ok(())
    }
}

/// First iteration from which the cost stays within `fraction` of the final
/// cost, e.g. `0.01` for 1%.
pub fn plateau_iteration(log: &[IterationRecord], fraction: f64) -> usize {
    let Some(last) = log.last() else { return 0 };
    let bound = (1.0 + fraction) * last.cost;
    let mut k = log.len() - 1;
    while k > 0 && log[k - 1].cost <= bound {
        k -= 1;
    }
    log[k].iter
}

const RANK_TOLERANCE: f64 = 1e-12;

/// Least-squares step of a linearized system by QR, together with the
/// triangular factor.
pub(crate) fn solve_step(system: &LinearizedSystem) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let (a, b) = system.whitened();
    if a.nrows() < a.ncols() {
        return None;
    }
    let qr = a.qr();
    let r = qr.r();
    let max = r.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if max == 0.0 || r.diagonal().iter().any(|v| v.abs() <= RANK_TOLERANCE * max) {
        return None;
    }
    let rhs = -(qr.q().transpose() * b);
    let step = r.solve_upper_triangular(&rhs)?;
    Some((step, r))
}

/// `3x3` marginal covariance of state `idx` from the triangular factor.
pub(crate) fn marginal_covariance(r: &DMatrix<f64>, idx: usize) -> Option<Matrix3<f64>> {
    let n = r.ncols();
    let r_inv = r.clone().solve_upper_triangular(&DMatrix::identity(n, n))?;
    let rows = r_inv.rows(3 * idx, 3);
    let cov = rows * rows.transpose();
    Some(Matrix3::from_iterator(cov.iter().copied()))
}

pub(crate) fn apply_step(
    states: &[Se2],
    step: &DVector<f64>,
    scale: f64,
    param: Parametrization,
) -> Vec<Se2> {
    states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let d = Tangent3::new(
                step[3 * i] * scale,
                step[3 * i + 1] * scale,
                step[3 * i + 2] * scale,
            );
            param.retract(s, &d)
        })
        .collect()
}

/// Gauss-Newton iterations from `init`.
pub fn gn_solve(
    problem: &FactorGraphProblem,
    init: &[Se2],
    param: Parametrization,
    opts: &GnOptions,
) -> Result<GnResult, SmoothingError> {
    assert!(opts.max_iters >= 1, "at least one iteration is required");
    let lin = &opts.linearization;
    let mut states = init.to_vec();
    let mut cost = total_cost(problem, &states, param, lin)?;
    let mut log = vec![IterationRecord {
        iter: 0,
        cost,
        step_norm: 0.0,
    }];
    let mut iterates = vec![states.clone()];
    let mut converged = false;
    for iter in 1..=opts.max_iters {
        let system = build_linearization(problem, &states, param, lin)?;
        let (step, _) = solve_step(&system)
            .ok_or(SmoothingError::SingularNormalEquations { iteration: iter })?;
        let mut scale = 1.0;
        let mut next = apply_step(&states, &step, scale, param);
        let mut next_cost = total_cost(problem, &next, param, lin)?;
        if opts.damping {
            let mut tries = 0;
            while next_cost > cost && tries < 30 {
                scale *= 0.5;
                next = apply_step(&states, &step, scale, param);
                next_cost = total_cost(problem, &next, param, lin)?;
                tries += 1;
            }
        }
        let step_norm = step.norm() * scale;
        states = next;
        cost = next_cost;
        log.push(IterationRecord {
            iter,
            cost,
            step_norm,
        });
        iterates.push(states.clone());
        if step_norm < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(GnResult {
        states,
        log,
        converged,
        iterates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(costs: &[f64]) -> Vec<IterationRecord> {
        costs
            .iter()
            .enumerate()
            .map(|(iter, &cost)| IterationRecord {
                iter,
                cost,
                step_norm: 0.0,
            })
            .collect()
    }

    #[test]
    fn plateau_is_the_first_iteration_that_stays_close() {
        assert_eq!(plateau_iteration(&log(&[100.0, 10.0, 1.005, 1.0]), 0.01), 2);
        // A dip into the band that is left again does not count.
        assert_eq!(
            plateau_iteration(&log(&[100.0, 1.0, 5.0, 1.001, 1.0]), 0.01),
            3
        );
        assert_eq!(plateau_iteration(&log(&[3.0]), 0.01), 0);
        assert_eq!(plateau_iteration(&[], 0.01), 0);
    }
}
