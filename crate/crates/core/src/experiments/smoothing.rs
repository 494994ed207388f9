use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::thresholds as th;
use super::{Artifacts, Bound, ExperimentError, ExperimentSpec, Summary};
use crate::se2::{Se2, Tangent3};
use crate::sim::{simulate, Integrator, Profile, ScenarioConfig};
use crate::smoothing::{
    build_linearization, finite_difference_gap, gn_solve, plateau_iteration, sliding_window_run,
    FactorGraphProblem, GnOptions, GnResult, JacobianMode, LinearizationOptions, Parametrization,
    Prior, SmootherTrace, WindowOptions,
};

pub(crate) const BATCH_DESCRIPTION: &str = "\
Straight line at u = 7 m/s, odometry at 10 Hz (dt = 0.1 s, Euler increments)
with noise variances 0.01 rad^2/s^2 (omega) and 0.1 m^2/s^2 (speed), fixes
every 5 steps with covariance 0.01 m^2 I, 10 s. Prior at the true position
with heading -3pi/4 and covariance diag((3pi/4)^2, 0.0025, 0.0025). Plain
Gauss-Newton from dead reckoning, 10 seeds, for the invariant, linear,
Grisetti and Forster parametrizations.
Checks: median number of iterations to come within 1% of the final cost is
strictly smaller for the invariant parametrization than for each other one;
analytic Jacobians match central differences to 1e-6; the invariant
information matrix does not depend on the estimate to 1e-12.
Files: plateaus.csv, gn_<param>.csv, iterates_<param>.csv (first seed).";

pub(crate) const WINDOW_DESCRIPTION: &str = "\
80 s run at u = 1 m/s with omega = 0.3 sin(2 pi 0.05 t), odometry at
6.75 Hz with noise variances 0.01 and 0.1, fixes at 1.35 Hz with covariance
1e-5 m^2 I. Sliding window of 5 states, one Gauss-Newton iteration per step,
prior at (1/4, 1/4) with heading 9pi/10 and covariance
diag((pi/4)^2, 1/8, 1/8). 100 seeds.
Checks: median heading RMSE of the invariant parametrization below the median
of each other one.
Files: rmse.csv, window_<param>.csv (first seed).";

fn batch_scenario() -> ScenarioConfig {
    ScenarioConfig {
        dt: 0.1,
        duration: 10.0,
        meas_period: 0.5,
        omega_profile: Profile::constant(0.0),
        u_profile: Profile::constant(7.0),
        gps_cov: 0.01,
        gps_noise: true,
        odom_noise: true,
        odom_cov: [0.01, 0.1],
        integrator: Integrator::Euler,
        ..ScenarioConfig::default()
    }
}

fn window_scenario() -> ScenarioConfig {
    let dt = 1.0 / 6.75;
    ScenarioConfig {
        dt,
        duration: 80.0,
        meas_period: 5.0 * dt,
        omega_profile: Profile::Sinusoid {
            offset: 0.0,
            amplitude: 0.3,
            frequency: 0.05,
            phase: 0.0,
        },
        u_profile: Profile::constant(1.0),
        gps_cov: 1e-5,
        gps_noise: true,
        odom_noise: true,
        odom_cov: [0.01, 0.1],
        integrator: Integrator::Euler,
        ..ScenarioConfig::default()
    }
}

/// Covariance of one odometry increment.
fn step_covariance(cfg: &ScenarioConfig) -> Matrix3<f64> {
    let [w, x] = cfg.odom_cov;
    Matrix3::from_diagonal(&Vector3::new(w, x, x)) * (cfg.dt * cfg.dt)
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn batch_problem(cfg: &ScenarioConfig, seed: u64) -> Result<FactorGraphProblem, ExperimentError> {
    let traj = simulate(cfg, seed)?;
    let offset = 3.0 * PI / 4.0;
    let prior = Prior::from_covariance(
        Se2::new(cfg.theta0 - offset, 0.0, 0.0),
        &Matrix3::from_diagonal(&Vector3::new(offset * offset, 0.0025, 0.0025)),
    )?;
    Ok(FactorGraphProblem::from_trajectory(
        &traj,
        cfg.integrator,
        prior,
        &step_covariance(cfg),
    )?)
}

/// Largest entry of the change in the invariant information matrix between
/// two estimates, relative to its largest entry.
fn information_variation(
    problem: &FactorGraphProblem,
    a: &[Se2],
    b: &[Se2],
    param: Parametrization,
) -> Result<f64, ExperimentError> {
    let opts = LinearizationOptions {
        approx_identity_prior: true,
        ..LinearizationOptions::default()
    };
    let ia: DMatrix<f64> = build_linearization(problem, a, param, &opts)?.information();
    let ib: DMatrix<f64> = build_linearization(problem, b, param, &opts)?.information();
    Ok((&ia - &ib).abs().max() / ia.abs().max())
}

fn perturbed(states: &[Se2], scale: f64, seed: u64) -> Vec<Se2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    states
        .iter()
        .map(|s| {
            let mut d = || rng.random_range(-scale..scale);
            s.retract(&Tangent3::new(d(), d(), d()))
        })
        .collect()
}

fn write_iterates(w: &mut dyn Write, result: &GnResult) -> std::io::Result<()> {
    writeln!(w, "iter,state,theta,x1,x2")?;
    for (k, states) in result.iterates.iter().enumerate() {
        for (i, s) in states.iter().enumerate() {
            writeln!(w, "{},{},{},{},{}", k, i, s.heading(), s.pos[0], s.pos[1])?;
        }
    }
    Ok(())
}

pub(crate) fn smoothing_batch(
    spec: &ExperimentSpec,
    art: &Artifacts,
) -> Result<Summary, ExperimentError> {
    let mut cfg = spec.scenario_or(batch_scenario());
    if let Some(n) = spec.steps {
        cfg.duration = n as f64 * cfg.dt;
    }
    let seeds: Vec<u64> = (0..th::PLATEAU_SEEDS as u64)
        .map(|k| spec.seed + k)
        .collect();
    let problems = seeds
        .par_iter()
        .map(|&seed| batch_problem(&cfg, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(usize, Parametrization)> = (0..seeds.len())
        .flat_map(|i| Parametrization::ALL.into_iter().map(move |p| (i, p)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(i, p)| {
            let init = problems[i].dead_reckoning();
            gn_solve(&problems[i], &init, p, &GnOptions::default())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let plateaus: Vec<usize> = results
        .iter()
        .map(|r| plateau_iteration(&r.log, th::PLATEAU_FRACTION))
        .collect();
    let median_of = |p: Parametrization| {
        median(
            jobs.iter()
                .zip(&plateaus)
                .filter(|((_, q), _)| *q == p)
                .map(|(_, &k)| k as f64)
                .collect(),
        )
    };

    // Jacobian and information checks on the first seed.
    let problem = &problems[0];
    let dead = problem.dead_reckoning();
    let moved = perturbed(&dead, 0.3, spec.seed);
    let exact = LinearizationOptions {
        mode: JacobianMode::Exact,
        ..LinearizationOptions::default()
    };
    let mut fd_gap: f64 = 0.0;
    for p in Parametrization::ALL {
        fd_gap = fd_gap.max(finite_difference_gap(problem, &moved, p, &exact)?);
        fd_gap = fd_gap.max(finite_difference_gap(
            problem,
            &dead,
            p,
            &LinearizationOptions::default(),
        )?);
    }
    let invariant_variation =
        information_variation(problem, &dead, &moved, Parametrization::Invariant)?;
    let forster_variation =
        information_variation(problem, &dead, &moved, Parametrization::Forster)?;

    art.write("plateaus.csv", |w| {
        writeln!(
            w,
            "seed,param,plateau,iterations,initial_cost,final_cost,converged"
        )?;
        for ((&(i, p), r), k) in jobs.iter().zip(&results).zip(&plateaus) {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                seeds[i],
                p.name(),
                k,
                r.log.len() - 1,
                r.log[0].cost,
                r.final_cost(),
                r.converged
            )?;
        }
        Ok(())
    })?;
    for (&(i, p), r) in jobs.iter().zip(&results) {
        if i == 0 {
            art.write(&format!("gn_{}.csv", p.name()), |w| r.write_log(w))?;
            art.write(&format!("iterates_{}.csv", p.name()), |w| {
                write_iterates(w, r)
            })?;
        }
    }

    let mut s = Summary::new(spec.experiment.name());
    let inv = median_of(Parametrization::Invariant);
    for p in Parametrization::ALL.into_iter().skip(1) {
        s.check(
            format!("invariant_median_plateau_below_{}", p.name()),
            inv,
            Bound::Below(median_of(p)),
        );
    }
    s.check("jacobian_fd_gap", fd_gap, Bound::Below(th::JACOBIAN_FD));
    s.check(
        "invariant_information_variation",
        invariant_variation,
        Bound::Below(th::INFORMATION_INVARIANCE),
    );
    for p in Parametrization::ALL {
        s.metric(format!("median_plateau_{}", p.name()), median_of(p));
    }
    s.metric("forster_information_variation", forster_variation);
    Ok(s)
}

pub(crate) fn smoothing_window(
    spec: &ExperimentSpec,
    art: &Artifacts,
) -> Result<Summary, ExperimentError> {
    let mut cfg = spec.scenario_or(window_scenario());
    if let Some(n) = spec.steps {
        cfg.duration = n as f64 * cfg.dt;
    }
    let seeds: Vec<u64> = (0..th::WINDOW_SEEDS as u64)
        .map(|k| spec.seed + k)
        .collect();
    let base = WindowOptions {
        window_size: 5,
        param: Parametrization::Invariant,
        gn_iters_per_step: 1,
        tol: 1e-10,
        prior_mean: Se2::new(cfg.theta0 + 9.0 * PI / 10.0, 0.25, 0.25),
        prior_cov: Matrix3::from_diagonal(&Vector3::new((PI / 4.0).powi(2), 0.125, 0.125)),
        step_cov: step_covariance(&cfg),
        integrator: cfg.integrator,
        linearization: LinearizationOptions::default(),
    };
    let traces: Vec<Vec<SmootherTrace>> = seeds
        .par_iter()
        .map(|&seed| {
            let traj = simulate(&cfg, seed)?;
            Parametrization::ALL
                .into_iter()
                .map(|param| Ok(sliding_window_run(&traj, &WindowOptions { param, ..base })?))
                .collect::<Result<Vec<_>, ExperimentError>>()
        })
        .collect::<Result<Vec<_>, _>>()?;

    art.write("rmse.csv", |w| {
        writeln!(w, "seed,param,heading_rmse,position_rmse")?;
        for (seed, runs) in seeds.iter().zip(&traces) {
            for t in runs {
                writeln!(
                    w,
                    "{},{},{},{}",
                    seed,
                    t.param.name(),
                    t.heading_rmse(),
                    t.position_rmse()
                )?;
            }
        }
        Ok(())
    })?;
    for t in &traces[0] {
        art.write(&format!("window_{}.csv", t.param.name()), |w| {
            t.write_csv(w)
        })?;
    }

    let median_of = |j: usize| median(traces.iter().map(|runs| runs[j].heading_rmse()).collect());
    let inv = median_of(0);
    let mut s = Summary::new(spec.experiment.name());
    for (j, p) in Parametrization::ALL.into_iter().enumerate().skip(1) {
        s.check(
            format!("invariant_median_heading_rmse_below_{}", p.name()),
            inv,
            Bound::Below(median_of(j)),
        );
    }
    for (j, p) in Parametrization::ALL.into_iter().enumerate() {
        s.metric(format!("median_heading_rmse_{}", p.name()), median_of(j));
        s.metric(
            format!("median_position_rmse_{}", p.name()),
            median(traces.iter().map(|runs| runs[j].position_rmse()).collect()),
        );
    }
    Ok(s)
}
