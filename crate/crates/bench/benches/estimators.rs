use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use invnav_core::filters::{run_filter, FilterKind, RunOptions};
use invnav_core::se2::{Se2, Tangent3};
use invnav_core::sim::{simulate, Integrator, Profile, ScenarioConfig, Trajectory};
use invnav_core::smoothing::{
    gn_solve, sliding_window_run, FactorGraphProblem, GnOptions, LinearizationOptions,
    Parametrization, Prior, WindowOptions,
};
use nalgebra::{Matrix3, Vector3};

fn scenario() -> Trajectory {
    let cfg = ScenarioConfig {
        dt: 0.1,
        duration: 20.0,
        meas_period: 0.5,
        omega_profile: Profile::Sinusoid {
            offset: 0.0,
            amplitude: 0.3,
            frequency: 0.05,
            phase: 0.0,
        },
        gps_cov: 0.01,
        gps_noise: true,
        odom_noise: true,
        odom_cov: [0.01, 0.1],
        integrator: Integrator::Euler,
        ..ScenarioConfig::default()
    };
    simulate(&cfg, 0).unwrap()
}

fn step_cov(dt: f64) -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(0.01, 0.1, 0.1)) * (dt * dt)
}

fn group(c: &mut Criterion) {
    let xi = Tangent3::new(0.7, 1.5, -2.0);
    let g = Se2::exp(&xi);
    c.bench_function("se2_exp", |b| b.iter(|| Se2::exp(black_box(&xi))));
    c.bench_function("se2_log", |b| b.iter(|| black_box(&g).log_principal()));
}

fn filters(c: &mut Criterion) {
    let traj = simulate(
        &ScenarioConfig {
            duration: 10.0,
            gps_noise: true,
            omega_profile: Profile::constant(0.1),
            ..ScenarioConfig::default()
        },
        0,
    )
    .unwrap();
    let opts = RunOptions::with_heading(1.0);
    let mut g = c.benchmark_group("filter_1000_steps");
    for kind in [FilterKind::Ekf, FilterKind::Iekf] {
        g.bench_with_input(
            BenchmarkId::from_parameter(format!("{kind:?}")),
            &kind,
            |b, &k| b.iter(|| run_filter(k, &traj, &opts).unwrap()),
        );
    }
    g.finish();
}

fn smoothers(c: &mut Criterion) {
    let traj = scenario();
    let p0 = Matrix3::from_diagonal(&Vector3::new(0.5, 0.01, 0.01));
    let prior = Prior::from_covariance(Se2::new(0.6, 0.0, 0.0), &p0).unwrap();
    let problem =
        FactorGraphProblem::from_trajectory(&traj, Integrator::Euler, prior, &step_cov(traj.dt))
            .unwrap();
    let init = problem.dead_reckoning();
    let gn = GnOptions {
        max_iters: 5,
        ..GnOptions::default()
    };

    let mut g = c.benchmark_group("batch_gn_5_iterations");
    for p in Parametrization::ALL {
        g.bench_with_input(BenchmarkId::from_parameter(p.name()), &p, |b, &p| {
            b.iter(|| gn_solve(&problem, &init, p, &gn).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("sliding_window_5");
    for p in Parametrization::ALL {
        let opts = WindowOptions {
            window_size: 5,
            param: p,
            gn_iters_per_step: 1,
            tol: 1e-10,
            prior_mean: Se2::new(0.6, 0.0, 0.0),
            prior_cov: p0,
            step_cov: step_cov(traj.dt),
            integrator: Integrator::Euler,
            linearization: LinearizationOptions::default(),
        };
        g.bench_with_input(BenchmarkId::from_parameter(p.name()), &opts, |b, o| {
            b.iter(|| sliding_window_run(&traj, o).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, group, filters, smoothers);
criterion_main!(benches);
