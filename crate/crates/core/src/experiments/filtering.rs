use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::thresholds as th;
use super::{log_samples, Artifacts, Bound, ExperimentError, ExperimentSpec, Summary};
use crate::filters::linear_kf::{linear_kf_step, LinearKfState, LinearObservation};
use crate::filters::{
    run_filter, EstimateTrace, FilterConfig, FilterKind, IekfJacobian, RunOptions, StateEstimate,
    TraceRecord, DEFAULT_HEADING_VARIANCE,
};
use crate::se2::Se2;
use crate::sim::{simulate, traveled_distance, Profile, ScenarioConfig, Trajectory};

pub(crate) const FIG1_DESCRIPTION: &str = "\
Straight line (omega = 0, u = 1 m/s), dt = 0.01 s, fixes every 0.05 s with
covariance 1 m^2 I, 10 s. True heading 0, both filters start at 40 deg with
P0 = diag(pi/2, 0, 0) and a known position.
Checks: invariant-filter residual |R(theta_hat)^T x_hat - b| below 1e-9 at
every step; EKF residual above 0.01 within 20 updates. The run is repeated in
a frame moved by (2 rad, (5, -3)): invariant-filter estimates must be the
moved estimates and P, K, z must be unchanged to 1e-10, while the EKF's
P, K, z must differ by more than 1e-3.
Files: trajectory.csv, ekf.csv, iekf.csv.";

pub(crate) const FIG2_DESCRIPTION: &str = "\
Straight line (omega = 0, u = 1 m/s), dt = 0.01 s, fixes every 0.05 s with
covariance 1 m^2 I, 10 s. True heading 0, both filters start at 40 deg with
P0 = diag(pi/2, 0, 0). Compares |x_hat|, the distance travelled according to
the estimate, with the odometer integral. A scenario file must keep omega = 0.
Checks: invariant-filter gap below 1e-9 at every step; EKF gap above 1e-3
within 50 updates.
Files: odometer.csv.";

pub(crate) const FIG3_DESCRIPTION: &str = "\
Noise-free straight line, u = 1 m/s, one fix per step with dt = 1 s and
r = 1 m^2, 10^6 updates (--steps overrides). EKF and invariant filter, each
started at 5 deg and 40 deg heading error with P0 = diag(pi/2, 0, 0).
Checks: final EKF(5 deg) position error more than 10 times the final error of
the invariant filter started at 5 deg and at 40 deg.
Files: convergence.csv (position errors at log-spaced updates).";

pub(crate) const THM3_DESCRIPTION: &str = "\
Invariant filter residual |R(theta_hat)^T x_hat - b| over 10^4 steps of
dt = 0.01 s, fixes every 0.05 s with covariance 1 m^2 I, u = 1 m/s.
20 random initial headings x {omega = 0.1, omega = 0.05 + 0.5 sin(2 pi 0.1 t)}
x {noise-free fixes, 5 noisy seeds}.
Checks: largest residual below 1e-9; the two other sign patterns of the error
dynamics leave the curve by more than 1e-3.
Files: residuals.csv, iekf_example.csv.";

pub(crate) const PROP1_DESCRIPTION: &str = "\
Double integrator x' = (x2, 0), x0 = (1, 0.5), position measured every step
(dt = 0.01 s) with variance 0.01, 10^3 steps. The filter starts at (1, 0) with
P0 = diag(0, 1), so C0 = (1, 0) and alpha = 1 are known exactly.
Checks: max |C_t x_hat - alpha| and max |C_t P C_t^T| below 1e-9.
Files: linear.csv.";

fn fig1_scenario() -> ScenarioConfig {
    ScenarioConfig {
        dt: 0.01,
        meas_period: 0.05,
        duration: 10.0,
        omega_profile: Profile::constant(0.0),
        u_profile: Profile::constant(1.0),
        gps_cov: 1.0,
        gps_noise: true,
        ..ScenarioConfig::default()
    }
}

const FIG1_HEADING_ERROR_DEG: f64 = 40.0;

fn with_steps(mut cfg: ScenarioConfig, steps: Option<usize>) -> ScenarioConfig {
    if let Some(n) = steps {
        cfg.duration = n as f64 * cfg.dt;
    }
    cfg
}

fn write_trace(art: &Artifacts, name: &str, trace: &EstimateTrace) -> Result<(), ExperimentError> {
    art.write(name, |w| trace.write_csv(w))
}

/// Largest of `values` up to and including the `n`-th record that carries an
/// update.
fn max_over_first_updates(
    values: impl Iterator<Item = f64>,
    records: &[TraceRecord],
    n: usize,
) -> f64 {
    let mut seen = 0;
    let mut worst: f64 = 0.0;
    for (v, r) in values.zip(records) {
        worst = worst.max(v.abs());
        if r.innovation.is_some() {
            seen += 1;
            if seen == n {
                break;
            }
        }
    }
    worst
}

fn max_abs<const R: usize, const C: usize>(
    a: &nalgebra::SMatrix<f64, R, C>,
    b: &nalgebra::SMatrix<f64, R, C>,
) -> f64 {
    (a - b).abs().max()
}

/// Largest gap between a run and the same run in a moved frame. The first
/// value compares the moved means, the second covariances, gains and
/// innovations.
fn frame_change_gaps(a: &EstimateTrace, b: &EstimateTrace, gamma: &Se2) -> (f64, f64) {
    let mut mean_gap: f64 = 0.0;
    let mut body_gap: f64 = 0.0;
    for (ra, rb) in a.records.iter().zip(&b.records) {
        mean_gap = mean_gap.max(max_abs(
            &gamma.compose(&ra.mean).matrix(),
            &rb.mean.matrix(),
        ));
        body_gap = body_gap.max(max_abs(&ra.cov, &rb.cov));
        if let (Some(ka), Some(kb)) = (ra.gain, rb.gain) {
            body_gap = body_gap.max(max_abs(&ka, &kb));
        }
        if let (Some(za), Some(zb)) = (ra.innovation, rb.innovation) {
            body_gap = body_gap.max(max_abs(&za, &zb));
        }
    }
    (mean_gap, body_gap)
}

pub(crate) fn fig1_manifold(
    spec: &ExperimentSpec,
    art: &Artifacts,
) -> Result<Summary, ExperimentError> {
    let cfg = with_steps(spec.scenario_or(fig1_scenario()), spec.steps);
    let traj = simulate(&cfg, spec.seed)?;
    let theta_hat = cfg.theta0 + FIG1_HEADING_ERROR_DEG.to_radians();
    let opts = RunOptions::with_heading(theta_hat);
    let ekf = run_filter(FilterKind::Ekf, &traj, &opts)?;
    let iekf = run_filter(FilterKind::Iekf, &traj, &opts)?;

    let gamma = Se2::new(2.0, 5.0, -3.0);
    let moved = traj.left_transform(&gamma);
    let moved_opts = RunOptions {
        initial_mean: gamma.compose(&opts.initial_mean),
        ..opts
    };
    let ekf_moved = run_filter(FilterKind::Ekf, &moved, &moved_opts)?;
    let iekf_moved = run_filter(FilterKind::Iekf, &moved, &moved_opts)?;
    let (iekf_mean_gap, iekf_body_gap) = frame_change_gaps(&iekf, &iekf_moved, &gamma);
    let (ekf_mean_gap, ekf_body_gap) = frame_change_gaps(&ekf, &ekf_moved, &gamma);

    art.write("trajectory.csv", |w| traj.write_csv(w))?;
    write_trace(art, "ekf.csv", &ekf)?;
    write_trace(art, "iekf.csv", &iekf)?;

    let mut s = Summary::new(spec.experiment.name());
    s.check(
        "iekf_max_manifold_residual",
        iekf.max_manifold_residual(),
        Bound::Below(th::MANIFOLD_RESIDUAL),
    );
    s.check(
        "ekf_manifold_residual_first_updates",
        max_over_first_updates(
            ekf.records.iter().map(|r| r.manifold_residual),
            &ekf.records,
            th::EKF_LEAVES_MANIFOLD_UPDATES,
        ),
        Bound::Above(th::EKF_LEAVES_MANIFOLD),
    );
    s.check(
        "left_invariance_iekf",
        iekf_mean_gap.max(iekf_body_gap),
        Bound::Below(th::LEFT_INVARIANCE),
    );
    s.check(
        "left_invariance_ekf_witness",
        ekf_body_gap,
        Bound::Above(th::EKF_WITNESS),
    );
    s.metric("ekf_moved_mean_gap", ekf_mean_gap);
    s.metric("ekf_max_manifold_residual", ekf.max_manifold_residual());
    Ok(s)
}

/// `|x_hat| - alpha(t)` along a trace, with `alpha` the odometer integral.
fn odometer_gaps(traj: &Trajectory, trace: &EstimateTrace) -> Vec<f64> {
    let mut alpha = 0.0;
    traj.inputs
        .iter()
        .zip(&trace.records)
        .map(|(input, r)| {
            alpha += input.u * traj.dt;
            r.mean.pos.norm() - alpha
        })
        .collect()
}

pub(crate) fn fig2_odometer(
    spec: &ExperimentSpec,
    art: &Artifacts,
) -> Result<Summary, ExperimentError> {
    let cfg = with_steps(spec.scenario_or(fig1_scenario()), spec.steps);
    if cfg.omega_profile != Profile::constant(0.0) {
        return Err(ExperimentError::BadOption(
            "fig2-odometer needs a straight line (omega_profile constant 0)".into(),
        ));
    }
    let traj = simulate(&cfg, spec.seed)?;
    let opts = RunOptions::with_heading(cfg.theta0 + FIG1_HEADING_ERROR_DEG.to_radians());
    let ekf = run_filter(FilterKind::Ekf, &traj, &opts)?;
    let iekf = run_filter(FilterKind::Iekf, &traj, &opts)?;
    let ekf_gap = odometer_gaps(&traj, &ekf);
    let iekf_gap = odometer_gaps(&traj, &iekf);

    let path = |trace: &EstimateTrace| -> Vec<Vector2<f64>> {
        std::iter::once(trace.initial.mean.pos)
            .chain(trace.records.iter().map(|r| r.mean.pos))
            .collect()
    };
    let (ekf_path, iekf_path) = (path(&ekf), path(&iekf));
    art.write("odometer.csv", |w| {
        writeln!(
            w,
            "t,odometer,iekf_range,ekf_range,iekf_gap,ekf_gap,iekf_polyline,ekf_polyline"
        )?;
        let (mut odo, mut poly_i, mut poly_e) = (0.0, 0.0, 0.0);
        for (k, r) in iekf.records.iter().enumerate() {
            odo += traj.inputs[k].u * traj.dt;
            poly_i += (iekf_path[k + 1] - iekf_path[k]).norm();
            poly_e += (ekf_path[k + 1] - ekf_path[k]).norm();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.t,
                odo,
                r.mean.pos.norm(),
                ekf.records[k].mean.pos.norm(),
                iekf_gap[k],
                ekf_gap[k],
                poly_i,
                poly_e
            )?;
        }
        Ok(())
    })?;
    let speeds: Vec<f64> = traj.inputs.iter().map(|i| i.u).collect();

    let mut s = Summary::new(spec.experiment.name());
    s.check(
        "iekf_odometer_gap",
        iekf_gap.iter().fold(0.0, |m, v| m.max(v.abs())),
        Bound::Below(th::ODOMETER_IEKF),
    );
    let ekf_first = max_over_first_updates(
        ekf_gap.iter().copied(),
        &ekf.records,
        th::ODOMETER_EKF_UPDATES,
    );
    s.check(
        "ekf_odometer_gap_first_updates",
        ekf_first,
        Bound::Above(th::ODOMETER_EKF),
    );
    s.metric(
        "odometer",
        traveled_distance(&[], &speeds, traj.dt).odometric,
    );
    s.metric(
        "iekf_polyline",
        traveled_distance(&iekf_path, &[], traj.dt).polyline,
    );
    s.metric(
        "ekf_polyline",
        traveled_distance(&ekf_path, &[], traj.dt).polyline,
    );
    Ok(s)
}

/// Noise-free straight line at `u = 1`, `dt = 1`, a fix after every step,
/// driven without storing the trajectory. Returns the position error after
/// each update listed in `samples` (increasing) and after the last one.
fn straight_line_errors(
    kind: FilterKind,
    heading_error: f64,
    updates: usize,
    samples: &[usize],
) -> Result<(Vec<f64>, f64), ExperimentError> {
    let config = FilterConfig::default();
    let noise = nalgebra::Matrix2::identity();
    let mut est =
        StateEstimate::heading_only(heading_error, DEFAULT_HEADING_VARIANCE, kind.convention());
    let mut out = Vec::with_capacity(samples.len());
    let mut next = samples.iter().peekable();
    let mut err = 0.0;
    for n in 1..=updates {
        est = kind.propagate(&est, 0.0, 1.0, 1.0, &config);
        let y = Vector2::new(n as f64, 0.0);
        est = kind
            .update(&est, &y, &noise, &config)
            .map_err(|e| crate::filters::FilterError::AtStep {
                step: n,
                source: Box::new(e),
            })?
            .0;
        err = (est.mean.pos - y).norm();
        while next.peek().is_some_and(|&&k| k == n) {
            out.push(err);
            next.next();
        }
    }
    Ok((out, err))
}

pub(crate) fn fig3_convergence(
    spec: &ExperimentSpec,
    art: &Artifacts,
) -> Result<Summary, ExperimentError> {
    let updates = spec.steps_or(th::CONVERGENCE_UPDATES);
    let samples = log_samples(updates);
    let runs = [
        (FilterKind::Ekf, 5.0),
        (FilterKind::Ekf, 40.0),
        (FilterKind::Iekf, 5.0),
        (FilterKind::Iekf, 40.0),
    ];
    let results = runs
        .par_iter()
        .map(|&(kind, deg)| straight_line_errors(kind, f64::to_radians(deg), updates, &samples))
        .collect::<Result<Vec<_>, _>>()?;

    art.write("convergence.csv", |w| {
        writeln!(w, "n,ekf_5deg,ekf_40deg,iekf_5deg,iekf_40deg")?;
        for (i, n) in samples.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{}",
                n, results[0].0[i], results[1].0[i], results[2].0[i], results[3].0[i]
            )?;
        }
        Ok(())
    })?;

    let [ekf5, ekf40, iekf5, iekf40] = [results[0].1, results[1].1, results[2].1, results[3].1];
    let mut s = Summary::new(spec.experiment.name());
    s.check(
        "ekf5_over_iekf5_final_error",
        ekf5 / iekf5,
        Bound::Above(th::CONVERGENCE_RATIO),
    );
    s.check(
        "ekf5_over_iekf40_final_error",
        ekf5 / iekf40,
        Bound::Above(th::CONVERGENCE_RATIO),
    );
    s.metric("updates", updates as f64);
    s.metric("ekf_5deg_final_error", ekf5);
    s.metric("ekf_40deg_final_error", ekf40);
    s.metric("iekf_5deg_final_error", iekf5);
    s.metric("iekf_40deg_final_error", iekf40);
    Ok(s)
}

fn thm3_scenario() -> ScenarioConfig {
    ScenarioConfig {
        dt: 0.01,
        meas_period: 0.05,
        duration: th::MANIFOLD_STEPS as f64 * 0.01,
        u_profile: Profile::constant(1.0),
        gps_cov: 1.0,
        ..ScenarioConfig::default()
    }
}

fn thm3_profiles() -> [(&'static str, Profile); 2] {
    [
        ("constant", Profile::constant(0.1)),
        (
            "sinusoid",
            Profile::Sinusoid {
                offset: 0.05,
                amplitude: 0.5,
                frequency: 0.1,
                phase: 0.0,
            },
        ),
    ]
}

pub(crate) fn thm3_residual(
    spec: &ExperimentSpec,
    art: &Artifacts,
) -> Result<Summary, ExperimentError> {
    let base = with_steps(spec.scenario_or(thm3_scenario()), spec.steps);
    let profiles: Vec<(&str, Profile)> = if spec.scenario.is_some() {
        vec![("scenario", base.omega_profile.clone())]
    } else {
        thm3_profiles().to_vec()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let headings: Vec<f64> = (0..th::MANIFOLD_HEADINGS)
        .map(|_| rng.random_range(-PI..PI))
        .collect();
    // `None` is the noise-free variant.
    let noise_seeds: Vec<Option<u64>> = std::iter::once(None)
        .chain((0..th::MANIFOLD_NOISY_SEEDS as u64).map(|k| Some(spec.seed + k)))
        .collect();

    let mut cases = Vec::new();
    for (label, profile) in &profiles {
        for &noise in &noise_seeds {
            let cfg = ScenarioConfig {
                omega_profile: profile.clone(),
                gps_noise: noise.is_some(),
                ..base.clone()
            };
            cases.push((*label, noise, cfg));
        }
    }
    let trajectories = cases
        .par_iter()
        .map(|(_, noise, cfg)| simulate(cfg, noise.unwrap_or(spec.seed)))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(usize, f64)> = (0..cases.len())
        .flat_map(|c| headings.iter().map(move |&h| (c, h)))
        .collect();
    let residuals = jobs
        .par_iter()
        .map(|&(c, h)| {
            run_filter(
                FilterKind::Iekf,
                &trajectories[c],
                &RunOptions::with_heading(h),
            )
            .map(|t| t.max_manifold_residual())
        })
        .collect::<Result<Vec<_>, _>>()?;

    // The two other sign patterns on a noisy curved run.
    let probe = trajectories
        .iter()
        .zip(&cases)
        .rposition(|(_, (_, noise, _))| noise.is_some())
        .unwrap_or(0);
    let flipped: Vec<f64> = [IekfJacobian::FlippedTranslation, IekfJacobian::FlippedSign]
        .par_iter()
        .map(|&jac| {
            let opts = RunOptions {
                config: FilterConfig {
                    iekf_jacobian: jac,
                    ..FilterConfig::default()
                },
                ..RunOptions::with_heading(base.theta0 + 1.0)
            };
            run_filter(FilterKind::Iekf, &trajectories[probe], &opts)
                .map(|t| t.max_manifold_residual())
        })
        .collect::<Result<Vec<_>, _>>()?;

    art.write("residuals.csv", |w| {
        writeln!(w, "profile,noise_seed,theta0_hat,max_residual")?;
        for (&(c, h), r) in jobs.iter().zip(&residuals) {
            let seed = cases[c].1.map_or("none".to_string(), |s| s.to_string());
            writeln!(w, "{},{},{},{}", cases[c].0, seed, h, r)?;
        }
        Ok(())
    })?;
    if art.enabled() {
        let example = run_filter(
            FilterKind::Iekf,
            &trajectories[probe],
            &RunOptions::with_heading(headings[0]),
        )?;
        write_trace(art, "iekf_example.csv", &example)?;
    }

    let mut s = Summary::new(spec.experiment.name());
    s.check(
        "iekf_max_manifold_residual",
        residuals.iter().fold(0.0, |m, &v| m.max(v)),
        Bound::Below(th::MANIFOLD_RESIDUAL),
    );
    s.check(
        "flipped_jacobians_min_residual",
        flipped.iter().fold(f64::INFINITY, |m, &v| m.min(v)),
        Bound::Above(th::FLIPPED_JACOBIAN_RESIDUAL),
    );
    s.metric("runs", residuals.len() as f64);
    s.metric("steps_per_run", trajectories[0].steps() as f64);
    Ok(s)
}

pub(crate) fn prop1_linear(
    spec: &ExperimentSpec,
    art: &Artifacts,
) -> Result<Summary, ExperimentError> {
    let steps = spec.steps_or(th::LINEAR_STEPS);
    let dt = 0.01;
    let noise_var: f64 = 0.01;
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let phi = (&a * dt).exp();
    let mut truth = DVector::from_column_slice(&[1.0, 0.5]);
    let mut state = LinearKfState::new(
        DVector::from_column_slice(&[1.0, 0.0]),
        DMatrix::from_diagonal(&DVector::from_column_slice(&[0.0, 1.0])),
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        DVector::from_column_slice(&[1.0]),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rows = Vec::with_capacity(steps);
    let (mut worst_mean, mut worst_cov): (f64, f64) = (0.0, 0.0);
    for k in 1..=steps {
        truth = &phi * truth;
        let v: f64 = StandardNormal.sample(&mut rng);
        let obs = LinearObservation {
            h: DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            y: DVector::from_column_slice(&[truth[0] + noise_var.sqrt() * v]),
            noise: DMatrix::from_element(1, 1, noise_var),
        };
        state = linear_kf_step(&state, &a, dt, Some(&obs)).map_err(|e| {
            crate::filters::FilterError::AtStep {
                step: k,
                source: Box::new(e),
            }
        })?;
        let cr = state.constraint_residual().norm();
        let cc = state.constrained_covariance().norm();
        worst_mean = worst_mean.max(cr);
        worst_cov = worst_cov.max(cc);
        rows.push((k as f64 * dt, truth.clone(), state.mean.clone(), cr, cc));
    }

    art.write("linear.csv", |w| {
        writeln!(
            w,
            "t,x1,x2,x1_hat,x2_hat,constraint_residual,constrained_cov"
        )?;
        for (t, x, m, cr, cc) in &rows {
            writeln!(w, "{},{},{},{},{},{},{}", t, x[0], x[1], m[0], m[1], cr, cc)?;
        }
        Ok(())
    })?;

    let mut s = Summary::new(spec.experiment.name());
    s.check(
        "max_constraint_residual",
        worst_mean,
        Bound::Below(th::LINEAR_CONSTRAINT),
    );
    s.check(
        "max_constrained_covariance",
        worst_cov,
        Bound::Below(th::LINEAR_CONSTRAINT),
    );
    s.metric("final_velocity_error", (state.mean[1] - truth[1]).abs());
    Ok(s)
}
