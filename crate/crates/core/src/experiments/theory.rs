use std::f64::consts::PI;

use super::thresholds as th;
use super::{log_samples, Artifacts, Bound, ExperimentError, ExperimentSpec, Summary};
use crate::analysis::{
    cross_validate_iekf, fit_rate_window, heading_recursion, riccati_a_sequence, write_report,
};
use crate::filters::{run_filter, FilterKind, RunOptions, DEFAULT_HEADING_VARIANCE};
use crate::sim::{simulate, Profile, ScenarioConfig, Trajectory};

pub(crate) const THM4_DESCRIPTION: &str = "\
Noise-free straight line, u = 1 m/s, one fix per step with dt = 1 s and
r = 1 m^2, 10^5 updates (--steps overrides). Invariant filter started at
40 deg heading error with P0 = diag(pi/2, 0, 0).
Checks: log-log slope of |heading error| in (-3.2, -2.8) and of position error
in (-2.2, -1.8), fitted over the last two decades of updates; the scalar
heading recursion started at exactly pi stays within 4 eps of pi.
Files: report.csv (a_n, alpha_n and the scalar heading error), filter_errors.csv.";

pub(crate) const APPB_DESCRIPTION: &str = "\
Closed-form prior heading variance a(t_n) against the Riccati recursion with
p0 = pi/2, r = 1, u dt = 1, up to n = 10^5. The invariant filter on the
noise-free straight line (40 deg error, 10^3 updates, --steps overrides)
against the scalar recursion and the closed-form gain and innovation.
Checks: relative gap in a(t_n) below 1e-12; heading, gain and innovation gaps
below 1e-9.
Files: riccati.csv, crosscheck.csv.";

const HEADING_ERROR_DEG: f64 = 40.0;

fn straight_line(updates: usize) -> ScenarioConfig {
    ScenarioConfig {
        dt: 1.0,
        meas_period: 1.0,
        duration: updates as f64,
        u_profile: Profile::constant(1.0),
        gps_cov: 1.0,
        ..ScenarioConfig::default()
    }
}

fn straight_line_run(
    updates: usize,
) -> Result<(Trajectory, crate::filters::EstimateTrace), ExperimentError> {
    let traj = simulate(&straight_line(updates), 0)?;
    let trace = run_filter(
        FilterKind::Iekf,
        &traj,
        &RunOptions::with_heading(HEADING_ERROR_DEG.to_radians()),
    )?;
    Ok((traj, trace))
}

pub(crate) fn thm4_rates(
    spec: &ExperimentSpec,
    art: &Artifacts,
) -> Result<Summary, ExperimentError> {
    let updates = spec.steps_or(th::RATE_UPDATES);
    let lo = updates / 10usize.pow(th::RATE_WINDOW_DECADES);
    if lo == 0 {
        return Err(ExperimentError::BadOption(format!(
            "thm4-rates needs at least {} updates",
            10usize.pow(th::RATE_WINDOW_DECADES)
        )));
    }
    let (_, trace) = straight_line_run(updates)?;
    // Index n holds the error after n updates.
    let heading: Vec<f64> = std::iter::once(HEADING_ERROR_DEG.to_radians())
        .chain(trace.records.iter().map(|r| r.heading_error.abs()))
        .collect();
    let position: Vec<f64> = std::iter::once(0.0)
        .chain(trace.records.iter().map(|r| r.position_error))
        .collect();
    let heading_fit = fit_rate_window(&heading, lo, updates)?;
    let position_fit = fit_rate_window(&position, lo, updates)?;

    let cf = riccati_a_sequence(DEFAULT_HEADING_VARIANCE, 1.0, 1.0, updates);
    let scalar = heading_recursion(HEADING_ERROR_DEG.to_radians(), &cf);
    let antipode = heading_recursion(PI, &cf);
    let drift = antipode
        .theta_tilde
        .iter()
        .fold(0.0_f64, |m, e| m.max((e - PI).abs()));

    art.write("report.csv", |w| write_report(&cf, &scalar, w))?;
    art.write("filter_errors.csv", |w| {
        writeln!(w, "n,heading_error,position_error")?;
        for n in log_samples(updates) {
            writeln!(w, "{},{},{}", n, heading[n], position[n])?;
        }
        Ok(())
    })?;

    let mut s = Summary::new(spec.experiment.name());
    s.check(
        "heading_error_slope",
        heading_fit.slope,
        Bound::Within(th::HEADING_SLOPE.0, th::HEADING_SLOPE.1),
    );
    s.check(
        "position_error_slope",
        position_fit.slope,
        Bound::Within(th::POSITION_SLOPE.0, th::POSITION_SLOPE.1),
    );
    s.check("antipode_drift", drift, Bound::Below(th::ANTIPODE_DRIFT));
    s.metric("fit_from", lo as f64);
    s.metric("fit_to", updates as f64);
    s.metric("final_heading_error", heading[updates]);
    s.metric("final_position_error", position[updates]);
    s.metric(
        "scalar_final_heading_error",
        scalar.theta_tilde[updates].abs(),
    );
    Ok(s)
}

pub(crate) fn appb_crosscheck(
    spec: &ExperimentSpec,
    art: &Artifacts,
) -> Result<Summary, ExperimentError> {
    let cf = riccati_a_sequence(DEFAULT_HEADING_VARIANCE, 1.0, 1.0, th::RICCATI_UPDATES);
    let (traj, trace) = straight_line_run(spec.steps_or(th::SCALAR_UPDATES))?;
    let cv = cross_validate_iekf(&traj, &trace, DEFAULT_HEADING_VARIANCE)?;

    art.write("riccati.csv", |w| {
        writeln!(w, "n,recursive,closed")?;
        for n in log_samples(th::RICCATI_UPDATES) {
            writeln!(w, "{},{},{}", n, cf.recursive[n], cf.closed[n])?;
        }
        Ok(())
    })?;
    art.write("crosscheck.csv", |w| {
        writeln!(
            w,
            "n,filter_heading_error,scalar_heading_error,gain_theta_1,gain_theta_2,gain_theta_1_closed,\
             gain_theta_2_closed,innovation_1,innovation_2,innovation_1_closed,innovation_2_closed,position_error"
        )?;
        for r in &cv.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.n,
                r.filter_heading_error,
                r.scalar_heading_error,
                r.gain_row[0],
                r.gain_row[1],
                r.gain_row_closed[0],
                r.gain_row_closed[1],
                r.innovation[0],
                r.innovation[1],
                r.innovation_closed[0],
                r.innovation_closed[1],
                r.position_error
            )?;
        }
        Ok(())
    })?;

    let mut s = Summary::new(spec.experiment.name());
    s.check(
        "riccati_relative_error",
        cf.max_relative_error(),
        Bound::Below(th::RICCATI_RELATIVE),
    );
    s.check(
        "heading_gap",
        cv.max_heading_diff,
        Bound::Below(th::SCALAR_AGREEMENT),
    );
    s.check(
        "gain_gap",
        cv.max_gain_diff,
        Bound::Below(th::SCALAR_AGREEMENT),
    );
    s.check(
        "innovation_gap",
        cv.max_innovation_diff,
        Bound::Below(th::SCALAR_AGREEMENT),
    );
    s.metric("riccati_updates", th::RICCATI_UPDATES as f64);
    s.metric("filter_updates", cv.rows.len() as f64);
    Ok(s)
}
