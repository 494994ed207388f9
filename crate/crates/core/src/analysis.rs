//! Closed-form behaviour of the invariant filter on a straight line with exact
//! odometry, and tools to compare it with the full filter.
//!
//! On that scenario the covariance keeps the rank-one shape
//! `a(t) (1, 0, s)(1, 0, s)^T` with `s` the distance travelled, the gain
//! coefficient obeys a scalar recursion whose inverse is a square pyramidal
//! number, and the heading error follows
//! `e_{n+1} = e_n - alpha_n sin(e_n)`.

use std::io::{self, Write};

use thiserror::Error;

use crate::filters::{EstimateTrace, FilterKind};
use crate::sim::Trajectory;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("sample {index} is not positive ({value})")]
    NonPositiveSample { index: usize, value: f64 },
    #[error("fit needs at least two samples, got {0}")]
    TooFewSamples(usize),
    #[error("scenario does not match the closed-form assumptions: {0}")]
    ScenarioMismatch(String),
}

/// `a` after each update, by recursion and by closed form. Index `n` holds
/// `a(t_n^+)`; index 0 is the prior `p0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiClosedForm {
    pub p0: f64,
    pub r: f64,
    pub delta_t: f64,
    pub recursive: Vec<f64>,
    pub closed: Vec<f64>,
}

impl RiccatiClosedForm {
    pub fn len(&self) -> usize {
        self.closed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closed.is_empty()
    }

    /// `a(t_n)`, the value seen by update `n >= 1`.
    pub fn prior(&self, n: usize) -> f64 {
        self.closed[n - 1]
    }

    pub fn max_relative_error(&self) -> f64 {
        self.recursive
            .iter()
            .zip(&self.closed)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max)
    }
}

fn square_pyramidal(n: u64) -> u128 {
    let n = n as u128;
    n * (n + 1) * (2 * n + 1) / 6
}

/// Tabulates `a(t_n^+)` for `n = 0..=n_max`.
pub fn riccati_a_sequence(p0: f64, r: f64, delta_t: f64, n_max: usize) -> RiccatiClosedForm {
    assert!(
        p0 > 0.0 && r > 0.0 && delta_t > 0.0,
        "p0, r and delta_t must be positive"
    );
    let mut recursive = Vec::with_capacity(n_max + 1);
    let mut closed = Vec::with_capacity(n_max + 1);
    recursive.push(p0);
    closed.push(p0);
    let scale = delta_t * delta_t / r;
    let mut a = p0;
    for n in 1..=n_max {
        let t = n as f64 * delta_t;
        let t2a = t * t * a;
        a -= t2a * a / (r + t2a);
        recursive.push(a);
        // The pyramidal number is exact in integers and in f64 up to n ~ 2e5.
        let inv = 1.0 / p0 + scale * square_pyramidal(n as u64) as f64;
        closed.push(1.0 / inv);
    }
    RiccatiClosedForm {
        p0,
        r,
        delta_t,
        recursive,
        closed,
    }
}

/// `alpha_n = t_n^2 a(t_n) / (t_n^2 a(t_n) + r)` for `n = 1..len-1`. Index 0
/// of the result is unused and set to zero.
pub fn alpha_sequence(cf: &RiccatiClosedForm) -> Vec<f64> {
    let mut out = vec![0.0; cf.len()];
    for (n, slot) in out.iter_mut().enumerate().skip(1) {
        let t = n as f64 * cf.delta_t;
        let t2a = t * t * cf.prior(n);
        *slot = t2a / (t2a + cf.r);
    }
    out
}

/// `1 - alpha_n`, computed without cancellation.
fn alpha_complement(cf: &RiccatiClosedForm, n: usize) -> f64 {
    let t = n as f64 * cf.delta_t;
    cf.r / (t * t * cf.prior(n) + cf.r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadingRecursionTrace {
    /// Heading error after `n` updates; index 0 is the initial error.
    pub theta_tilde: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl HeadingRecursionTrace {
    pub fn is_monotone(&self) -> bool {
        self.theta_tilde
            .windows(2)
            .all(|w| w[1].abs() <= w[0].abs())
    }
}

/// `x - sin x` without cancellation for small `x`.
fn x_minus_sin(x: f64) -> f64 {
    if x.abs() < SMALL_ERROR {
        let x2 = x * x;
        x * x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0)))
    } else {
        x - x.sin()
    }
}

const SMALL_ERROR: f64 = 1e-2;

/// `sin e`, reduced about the nearest of `0, pi, -pi` so that the stored
/// constant `PI` is an exact zero of the sine.
fn reduced_sin(e: f64) -> f64 {
    use std::f64::consts::{FRAC_PI_2, PI};
    if e > FRAC_PI_2 {
        (PI - e).sin()
    } else if e < -FRAC_PI_2 {
        -(PI + e).sin()
    } else {
        e.sin()
    }
}

/// Iterates `e_{n} = e_{n-1} - alpha_n sin(e_{n-1})` with `alpha_n` from `cf`.
pub fn heading_recursion(theta0_tilde: f64, cf: &RiccatiClosedForm) -> HeadingRecursionTrace {
    assert!(
        theta0_tilde.abs() <= std::f64::consts::PI,
        "initial error must lie in [-pi, pi]"
    );
    let alpha = alpha_sequence(cf);
    let mut theta_tilde = Vec::with_capacity(cf.len());
    let mut e = theta0_tilde;
    theta_tilde.push(e);
    for (n, &a) in alpha.iter().enumerate().skip(1) {
        e = if e.abs() < SMALL_ERROR {
            // (1 - a) e + a (e - sin e) keeps relative precision as e -> 0.
            alpha_complement(cf, n) * e + a * x_minus_sin(e)
        } else {
            e - a * reduced_sin(e)
        };
        theta_tilde.push(e);
    }
    HeadingRecursionTrace { theta_tilde, alpha }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Least-squares line through `(ln n, ln value)`.
pub fn fit_rate(ns: &[f64], values: &[f64]) -> Result<RateFit, AnalysisError> {
    assert_eq!(
        ns.len(),
        values.len(),
        "abscissae and samples differ in length"
    );
    if ns.len() < 2 {
        return Err(AnalysisError::TooFewSamples(ns.len()));
    }
    for (index, (&n, &value)) in ns.iter().zip(values).enumerate() {
        if value.is_nan() || value <= 0.0 {
            return Err(AnalysisError::NonPositiveSample { index, value });
        }
        if n.is_nan() || n <= 0.0 {
            return Err(AnalysisError::NonPositiveSample { index, value: n });
        }
    }
    let m = ns.len() as f64;
    let xs: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// Fits the samples whose index `n` lies in `[lo, hi]`.
pub fn fit_rate_window(values: &[f64], lo: usize, hi: usize) -> Result<RateFit, AnalysisError> {
    let hi = hi.min(values.len().saturating_sub(1));
    let ns: Vec<f64> = (lo..=hi).map(|n| n as f64).collect();
    fit_rate(&ns, &values[lo..=hi])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossRow {
    pub n: usize,
    pub filter_heading_error: f64,
    pub scalar_heading_error: f64,
    pub gain_row: [f64; 2],
    pub gain_row_closed: [f64; 2],
    pub innovation: [f64; 2],
    pub innovation_closed: [f64; 2],
    pub position_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub rows: Vec<CrossRow>,
    pub max_heading_diff: f64,
    pub max_gain_diff: f64,
    pub max_innovation_diff: f64,
}

/// Replays the scalar theory alongside an invariant-filter trace on a
/// straight-line, noise-free scenario and reports the per-update mismatch.
pub fn cross_validate_iekf(
    traj: &Trajectory,
    trace: &EstimateTrace,
    p0: f64,
) -> Result<CrossValidation, AnalysisError> {
    let mismatch = |m: &str| Err(AnalysisError::ScenarioMismatch(m.to_string()));
    if trace.kind != FilterKind::Iekf {
        return mismatch("trace was not produced by the invariant filter");
    }
    if traj.inputs.is_empty() || traj.measurements.is_empty() {
        return mismatch("no motion or no position fixes");
    }
    let u = traj.inputs[0].u;
    if traj.inputs.iter().any(|i| {
        i.omega != 0.0 || i.u != u || i.w_omega != 0.0 || i.w_x != nalgebra::Vector2::zeros()
    }) {
        return mismatch("needs omega = 0, constant u and exact odometry");
    }
    if u.is_nan() || u <= 0.0 {
        return mismatch("needs u > 0");
    }
    let r = traj.measurements[0].cov[(0, 0)];
    for m in &traj.measurements {
        let c = &m.cov;
        if c[(0, 0)] != r || c[(1, 1)] != r || c[(0, 1)] != 0.0 || c[(1, 0)] != 0.0 {
            return mismatch("needs isotropic and constant fix covariance");
        }
        if m.y != traj.states[m.step].position {
            return mismatch("needs noise-free position fixes");
        }
    }
    let mut expected_p0 = nalgebra::Matrix3::zeros();
    expected_p0[(0, 0)] = p0;
    if trace.initial.cov != expected_p0 || trace.initial.mean.pos != nalgebra::Vector2::zeros() {
        return mismatch("needs P0 = diag(p0, 0, 0) and a known initial position");
    }
    if trace.records.len() != traj.steps() {
        return mismatch("trace and trajectory lengths differ");
    }

    let n_updates = traj.measurements.len();
    let cf = riccati_a_sequence(p0, r, u * traj.meas_period, n_updates);
    let theta0_tilde = trace.initial.mean.heading() - traj.states[0].heading;
    let scalar = heading_recursion(
        theta0_tilde.clamp(-std::f64::consts::PI, std::f64::consts::PI),
        &cf,
    );

    let mut rows = Vec::with_capacity(n_updates);
    let (mut mh, mut mg, mut mz) = (0.0_f64, 0.0_f64, 0.0_f64);
    for (i, m) in traj.measurements.iter().enumerate() {
        let n = i + 1;
        let rec = &trace.records[m.step - 1];
        let (Some(gain), Some(z)) = (rec.gain, rec.innovation) else {
            return mismatch("trace has no update at a fix");
        };
        let s = u * m.time;
        let a = cf.prior(n);
        let e = scalar.theta_tilde[n - 1];
        let gain_row_closed = [0.0, s * a / (s * s * a + cf.r)];
        let innovation_closed = [s * (e.cos() - 1.0), -s * e.sin()];
        let row = CrossRow {
            n,
            filter_heading_error: rec.heading_error,
            scalar_heading_error: scalar.theta_tilde[n],
            gain_row: [gain[(0, 0)], gain[(0, 1)]],
            gain_row_closed,
            innovation: [z[0], z[1]],
            innovation_closed,
            position_error: rec.position_error,
        };
        mh = mh.max((row.filter_heading_error - row.scalar_heading_error).abs());
        mg = mg.max(
            (row.gain_row[0] - gain_row_closed[0])
                .abs()
                .max((row.gain_row[1] - gain_row_closed[1]).abs()),
        );
        mz = mz.max(
            (row.innovation[0] - innovation_closed[0])
                .abs()
                .max((row.innovation[1] - innovation_closed[1]).abs()),
        );
        rows.push(row);
    }
    Ok(CrossValidation {
        rows,
        max_heading_diff: mh,
        max_gain_diff: mg,
        max_innovation_diff: mz,
    })
}

/// Writes `n,a_n,alpha_n,theta_tilde,theta_tilde_scaled_n3`.
pub fn write_report<W: Write>(
    cf: &RiccatiClosedForm,
    rec: &HeadingRecursionTrace,
    mut w: W,
) -> io::Result<()> {
    writeln!(w, "n,a_n,alpha_n,theta_tilde,theta_tilde_scaled_n3")?;
    for n in 0..cf.len() {
        let alpha = if n == 0 { f64::NAN } else { rec.alpha[n] };
        let e = rec.theta_tilde[n];
        let nf = n as f64;
        writeln!(
            w,
            "{},{},{},{},{}",
            n,
            cf.closed[n],
            alpha,
            e,
            e * nf * nf * nf
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn first_update_by_hand() {
        let cf = riccati_a_sequence(PI / 2.0, 1.0, 1.0, 1);
        assert_eq!(cf.closed[0], PI / 2.0);
        assert_relative_eq!(cf.closed[1], 1.0 / (2.0 / PI + 1.0), epsilon = 1e-15);
        assert_relative_eq!(cf.closed[1], 0.611_02, epsilon = 1e-5);
        let alpha = alpha_sequence(&cf);
        assert_relative_eq!(alpha[1], (PI / 2.0) / (PI / 2.0 + 1.0), epsilon = 1e-15);
    }

    #[test]
    fn recursion_matches_pyramidal_form() {
        for &(p0, r, dt) in &[(PI / 2.0, 1.0, 1.0), (0.3, 0.01, 0.05), (2.0, 5.0, 0.2)] {
            let cf = riccati_a_sequence(p0, r, dt, 20_000);
            assert!(
                cf.max_relative_error() < 1e-12,
                "{}",
                cf.max_relative_error()
            );
            assert!(cf.closed.windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn alpha_behaves_like_three_over_n() {
        let cf = riccati_a_sequence(PI / 2.0, 1.0, 1.0, 10_000);
        let alpha = alpha_sequence(&cf);
        assert!(alpha[1..].iter().all(|&a| a > 0.0 && a < 1.0));
        for n in [100usize, 1000, 10_000] {
            let dev = (n as f64 * alpha[n] - 3.0).abs();
            assert!(dev * n as f64 <= 10.0, "n = {n}, |n alpha - 3| = {dev}");
        }
    }

    #[test]
    fn heading_fixed_points() {
        let cf = riccati_a_sequence(PI / 2.0, 1.0, 1.0, 500);
        assert!(heading_recursion(0.0, &cf)
            .theta_tilde
            .iter()
            .all(|&e| e == 0.0));
        let anti = heading_recursion(PI, &cf);
        assert!(anti.theta_tilde.iter().all(|&e| e == PI));
        let neg = heading_recursion(-PI, &cf);
        assert!(neg.theta_tilde.iter().all(|&e| e == -PI));
    }

    #[test]
    fn heading_error_decays_like_cubic() {
        let cf = riccati_a_sequence(PI / 2.0, 1.0, 1.0, 20_000);
        let rec = heading_recursion(40f64.to_radians(), &cf);
        assert!(rec.is_monotone());
        let fit = fit_rate_window(&rec.theta_tilde, 2_000, 20_000).unwrap();
        assert!((fit.slope + 3.0).abs() < 0.05, "{}", fit.slope);
        let c1 = rec.theta_tilde[10_000] * 1e12;
        let c2 = rec.theta_tilde[20_000] * 8e12;
        assert!(c1 > 0.0 && ((c2 - c1) / c1).abs() < 1e-2);
    }

    #[test]
    fn fit_recovers_power_laws() {
        let ns: Vec<f64> = (1..=500).map(|n| n as f64).collect();
        let cube: Vec<f64> = ns.iter().map(|n| n.powi(-3)).collect();
        let fit = fit_rate(&ns, &cube).unwrap();
        assert_relative_eq!(fit.slope, -3.0, epsilon = 1e-9);
        let sq: Vec<f64> = ns.iter().map(|n| 7.0 / (n * n)).collect();
        let fit = fit_rate(&ns, &sq).unwrap();
        assert_relative_eq!(fit.slope, -2.0, epsilon = 1e-9);
        assert_relative_eq!(fit.intercept, 7f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn fit_rejects_non_positive() {
        let err = fit_rate(&[1.0, 2.0, 3.0], &[1.0, 0.0, 2.0]).unwrap_err();
        assert_eq!(
            err,
            AnalysisError::NonPositiveSample {
                index: 1,
                value: 0.0
            }
        );
        assert!(matches!(
            fit_rate(&[1.0], &[1.0]),
            Err(AnalysisError::TooFewSamples(1))
        ));
    }

    #[test]
    fn small_angle_helper_is_accurate() {
        for &x in &[1e-9, 1e-5, 3e-3, 9.9e-3, 1e-2, 0.5] {
            let series = x_minus_sin(x);
            let direct = x - x.sin();
            if x > 1e-3 {
                assert_relative_eq!(series, direct, max_relative = 1e-9);
            }
            assert!(series > 0.0);
        }
    }

    #[test]
    fn report_has_one_row_per_update() {
        let cf = riccati_a_sequence(1.0, 1.0, 1.0, 5);
        let rec = heading_recursion(0.3, &cf);
        let mut buf = Vec::new();
        write_report(&cf, &rec, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(
            text.starts_with("n,a_n,alpha_n,theta_tilde,theta_tilde_scaled_n3\n0,1,NaN,0.3,0\n")
        );
    }
}
