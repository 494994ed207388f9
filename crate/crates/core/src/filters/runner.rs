use std::io::{self, Write};

use nalgebra::{Matrix3, Matrix3x2, Vector2, Vector3};

use super::{
    ekf, iekf, ErrorConvention, FilterConfig, FilterError, StateEstimate, DEFAULT_HEADING_VARIANCE,
};
use crate::se2::Se2;
use crate::sim::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Ekf,
    Iekf,
}

impl FilterKind {
    pub fn convention(self) -> ErrorConvention {
        match self {
            FilterKind::Ekf => ErrorConvention::Linear,
            FilterKind::Iekf => ErrorConvention::LeftInvariant,
        }
    }

    pub fn propagate(
        self,
        est: &StateEstimate,
        omega: f64,
        u: f64,
        dt: f64,
        config: &FilterConfig,
    ) -> StateEstimate {
        match self {
            FilterKind::Ekf => ekf::propagate(est, omega, u, dt, config),
            FilterKind::Iekf => iekf::propagate(est, omega, u, dt, config),
        }
    }

    pub fn update(
        self,
        est: &StateEstimate,
        y: &Vector2<f64>,
        noise: &nalgebra::Matrix2<f64>,
        config: &FilterConfig,
    ) -> Result<(StateEstimate, super::UpdateInfo), FilterError> {
        match self {
            FilterKind::Ekf => ekf::update(est, y, noise, config),
            FilterKind::Iekf => iekf::update(est, y, noise, config),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub initial_mean: Se2,
    pub p0: Matrix3<f64>,
    pub config: FilterConfig,
}

impl RunOptions {
    /// Known position at the origin, heading guess `theta0_hat`,
    /// `P0 = diag(pi/2, 0, 0)`.
    pub fn with_heading(theta0_hat: f64) -> Self {
        Self {
            initial_mean: Se2::new(theta0_hat, 0.0, 0.0),
            p0: Matrix3::from_diagonal(&Vector3::new(DEFAULT_HEADING_VARIANCE, 0.0, 0.0)),
            config: FilterConfig::default(),
        }
    }
}

/// Filter state after one simulation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    pub t: f64,
    pub mean: Se2,
    pub cov: Matrix3<f64>,
    pub innovation: Option<Vector2<f64>>,
    pub gain: Option<Matrix3x2<f64>>,
    pub manifold_residual: f64,
    /// `theta_hat - theta`, not wrapped.
    pub heading_error: f64,
    pub position_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateTrace {
    pub kind: FilterKind,
    pub initial: StateEstimate,
    pub records: Vec<TraceRecord>,
}

impl EstimateTrace {
    pub fn final_record(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn max_manifold_residual(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.manifold_residual)
            .fold(0.0, f64::max)
    }

    pub fn updates(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(|r| r.innovation.is_some())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        write_trace_csv(&self.records, w)
    }
}

/// Writes `t,theta_hat,x1_hat,x2_hat,err_theta,err_pos,manifold_resid,P11,P12,P13,P22,P23,P33,gain_norm`.
pub fn write_trace_csv<W: Write>(records: &[TraceRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "t,theta_hat,x1_hat,x2_hat,err_theta,err_pos,manifold_resid,P11,P12,P13,P22,P23,P33,gain_norm")?;
    for r in records {
        let p = &r.cov;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.mean.heading(),
            r.mean.pos[0],
            r.mean.pos[1],
            r.heading_error,
            r.position_error,
            r.manifold_residual,
            p[(0, 0)],
            p[(0, 1)],
            p[(0, 2)],
            p[(1, 1)],
            p[(1, 2)],
            p[(2, 2)],
            r.gain.map_or(0.0, |g| g.norm()),
        )?;
    }
    Ok(())
}

/// Runs a filter over a simulated trajectory, one record per step.
pub fn run_filter(
    kind: FilterKind,
    traj: &Trajectory,
    opts: &RunOptions,
) -> Result<EstimateTrace, FilterError> {
    let initial = StateEstimate::new(opts.initial_mean, opts.p0, kind.convention());
    let mut est = initial;
    let mut records = Vec::with_capacity(traj.steps());
    for (k, input) in traj.inputs.iter().enumerate() {
        let step = k + 1;
        est = kind.propagate(&est, input.omega, input.u, traj.dt, &opts.config);
        let mut innovation = None;
        let mut gain = None;
        if let Some(m) = traj.measurement_at(step) {
            let (next, info) =
                kind.update(&est, &m.y, &m.cov, &opts.config)
                    .map_err(|e| FilterError::AtStep {
                        step,
                        source: Box::new(e),
                    })?;
            est = next;
            innovation = Some(info.innovation);
            gain = Some(info.gain);
        }
        let truth = &traj.states[step];
        records.push(TraceRecord {
            step,
            t: truth.time,
            mean: est.mean,
            cov: est.cov,
            innovation,
            gain,
            manifold_residual: est.manifold_residual(&traj.reference[step]),
            heading_error: est.mean.heading() - truth.heading,
            position_error: (est.mean.pos - truth.position).norm(),
        });
    }
    Ok(EstimateTrace {
        kind,
        initial,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate, Profile, ScenarioConfig};

    fn scenario() -> ScenarioConfig {
        ScenarioConfig {
            duration: 2.0,
            omega_profile: Profile::Sinusoid {
                offset: 0.1,
                amplitude: 0.3,
                frequency: 0.5,
                phase: 0.0,
            },
            gps_noise: false,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn exact_start_stays_exact() {
        let traj = simulate(&scenario(), 1).unwrap();
        for kind in [FilterKind::Ekf, FilterKind::Iekf] {
            let trace = run_filter(kind, &traj, &RunOptions::with_heading(0.0)).unwrap();
            assert_eq!(trace.records.len(), traj.steps());
            for r in &trace.records {
                assert!(r.heading_error.abs() < 1e-12);
                assert!(r.position_error < 1e-12);
            }
        }
    }

    #[test]
    fn records_updates_at_measurement_steps() {
        let traj = simulate(&scenario(), 1).unwrap();
        let trace = run_filter(FilterKind::Iekf, &traj, &RunOptions::with_heading(0.5)).unwrap();
        assert_eq!(trace.updates().count(), traj.measurements.len());
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), traj.steps() + 1);
        assert!(text.starts_with("t,theta_hat,"));
    }

    #[test]
    fn errors_carry_the_step() {
        let mut traj = simulate(&scenario(), 1).unwrap();
        for m in &mut traj.measurements {
            m.cov = nalgebra::Matrix2::zeros();
        }
        let mut opts = RunOptions::with_heading(0.0);
        opts.p0 = Matrix3::zeros();
        let err = run_filter(FilterKind::Ekf, &traj, &opts).unwrap_err();
        assert!(matches!(err, FilterError::AtStep { step, .. } if step == traj.meas_every));
    }
}
