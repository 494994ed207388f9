//! Ground truth, odometry and position-fix generation for the planar car.
//!
//! All randomness in the crate lives here. A scenario plus a seed fully
//! determines a [`Trajectory`].

use std::f64::consts::PI;
use std::io::{self, Write};

use nalgebra::{Matrix2, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::se2::{b_matrix, Rotation2, Se2, Tangent3};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("bad scenario configuration: {0}")]
    BadConfig(String),
    #[error("could not parse scenario file: {0}")]
    Parse(#[from] toml::de::Error),
}

/// Time profile for an odometry channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Profile {
    Constant {
        value: f64,
    },
    Sinusoid {
        #[serde(default)]
        offset: f64,
        amplitude: f64,
        /// Hz
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `(start_time, value)` pairs sorted by start time; the value holds until
    /// the next breakpoint.
    Piecewise {
        breakpoints: Vec<(f64, f64)>,
    },
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile::Constant { value }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::Sinusoid {
                offset,
                amplitude,
                frequency,
                phase,
            } => offset + amplitude * (2.0 * PI * frequency * t + phase).sin(),
            Profile::Piecewise { breakpoints } => breakpoints
                .iter()
                .take_while(|(start, _)| *start <= t)
                .last()
                .map(|(_, v)| *v)
                .unwrap_or(0.0),
        }
    }

    fn validate(&self, name: &str) -> Result<(), SimError> {
        if let Profile::Piecewise { breakpoints } = self {
            if breakpoints.is_empty() {
                return Err(SimError::BadConfig(format!(
                    "{name}: empty piecewise profile"
                )));
            }
            if breakpoints.windows(2).any(|w| w[1].0 < w[0].0) {
                return Err(SimError::BadConfig(format!(
                    "{name}: piecewise breakpoints must be sorted"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    /// Compose with `exp((omega dt, u dt, 0))` each step.
    #[default]
    Exact,
    /// `theta += omega dt`, `x += R(theta) (u dt, 0)`.
    Euler,
}

fn default_dt() -> f64 {
    0.01
}
fn default_duration() -> f64 {
    10.0
}
fn default_meas_period() -> f64 {
    0.05
}
fn default_omega() -> Profile {
    Profile::constant(0.0)
}
fn default_u() -> Profile {
    Profile::constant(1.0)
}
fn default_gps_cov() -> f64 {
    1.0
}

/// Declarative description of one simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_meas_period")]
    pub meas_period: f64,
    #[serde(default = "default_omega")]
    pub omega_profile: Profile,
    #[serde(default = "default_u")]
    pub u_profile: Profile,
    /// Position-fix variance `r`; the covariance is `r I2`.
    #[serde(default = "default_gps_cov")]
    pub gps_cov: f64,
    /// Velocity-noise variances `[omega (rad/s)^2, x (m/s)^2]`.
    #[serde(default)]
    pub odom_cov: [f64; 2],
    /// Draw position-fix noise. When false `y = x` exactly.
    #[serde(default)]
    pub gps_noise: bool,
    /// Perturb the true motion with odometry noise.
    #[serde(default)]
    pub odom_noise: bool,
    #[serde(default)]
    pub theta0: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub integrator: Integrator,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            duration: default_duration(),
            meas_period: default_meas_period(),
            omega_profile: default_omega(),
            u_profile: default_u(),
            gps_cov: default_gps_cov(),
            odom_cov: [0.0, 0.0],
            gps_noise: false,
            odom_noise: false,
            theta0: 0.0,
            seed: 0,
            integrator: Integrator::Exact,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// Number of simulation steps between two position fixes.
    pub fn meas_every(&self) -> Result<usize, SimError> {
        let ratio = self.meas_period / self.dt;
        let k = ratio.round();
        if k < 1.0 || (ratio - k).abs() > 1e-9 * ratio.max(1.0) {
            return Err(SimError::BadConfig(format!(
                "meas_period {} is not a positive integer multiple of dt {}",
                self.meas_period, self.dt
            )));
        }
        Ok(k as usize)
    }

    pub fn gps_covariance(&self) -> Matrix2<f64> {
        Matrix2::identity() * self.gps_cov
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.dt.is_nan() || self.dt <= 0.0 || !self.dt.is_finite() {
            return Err(SimError::BadConfig(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.duration.is_nan() || self.duration < 0.0 {
            return Err(SimError::BadConfig(format!(
                "duration must be non-negative, got {}",
                self.duration
            )));
        }
        self.meas_every()?;
        if self.gps_cov.is_nan() || self.gps_cov < 0.0 {
            return Err(SimError::BadConfig(format!(
                "gps_cov has a negative eigenvalue ({})",
                self.gps_cov
            )));
        }
        if self.odom_cov.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(SimError::BadConfig(format!(
                "odom_cov has a negative eigenvalue ({:?})",
                self.odom_cov
            )));
        }
        self.omega_profile.validate("omega_profile")?;
        self.u_profile.validate("u_profile")?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarState {
    pub time: f64,
    pub heading: f64,
    pub position: Vector2<f64>,
}

impl CarState {
    pub fn pose(&self) -> Se2 {
        Se2::from_parts(self.heading, self.position)
    }
}

/// Odometry for one step, held constant over `[t_k, t_k + dt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryInput {
    pub omega: f64,
    pub u: f64,
    /// Noise that perturbed the true increment (zero when noise is off).
    pub w_omega: f64,
    pub w_x: Vector2<f64>,
}

impl OdometryInput {
    /// The nominal increment `exp((omega dt, u dt, 0))` seen by estimators.
    pub fn increment(&self, dt: f64) -> Se2 {
        Se2::exp(&Tangent3::new(self.omega * dt, self.u * dt, 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpsMeasurement {
    pub step: usize,
    pub time: f64,
    pub y: Vector2<f64>,
    pub cov: Matrix2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<CarState>,
    pub inputs: Vec<OdometryInput>,
    pub measurements: Vec<GpsMeasurement>,
    /// `b_t` sampled at every state.
    pub reference: Vec<Vector2<f64>>,
    pub dt: f64,
    pub meas_period: f64,
    pub meas_every: usize,
    meas_lookup: Vec<Option<usize>>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.inputs.len()
    }

    pub fn measurement_at(&self, step: usize) -> Option<&GpsMeasurement> {
        self.meas_lookup
            .get(step)
            .copied()
            .flatten()
            .map(|i| &self.measurements[i])
    }

    /// Rigidly moves the whole scenario by `gamma`: poses become `gamma * pose`
    /// and position fixes `gamma . y`. The reference curve is body-frame and
    /// does not change.
    pub fn left_transform(&self, gamma: &Se2) -> Trajectory {
        let rot = gamma.rotation_matrix();
        let mut out = self.clone();
        for s in &mut out.states {
            let p = gamma.compose(&s.pose());
            s.heading = p.heading();
            s.position = p.pos;
        }
        for m in &mut out.measurements {
            m.y = gamma.act(&m.y);
            m.cov = rot * m.cov * rot.transpose();
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,theta,x1,x2,b1,b2,omega,u,meas_flag,y1,y2")?;
        for (k, s) in self.states.iter().enumerate() {
            let b = self.reference[k];
            let (omega, u) = self
                .inputs
                .get(k)
                .map(|i| (i.omega, i.u))
                .unwrap_or((f64::NAN, f64::NAN));
            let (flag, y1, y2) = match self.measurement_at(k) {
                Some(m) => (1, m.y[0], m.y[1]),
                None => (0, f64::NAN, f64::NAN),
            };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                s.time, s.heading, s.position[0], s.position[1], b[0], b[1], omega, u, flag, y1, y2
            )?;
        }
        Ok(())
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// One step of the reference curve `b' = -omega J b + (u, 0)`, using the
/// discretisation that matches `integrator`.
pub fn reference_step(
    b: &Vector2<f64>,
    omega: f64,
    u: f64,
    dt: f64,
    integrator: Integrator,
) -> Vector2<f64> {
    let back = Rotation2::new(-omega * dt);
    match integrator {
        Integrator::Exact => back.rotate(b) + b_matrix(-omega * dt) * Vector2::new(u * dt, 0.0),
        Integrator::Euler => back.rotate(&(b + Vector2::new(u * dt, 0.0))),
    }
}

/// Advances a pose by one odometry step with the given integrator.
pub fn integrate_pose(pose: &Se2, omega: f64, u: f64, dt: f64, integrator: Integrator) -> Se2 {
    match integrator {
        Integrator::Exact => pose.retract(&Tangent3::new(omega * dt, u * dt, 0.0)),
        Integrator::Euler => Se2::from_parts(
            pose.heading() + omega * dt,
            pose.pos + pose.rot.rotate(&Vector2::new(u * dt, 0.0)),
        ),
    }
}

/// Simulates a scenario. The car starts at the origin with heading `theta0`.
pub fn simulate(cfg: &ScenarioConfig, seed: u64) -> Result<Trajectory, SimError> {
    cfg.validate()?;
    let meas_every = cfg.meas_every()?;
    let steps = cfg.steps();
    let dt = cfg.dt;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma_omega = cfg.odom_cov[0].sqrt();
    let sigma_x = cfg.odom_cov[1].sqrt();
    let sigma_gps = cfg.gps_cov.sqrt();
    let gps_cov = cfg.gps_covariance();

    let mut pose = Se2::new(cfg.theta0, 0.0, 0.0);
    let mut b = Vector2::zeros();
    let mut states = Vec::with_capacity(steps + 1);
    let mut reference = Vec::with_capacity(steps + 1);
    let mut inputs = Vec::with_capacity(steps);
    let mut measurements = Vec::new();
    let mut meas_lookup = vec![None; steps + 1];

    states.push(CarState {
        time: 0.0,
        heading: pose.heading(),
        position: pose.pos,
    });
    reference.push(b);

    for k in 0..steps {
        let t = k as f64 * dt;
        let omega = cfg.omega_profile.eval(t);
        let u = cfg.u_profile.eval(t);
        let (w_omega, w_x) = if cfg.odom_noise {
            let wo = sigma_omega * dt * normal(&mut rng);
            let wx = Vector2::new(
                sigma_x * dt * normal(&mut rng),
                sigma_x * dt * normal(&mut rng),
            );
            (wo, wx)
        } else {
            (0.0, Vector2::zeros())
        };
        pose = integrate_pose(&pose, omega, u, dt, cfg.integrator);
        if cfg.odom_noise {
            pose = pose.retract(&Tangent3 {
                theta: w_omega,
                x: w_x,
            });
        }
        b = reference_step(&b, omega, u, dt, cfg.integrator);
        inputs.push(OdometryInput {
            omega,
            u,
            w_omega,
            w_x,
        });

        let step = k + 1;
        let time = step as f64 * dt;
        states.push(CarState {
            time,
            heading: pose.heading(),
            position: pose.pos,
        });
        reference.push(b);

        if step % meas_every == 0 {
            let noise = if cfg.gps_noise {
                Vector2::new(sigma_gps * normal(&mut rng), sigma_gps * normal(&mut rng))
            } else {
                Vector2::zeros()
            };
            meas_lookup[step] = Some(measurements.len());
            measurements.push(GpsMeasurement {
                step,
                time,
                y: pose.pos + noise,
                cov: gps_cov,
            });
        }
    }

    Ok(Trajectory {
        states,
        inputs,
        measurements,
        reference,
        dt,
        meas_period: cfg.meas_period,
        meas_every,
        meas_lookup,
    })
}

/// Maximum over the run of `|R(theta)^T x - b|` for the true states.
pub fn reference_residual(traj: &Trajectory) -> f64 {
    traj.states
        .iter()
        .zip(&traj.reference)
        .map(|(s, b)| (Rotation2::new(-s.heading).rotate(&s.position) - b).norm())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraveledDistance {
    /// Arc length of the position polyline.
    pub polyline: f64,
    /// Trapezoidal integral of the speed samples.
    pub odometric: f64,
}

/// Distance travelled along `positions`, and the odometer integral of `speeds`
/// sampled every `dt`.
pub fn traveled_distance(positions: &[Vector2<f64>], speeds: &[f64], dt: f64) -> TraveledDistance {
    let polyline = positions.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    let odometric = speeds.windows(2).map(|w| 0.5 * (w[0] + w[1]) * dt).sum();
    TraveledDistance {
        polyline,
        odometric,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn scenario(omega: Profile, duration: f64) -> ScenarioConfig {
        ScenarioConfig {
            omega_profile: omega,
            duration,
            ..Default::default()
        }
    }

    /// Classical RK4 on the continuous car and reference equations.
    fn rk4_oracle(
        omega: f64,
        u: f64,
        theta0: f64,
        dt: f64,
        steps: usize,
    ) -> (Vector3<f64>, Vector2<f64>) {
        let f = |s: &[f64; 5]| -> [f64; 5] {
            let (th, b1, b2) = (s[0], s[3], s[4]);
            [
                omega,
                th.cos() * u,
                th.sin() * u,
                omega * b2 + u,
                -omega * b1,
            ]
        };
        let mut s = [theta0, 0.0, 0.0, 0.0, 0.0];
        for _ in 0..steps {
            let k1 = f(&s);
            let add = |a: &[f64; 5], k: &[f64; 5], h: f64| {
                let mut o = *a;
                for i in 0..5 {
                    o[i] += h * k[i];
                }
                o
            };
            let k2 = f(&add(&s, &k1, dt / 2.0));
            let k3 = f(&add(&s, &k2, dt / 2.0));
            let k4 = f(&add(&s, &k3, dt));
            for i in 0..5 {
                s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        (Vector3::new(s[0], s[1], s[2]), Vector2::new(s[3], s[4]))
    }

    #[test]
    fn straight_line_ends_on_heading_ray() {
        let theta0 = 0.8;
        let cfg = ScenarioConfig {
            theta0,
            ..scenario(Profile::constant(0.0), 10.0)
        };
        let traj = simulate(&cfg, 0).unwrap();
        let last = traj.states.last().unwrap();
        let expected = Rotation2::new(theta0).rotate(&Vector2::new(10.0, 0.0));
        assert_relative_eq!(last.position, expected, epsilon = 1e-10);
        assert_relative_eq!(
            *traj.reference.last().unwrap(),
            Vector2::new(10.0, 0.0),
            epsilon = 1e-10
        );
        assert_eq!(last.heading, theta0);
    }

    #[test]
    fn reference_identity_holds_against_rk4() {
        let cfg = ScenarioConfig {
            dt: 1e-3,
            meas_period: 5e-3,
            theta0: 0.3,
            ..scenario(Profile::constant(0.1), 10.0)
        };
        let traj = simulate(&cfg, 1).unwrap();
        assert!(reference_residual(&traj) < 1e-8);
        let (state, b) = rk4_oracle(0.1, 1.0, 0.3, 1e-3, cfg.steps());
        let last = traj.states.last().unwrap();
        assert_relative_eq!(last.heading, state[0], epsilon = 1e-9);
        assert_relative_eq!(
            last.position,
            Vector2::new(state[1], state[2]),
            epsilon = 1e-9
        );
        assert_relative_eq!(*traj.reference.last().unwrap(), b, epsilon = 1e-9);
    }

    #[test]
    fn reference_identity_holds_for_sinusoid_and_euler() {
        let omega = Profile::Sinusoid {
            offset: 0.05,
            amplitude: 0.4,
            frequency: 0.1,
            phase: 0.0,
        };
        for integrator in [Integrator::Exact, Integrator::Euler] {
            let cfg = ScenarioConfig {
                integrator,
                theta0: -1.0,
                ..scenario(omega.clone(), 50.0)
            };
            let traj = simulate(&cfg, 2).unwrap();
            assert!(reference_residual(&traj) < 1e-10, "{integrator:?}");
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let cfg = ScenarioConfig {
            gps_noise: true,
            odom_noise: true,
            odom_cov: [0.01, 0.1],
            ..scenario(Profile::constant(0.2), 5.0)
        };
        let a = simulate(&cfg, 42).unwrap();
        let b = simulate(&cfg, 42).unwrap();
        assert_eq!(a, b);
        let mut ba = Vec::new();
        let mut bb = Vec::new();
        a.write_csv(&mut ba).unwrap();
        b.write_csv(&mut bb).unwrap();
        assert_eq!(ba, bb);
        let c = simulate(&cfg, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noise_free_mode_has_exact_fixes_and_zero_draws() {
        let traj = simulate(&scenario(Profile::constant(0.3), 2.0), 9).unwrap();
        assert!(traj
            .inputs
            .iter()
            .all(|i| i.w_omega == 0.0 && i.w_x == Vector2::zeros()));
        for m in &traj.measurements {
            assert_eq!(m.y, traj.states[m.step].position);
        }
    }

    #[test]
    fn measurement_times_are_multiples_of_period() {
        let cfg = scenario(Profile::constant(0.0), 1.0);
        let traj = simulate(&cfg, 0).unwrap();
        assert_eq!(traj.meas_every, 5);
        assert_eq!(traj.measurements.len(), 20);
        for (n, m) in traj.measurements.iter().enumerate() {
            assert_eq!(m.step, 5 * (n + 1));
            assert_relative_eq!(m.time, 0.05 * (n + 1) as f64, epsilon = 1e-12);
        }
        assert!(traj.measurement_at(0).is_none());
        assert!(traj.measurement_at(5).is_some());
        assert!(traj.measurement_at(6).is_none());
    }

    #[test]
    fn bad_configs_are_rejected() {
        let cfg = ScenarioConfig {
            meas_period: 0.033,
            ..Default::default()
        };
        assert!(matches!(simulate(&cfg, 0), Err(SimError::BadConfig(_))));
        let cfg = ScenarioConfig {
            gps_cov: -1.0,
            ..Default::default()
        };
        assert!(matches!(simulate(&cfg, 0), Err(SimError::BadConfig(_))));
        let cfg = ScenarioConfig {
            odom_cov: [0.1, -0.1],
            ..Default::default()
        };
        assert!(simulate(&cfg, 0).is_err());
        let cfg = ScenarioConfig {
            dt: 0.0,
            ..Default::default()
        };
        assert!(simulate(&cfg, 0).is_err());
    }

    #[test]
    fn parses_toml_scenario() {
        let text = r#"
            dt = 0.02
            duration = 4.0
            meas_period = 0.1
            gps_cov = 0.5
            odom_cov = [0.01, 0.1]
            theta0 = 0.7
            seed = 3
            gps_noise = true
            omega_profile = { kind = "sinusoid", amplitude = 0.3, frequency = 0.2 }
            u_profile = { kind = "piecewise", breakpoints = [[0.0, 1.0], [2.0, 2.0]] }
        "#;
        let cfg = ScenarioConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.meas_every().unwrap(), 5);
        assert_eq!(cfg.u_profile.eval(1.0), 1.0);
        assert_eq!(cfg.u_profile.eval(3.0), 2.0);
        assert!(ScenarioConfig::from_toml_str("bogus = 1").is_err());
        assert!(ScenarioConfig::from_toml_str("meas_period = 0.013").is_err());
    }

    #[test]
    fn csv_has_expected_header_and_rows() {
        let traj = simulate(&scenario(Profile::constant(0.0), 0.1), 0).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,theta,x1,x2,b1,b2,omega,u,meas_flag,y1,y2"
        );
        assert_eq!(lines.count(), traj.states.len());
    }

    #[test]
    fn traveled_distance_straight_and_circle() {
        let traj = simulate(&scenario(Profile::constant(0.0), 10.0), 0).unwrap();
        let pos: Vec<_> = traj.states.iter().map(|s| s.position).collect();
        let u: Vec<_> = traj.inputs.iter().map(|i| i.u).chain([1.0]).collect();
        let d = traveled_distance(&pos, &u, traj.dt);
        assert_relative_eq!(d.odometric, 10.0, epsilon = 1e-9);
        assert!((d.polyline - 10.0).abs() <= traj.dt);

        let mut prev = f64::INFINITY;
        for dt in [0.1, 0.01, 0.001] {
            let cfg = ScenarioConfig {
                dt,
                meas_period: dt,
                duration: 2.0 * PI,
                ..scenario(Profile::constant(1.0), 0.0)
            };
            let traj = simulate(&cfg, 0).unwrap();
            let pos: Vec<_> = traj.states.iter().map(|s| s.position).collect();
            let u = vec![1.0; pos.len()];
            let d = traveled_distance(&pos, &u, dt);
            let gap = (2.0 * PI - d.polyline).abs();
            assert!(d.polyline < d.odometric + 1e-12);
            assert!(gap < prev);
            prev = gap;
        }

        let still = vec![Vector2::new(1.0, 1.0); 5];
        let d = traveled_distance(&still, &[0.0; 5], 0.1);
        assert_eq!(d.polyline, 0.0);
        assert_eq!(d.odometric, 0.0);
    }

    #[test]
    fn left_transform_moves_poses_and_fixes() {
        let cfg = ScenarioConfig {
            gps_noise: true,
            ..scenario(Profile::constant(0.2), 1.0)
        };
        let traj = simulate(&cfg, 5).unwrap();
        let gamma = Se2::new(1.0, 3.0, -2.0);
        let moved = traj.left_transform(&gamma);
        for (a, b) in traj.states.iter().zip(&moved.states) {
            let expect = gamma.compose(&a.pose());
            assert_relative_eq!(b.position, expect.pos, epsilon = 1e-12);
        }
        for (a, b) in traj.measurements.iter().zip(&moved.measurements) {
            assert_relative_eq!(b.y, gamma.act(&a.y), epsilon = 1e-12);
        }
    }
}
