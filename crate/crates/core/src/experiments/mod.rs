//! Named experiments that reproduce the filter and smoother behaviours,
//! write plot-ready CSV files and score each claim against
//! [`thresholds`].

mod filtering;
mod report;
mod smoothing;
mod theory;
pub mod thresholds;

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::filters::FilterError;
use crate::sim::{ScenarioConfig, SimError};
use crate::smoothing::SmoothingError;

pub use report::{Bound, Check, Summary};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("unknown experiment `{0}`; run `list` to see the available ones")]
    UnknownExperiment(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Smoothing(#[from] SmoothingError),
    #[error("invalid option: {0}")]
    BadOption(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    Fig1Manifold,
    Fig2Odometer,
    Fig3Convergence,
    Thm3Residual,
    Thm4Rates,
    Prop1Linear,
    AppBCrosscheck,
    SmoothingBatch,
    SmoothingWindow,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Fig1Manifold,
        Experiment::Fig2Odometer,
        Experiment::Fig3Convergence,
        Experiment::Thm3Residual,
        Experiment::Thm4Rates,
        Experiment::Prop1Linear,
        Experiment::AppBCrosscheck,
        Experiment::SmoothingBatch,
        Experiment::SmoothingWindow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig1Manifold => "fig1-manifold",
            Experiment::Fig2Odometer => "fig2-odometer",
            Experiment::Fig3Convergence => "fig3-convergence",
            Experiment::Thm3Residual => "thm3-residual",
            Experiment::Thm4Rates => "thm4-rates",
            Experiment::Prop1Linear => "prop1-linear",
            Experiment::AppBCrosscheck => "appB-crosscheck",
            Experiment::SmoothingBatch => "smoothing-batch",
            Experiment::SmoothingWindow => "smoothing-window",
        }
    }

    /// One-line summary used by `list`.
    pub fn title(self) -> &'static str {
        match self {
            Experiment::Fig1Manifold => {
                "straight-line run: the invariant filter stays on the reachable curve, the EKF leaves it; frame-change invariance"
            }
            Experiment::Fig2Odometer => "distance travelled by each estimate versus the odometer integral",
            Experiment::Fig3Convergence => "long noise-free run: EKF error stalls, invariant filter error goes to zero",
            Experiment::Thm3Residual => "reachable-curve residual of the invariant filter over many headings, profiles and seeds",
            Experiment::Thm4Rates => "heading and position error decay rates on a straight line",
            Experiment::Prop1Linear => "linear Kalman filter keeps a deterministic linear constraint",
            Experiment::AppBCrosscheck => "closed-form gain sequence and scalar heading recursion against the full filter",
            Experiment::SmoothingBatch => "Gauss-Newton iterations to the cost plateau for the four parametrizations",
            Experiment::SmoothingWindow => "sliding-window smoothing from a large initial heading error",
        }
    }

    /// Scenario constants and checks, used by `describe`.
    pub fn description(self) -> String {
        match self {
            Experiment::Fig1Manifold => filtering::FIG1_DESCRIPTION.to_string(),
            Experiment::Fig2Odometer => filtering::FIG2_DESCRIPTION.to_string(),
            Experiment::Fig3Convergence => filtering::FIG3_DESCRIPTION.to_string(),
            Experiment::Thm3Residual => filtering::THM3_DESCRIPTION.to_string(),
            Experiment::Prop1Linear => filtering::PROP1_DESCRIPTION.to_string(),
            Experiment::Thm4Rates => theory::THM4_DESCRIPTION.to_string(),
            Experiment::AppBCrosscheck => theory::APPB_DESCRIPTION.to_string(),
            Experiment::SmoothingBatch => smoothing::BATCH_DESCRIPTION.to_string(),
            Experiment::SmoothingWindow => smoothing::WINDOW_DESCRIPTION.to_string(),
        }
    }

    /// Whether a scenario file replaces the default simulated scenario.
    pub fn accepts_scenario(self) -> bool {
        matches!(
            self,
            Experiment::Fig1Manifold
                | Experiment::Fig2Odometer
                | Experiment::Thm3Residual
                | Experiment::SmoothingBatch
                | Experiment::SmoothingWindow
        )
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ExperimentError::UnknownExperiment(s.to_string()))
    }
}

/// What to run and where to put the results.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    /// Replaces the default scenario of experiments that simulate one.
    pub scenario: Option<ScenarioConfig>,
    /// First seed; experiments with several seeds use `seed, seed + 1, ...`.
    pub seed: u64,
    /// Overrides the number of steps or updates.
    pub steps: Option<usize>,
    /// No files are written when `None`.
    pub out_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            scenario: None,
            seed: 0,
            steps: None,
            out_dir: None,
        }
    }

    fn steps_or(&self, default: usize) -> usize {
        self.steps.unwrap_or(default)
    }

    fn scenario_or(&self, default: ScenarioConfig) -> ScenarioConfig {
        self.scenario.clone().unwrap_or(default)
    }
}

/// Destination of the CSV files of one run.
pub(crate) struct Artifacts {
    dir: Option<PathBuf>,
}

impl Artifacts {
    fn new(dir: Option<&Path>) -> Result<Self, ExperimentError> {
        if let Some(d) = dir {
            fs::create_dir_all(d).map_err(|source| ExperimentError::Io {
                path: d.to_path_buf(),
                source,
            })?;
        }
        Ok(Self {
            dir: dir.map(Path::to_path_buf),
        })
    }

    pub(crate) fn enabled(&self) -> bool {
        self.dir.is_some()
    }

    /// Calls `body` with a buffered writer on `dir/name`; does nothing when
    /// no directory was given.
    pub(crate) fn write(
        &self,
        name: &str,
        body: impl FnOnce(&mut dyn Write) -> io::Result<()>,
    ) -> Result<(), ExperimentError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let path = dir.join(name);
        let io_err = |source| ExperimentError::Io {
            path: path.clone(),
            source,
        };
        let mut w = BufWriter::new(File::create(&path).map_err(io_err)?);
        body(&mut w).map_err(io_err)?;
        w.flush().map_err(io_err)
    }
}

/// About ten points per decade, from 1 to `n`.
pub(crate) fn log_samples(n: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..)
        .map(|k| 10f64.powf(k as f64 / 10.0).round() as usize)
        .take_while(|&k| k <= n)
        .collect();
    out.dedup();
    if out.last() != Some(&n) {
        out.push(n);
    }
    out
}

/// Runs one experiment. When an output directory is given, CSV files and the
/// two summary files are written to `out_dir/<experiment>/`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Summary, ExperimentError> {
    if spec.scenario.is_some() && !spec.experiment.accepts_scenario() {
        return Err(ExperimentError::BadOption(format!(
            "{} uses fixed analytic settings and takes no scenario file",
            spec.experiment
        )));
    }
    if spec.steps == Some(0) {
        return Err(ExperimentError::BadOption(
            "--steps must be positive".into(),
        ));
    }
    let dir = spec
        .out_dir
        .as_ref()
        .map(|d| d.join(spec.experiment.name()));
    let art = Artifacts::new(dir.as_deref())?;
    let summary = match spec.experiment {
        Experiment::Fig1Manifold => filtering::fig1_manifold(spec, &art)?,
        Experiment::Fig2Odometer => filtering::fig2_odometer(spec, &art)?,
        Experiment::Fig3Convergence => filtering::fig3_convergence(spec, &art)?,
        Experiment::Thm3Residual => filtering::thm3_residual(spec, &art)?,
        Experiment::Prop1Linear => filtering::prop1_linear(spec, &art)?,
        Experiment::Thm4Rates => theory::thm4_rates(spec, &art)?,
        Experiment::AppBCrosscheck => theory::appb_crosscheck(spec, &art)?,
        Experiment::SmoothingBatch => smoothing::smoothing_batch(spec, &art)?,
        Experiment::SmoothingWindow => smoothing::smoothing_window(spec, &art)?,
    };
    art.write("summary.txt", |w| summary.write_text(w))?;
    art.write("summary.toml", |w| {
        w.write_all(summary.to_toml().as_bytes())
    })?;
    Ok(summary)
}
