use std::fmt;
use std::io::{self, Write};

use serde::Serialize;

/// Acceptance bound on a measured value. All comparisons are strict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Below(f64),
    Above(f64),
    Within(f64, f64),
}

impl Bound {
    pub fn holds(&self, value: f64) -> bool {
        match *self {
            Bound::Below(limit) => value < limit,
            Bound::Above(limit) => value > limit,
            Bound::Within(lo, hi) => value > lo && value < hi,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Below(limit) => write!(f, "< {limit:e}"),
            Bound::Above(limit) => write!(f, "> {limit:e}"),
            Bound::Within(lo, hi) => write!(f, "in ({lo}, {hi})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub threshold: Bound,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, threshold: Bound) -> Self {
        Self {
            name: name.into(),
            measured,
            pass: threshold.holds(measured),
            threshold,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: measured {:e}, required {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.threshold
        )
    }
}

/// Outcome of one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub experiment: String,
    pub checks: Vec<Check>,
    /// Informational values that carry no threshold.
    pub metrics: Vec<(String, f64)>,
}

#[derive(Serialize)]
struct CheckRecord<'a> {
    name: &'a str,
    measured: f64,
    threshold: String,
    pass: bool,
}

#[derive(Serialize)]
struct MetricRecord<'a> {
    name: &'a str,
    value: f64,
}

#[derive(Serialize)]
struct SummaryRecord<'a> {
    experiment: &'a str,
    pass: bool,
    check: Vec<CheckRecord<'a>>,
    metric: Vec<MetricRecord<'a>>,
}

impl Summary {
    pub fn new(experiment: impl Into<String>) -> Self {
        Self {
            experiment: experiment.into(),
            checks: Vec::new(),
            metrics: Vec::new(),
        }
    }

    pub fn check(&mut self, name: impl Into<String>, measured: f64, threshold: Bound) {
        self.checks.push(Check::new(name, measured, threshold));
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.push((name.into(), value));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn find(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// `key = value` lines, one group of keys per check.
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "experiment = {}", self.experiment)?;
        writeln!(w, "pass = {}", self.passed())?;
        for c in &self.checks {
            writeln!(w, "check.{}.measured = {:e}", c.name, c.measured)?;
            writeln!(w, "check.{}.threshold = {}", c.name, c.threshold)?;
            writeln!(w, "check.{}.pass = {}", c.name, c.pass)?;
        }
        for (name, value) in &self.metrics {
            writeln!(w, "metric.{name} = {value:e}")?;
        }
        Ok(())
    }

    /// The same content as a TOML document.
    pub fn to_toml(&self) -> String {
        let record = SummaryRecord {
            experiment: &self.experiment,
            pass: self.passed(),
            check: self
                .checks
                .iter()
                .map(|c| CheckRecord {
                    name: &c.name,
                    measured: c.measured,
                    threshold: c.threshold.to_string(),
                    pass: c.pass,
                })
                .collect(),
            metric: self
                .metrics
                .iter()
                .map(|(name, value)| MetricRecord {
                    name,
                    value: *value,
                })
                .collect(),
        };
        toml::to_string(&record).expect("summary records always serialize")
    }
}
