use serde::{Deserialize, Serialize};

use crate::config::SuiteConfig;
use crate::tolerances;

/// How a measured value is compared with its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// value ≤ threshold (residuals; scaled by `tol_scale`)
    AtMost,
    /// value ≥ threshold (gaps, non-vanishing quantities)
    AtLeast,
    /// value == threshold (dimensions and ranks)
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// The mathematical statement being verified.
    pub statement: String,
    /// The measured value: a residual, ratio or count depending on
    /// `comparison`.
    pub max_residual: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    /// Look the check up in the tolerance table and compare.
    pub fn measure(name: &str, value: f64, cfg: &SuiteConfig) -> Check {
        let spec = tolerances::lookup(name);
        let tolerance = match spec.comparison {
            Comparison::AtMost => spec.tolerance * cfg.tol_scale,
            _ => spec.tolerance,
        };
        let pass = match spec.comparison {
            Comparison::AtMost => value <= tolerance,
            Comparison::AtLeast => value >= tolerance,
            Comparison::Equal => value == tolerance,
        };
        Check {
            name: name.to_string(),
            statement: spec.statement.to_string(),
            max_residual: value,
            tolerance,
            comparison: spec.comparison,
            pass,
            note: None,
        }
    }

    /// An `Equal` check against the prolongation rank for `cfg.n`.
    pub fn rank(name: &str, value: usize, cfg: &SuiteConfig) -> Check {
        let mut c = Check::measure(name, value as f64, cfg);
        debug_assert_eq!(c.comparison, Comparison::Equal);
        c.tolerance = cfg.bundle_rank() as f64;
        c.pass = value == cfg.bundle_rank();
        c
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// A check that could not be evaluated.
    pub fn failed(name: &str, cfg: &SuiteConfig, err: impl std::fmt::Display) -> Check {
        let mut c = Check::measure(name, f64::MAX, cfg);
        c.pass = false;
        c.note = Some(format!("error: {err}"));
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub suite: String,
    pub n: usize,
    pub seed: u64,
    pub config: SuiteConfig,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub wall_time: f64,
}

impl Report {
    pub fn new(cfg: &SuiteConfig, checks: Vec<Check>, wall_time: f64) -> Self {
        Report {
            suite: cfg.suite.name().to_string(),
            n: cfg.n,
            seed: cfg.seed,
            config: cfg.clone(),
            pass: !checks.is_empty() && checks.iter().all(|c| c.pass),
            checks,
            wall_time,
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Same report with the timing zeroed (for determinism comparisons).
    pub fn without_timing(&self) -> Report {
        Report { wall_time: 0.0, ..self.clone() }
    }
}
