use std::path::PathBuf;

use qkck::fd::FdScheme;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Qalg,
    Curvature,
    Flat,
    Hpn,
    Grassmannian,
    Ck,
    Bracket,
    Dim,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Qalg => "qalg",
            Suite::Curvature => "curvature",
            Suite::Flat => "flat",
            Suite::Hpn => "hpn",
            Suite::Grassmannian => "grassmannian",
            Suite::Ck => "ck",
            Suite::Bracket => "bracket",
            Suite::Dim => "dim",
            Suite::All => "all",
        }
    }

    /// The suites `all` expands to, in run order.
    pub fn members() -> [Suite; 8] {
        [Suite::Qalg, Suite::Curvature, Suite::Flat, Suite::Hpn, Suite::Grassmannian, Suite::Ck, Suite::Bracket, Suite::Dim]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub suite: Suite,
    pub n: usize,
    /// Sample points per check (algebraic checks use ten times as many).
    pub samples: usize,
    pub seed: u64,
    /// Step for first derivatives of conformal-Killing forms; the nested
    /// levels use `fd_step/5` (Killing fields), `2 fd_step` and `4 fd_step`.
    pub fd_step: f64,
    /// Multiplies every upper-bound tolerance.
    pub tol_scale: f64,
    /// Holonomy loops.
    pub loops: usize,
    pub report_path: Option<PathBuf>,
    /// Evaluate independent samples on the rayon pool.
    pub parallel: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            suite: Suite::All,
            n: 2,
            samples: 20,
            seed: 7,
            fd_step: 5e-3,
            tol_scale: 1.0,
            loops: 8,
            report_path: None,
            parallel: true,
        }
    }
}

/// Finite-difference schemes for each nesting level.
#[derive(Debug, Clone, Copy)]
pub struct Steps {
    pub killing: FdScheme,
    pub form: FdScheme,
    pub outer: FdScheme,
    pub outermost: FdScheme,
}

impl SuiteConfig {
    pub fn for_suite(suite: Suite) -> Self {
        Self { suite, ..Self::default() }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.n < 2 {
            return Err(CliError::Config(format!("n must be at least 2 (got {})", self.n)));
        }
        if self.samples == 0 {
            return Err(CliError::Config("samples must be at least 1".into()));
        }
        if self.loops == 0 {
            return Err(CliError::Config("loops must be at least 1".into()));
        }
        if !(self.tol_scale > 0.0 && self.tol_scale.is_finite()) {
            return Err(CliError::Config(format!("tol_scale must be positive (got {})", self.tol_scale)));
        }
        if !(self.fd_step > 0.0 && self.fd_step <= 2e-2) {
            return Err(CliError::Config(format!("fd_step must lie in (0, 0.02] (got {})", self.fd_step)));
        }
        Ok(())
    }

    pub fn steps(&self) -> Steps {
        let h = self.fd_step;
        Steps {
            killing: FdScheme::central4(h / 5.0),
            form: FdScheme::central4(h),
            outer: FdScheme::central4(2.0 * h),
            outermost: FdScheme::central4(4.0 * h),
        }
    }

    pub fn exec(&self) -> qkck::Exec {
        if self.parallel {
            qkck::Exec::Parallel
        } else {
            qkck::Exec::Sequential
        }
    }

    /// `(n+1)(2n+3)`: rank of the prolongation bundle.
    pub fn bundle_rank(&self) -> usize {
        (self.n + 1) * (2 * self.n + 3)
    }
}
