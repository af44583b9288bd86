use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use qkck::ckforms::{ck_residual, holonomy_dimension, HolonomyOptions, PathSpec, TransportedSection};
use qkck::curvalg::ProlongSection;
use qkck::manifolds::ChartModel;
use qkck::qalg::{compatible_basis, TangentVec};
use qkck::sampling::{random_tangent, random_two_form};
use qkck_cli::dump::{build_dump, write_dump, DumpOptions, DumpTarget};
use qkck_cli::suites::{rng_for, HOLONOMY_STEPS};
use qkck_cli::{tolerances, CliError, CliResult, Suite, SuiteConfig};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "qkck", version, about = "Numerical checks of the prolongation connection for conformal-Killing 2-forms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite and print one line per check.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 5e-3)]
        fd_step: f64,
        #[arg(long, default_value_t = 1.0)]
        tol_scale: f64,
        /// Holonomy loops for the flat and dim suites.
        #[arg(long, default_value_t = 8)]
        loops: usize,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Evaluate samples on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Holonomy fixed-space dimension of a chart model.
    Dim {
        #[arg(long, value_enum)]
        manifold: Manifold,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 64)]
        loops: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Transport one section along a polyline from the chart centre.
    Transport {
        #[arg(long, value_enum)]
        manifold: Manifold,
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// `random` or `basis:I` (I-th fiber basis vector: compatible forms,
        /// then frame vectors).
        #[arg(long, default_value = "random")]
        init: String,
        /// JSON file: a list of points, or `{"waypoints": [...], "steps_per_segment": N}`.
        #[arg(long)]
        waypoints: PathBuf,
        /// Check the conformal-Killing equation and `δψ = X` at the end point.
        #[arg(long)]
        check_ck: bool,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Write a tensor to a JSON file.
    Dump {
        /// `weylq-gr2`, `curvature:MODEL` or `holonomy:MODEL`.
        #[arg(long)]
        what: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        loops: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Manifold {
    Flat,
    Hpn,
}

impl Manifold {
    fn build(self, n: usize) -> CliResult<ChartModel> {
        if n < 2 {
            return Err(CliError::Config(format!("n must be at least 2 (got {n})")));
        }
        Ok(match self {
            Manifold::Flat => ChartModel::flat(n)?,
            Manifold::Hpn => ChartModel::hpn(n)?,
        })
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WaypointFile {
    Spec(PathSpec),
    Points(Vec<Vec<f64>>),
}

#[derive(Serialize)]
struct DimOutput {
    manifold: String,
    n: usize,
    seed: u64,
    expected: usize,
    pass: bool,
    #[serde(flatten)]
    report: qkck::ckforms::HolonomyReport,
}

#[derive(Serialize)]
struct TransportOutput {
    end: Vec<f64>,
    psi: Vec<Vec<f64>>,
    x: Vec<f64>,
    drift: f64,
    basis_mismatch: f64,
    steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    ck_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    codifferential_gap: Option<f64>,
    pass: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("qkck: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cmd: Command) -> CliResult<bool> {
    match cmd {
        Command::Verify { suite, n, samples, seed, fd_step, tol_scale, loops, report, sequential } => {
            let cfg = SuiteConfig { suite, n, samples, seed, fd_step, tol_scale, loops, report_path: report, parallel: !sequential };
            let rep = qkck_cli::run_suite(&cfg)?;
            for c in &rep.checks {
                let verdict = if c.pass { "PASS" } else { "FAIL" };
                let note = c.note.as_deref().map(|s| format!("  [{s}]")).unwrap_or_default();
                println!("{verdict} {:<28} {:>12.4e} {:?} {:.1e}{note}", c.name, c.max_residual, c.comparison, c.tolerance);
            }
            println!("{} {} checks in {:.1} s", if rep.pass { "PASS" } else { "FAIL" }, rep.checks.len(), rep.wall_time);
            Ok(rep.pass)
        }
        Command::Dim { manifold, n, loops, seed, report } => {
            if loops == 0 {
                return Err(CliError::Config("loops must be at least 1".into()));
            }
            let model = manifold.build(n)?;
            let cfg = SuiteConfig { n, seed, loops, ..SuiteConfig::default() };
            let opts = HolonomyOptions {
                loops,
                steps_per_segment: HOLONOMY_STEPS,
                seed: rand::Rng::gen(&mut rng_for(&cfg, "holonomy_fixed_dim")),
                ..Default::default()
            };
            let rep = holonomy_dimension(&model, &DVector::zeros(model.dim()), opts)?;
            let expected = cfg.bundle_rank();
            let gap = tolerances::lookup("holonomy_gap").tolerance;
            let pass = rep.fixed_dim == expected && rep.gap_ratio >= gap;
            let out = DimOutput { manifold: model.name().into(), n, seed, expected, pass, report: rep };
            let json = serde_json::to_string_pretty(&out)?;
            if let Some(path) = report {
                std::fs::write(&path, &json).map_err(|e| CliError::io(path.display(), e))?;
            }
            println!("{json}");
            Ok(pass)
        }
        Command::Transport { manifold, n, init, waypoints, check_ck, seed } => {
            let model = manifold.build(n)?;
            let text = std::fs::read_to_string(&waypoints).map_err(|e| CliError::io(waypoints.display(), e))?;
            let path = match serde_json::from_str(&text)? {
                WaypointFile::Spec(p) => p,
                WaypointFile::Points(pts) => PathSpec { waypoints: pts, steps_per_segment: 100 },
            };
            if path.waypoints.len() < 2 || path.waypoints.iter().any(|w| w.len() != model.dim()) {
                return Err(CliError::Config(format!("need at least two waypoints of dimension {}", model.dim())));
            }
            let start = DVector::from_vec(path.waypoints[0].clone());
            let geo = model.point_geometry(&start)?;
            let forms = compatible_basis(&geo.g, &geo.basis);
            let m = model.dim();
            let section = match init.as_str() {
                "random" => {
                    let mut rng = rng_for(&SuiteConfig { seed, ..SuiteConfig::default() }, "transport");
                    ProlongSection::compatible(&random_two_form(m, &mut rng), random_tangent(m, &mut rng), &geo.g, &geo.basis)
                }
                other => {
                    let i: usize = other
                        .strip_prefix("basis:")
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| CliError::Config(format!("--init must be random or basis:I (got {other})")))?;
                    if i < forms.len() {
                        ProlongSection { psi: forms[i].clone(), x: TangentVec::zeros(m) }
                    } else if i < forms.len() + m {
                        ProlongSection { psi: qkck::qalg::TwoForm::zeros(m), x: geo.g.frame_vec(i - forms.len()) }
                    } else {
                        return Err(CliError::Config(format!("basis index {i} out of range (rank {})", forms.len() + m)));
                    }
                }
            };
            let outcome = qkck::ckforms::prolong_transport(&model, &path, section)?;
            let end_section = outcome.sections[0].clone();
            let (mut ck, mut gap, mut pass) = (None, None, true);
            if check_ck {
                let field = TransportedSection::new(&model, outcome.end.clone(), end_section.clone(), 16);
                let r = ck_residual(&model, &field.psi_field(), &outcome.end, SuiteConfig::default().steps().form)?;
                let d = r.codifferential.iter().zip(end_section.x.0.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                let res = r.conformal_killing.max(r.prolongation);
                pass = res <= tolerances::lookup("transported_ck_residual").tolerance
                    && d <= tolerances::lookup("transported_codifferential").tolerance;
                ck = Some(res);
                gap = Some(d);
            }
            let psi = end_section.psi.matrix();
            let out = TransportOutput {
                end: outcome.end.as_slice().to_vec(),
                psi: (0..m).map(|a| (0..m).map(|b| psi[(a, b)]).collect()).collect(),
                x: end_section.x.0.as_slice().to_vec(),
                drift: outcome.drift,
                basis_mismatch: outcome.basis_mismatch,
                steps: outcome.steps,
                ck_residual: ck,
                codifferential_gap: gap,
                pass,
            };
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(pass)
        }
        Command::Dump { what, out, n, seed, loops } => {
            let target: DumpTarget = what.parse()?;
            if n < 2 {
                return Err(CliError::Config(format!("n must be at least 2 (got {n})")));
            }
            let dump = build_dump(&target, DumpOptions { n, seed, loops, ..DumpOptions::default() })?;
            write_dump(&dump, &out)?;
            println!("wrote {} ({} values, shape {:?})", out.display(), dump.data.len(), dump.header.shape);
            Ok(true)
        }
    }
}
