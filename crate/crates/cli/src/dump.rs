//! Tensor dumps: a JSON object with a header and a row-major flattened
//! real payload.

use std::path::Path;

use nalgebra::DVector;
use qkck::ckforms::{holonomy_matrices, HolonomyOptions};
use qkck::curvalg::CurvatureOp;
use qkck::manifolds::{select_model, Model};
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DumpTarget {
    /// `W^Q` of `Gr2(C^4)`.
    WeylqGr2,
    /// Riemann tensor at the chart centre (`flat`, `hpn` or `gr2`).
    Curvature(String),
    /// Holonomy matrices of random loops at the chart centre.
    Holonomy(String),
}

impl std::str::FromStr for DumpTarget {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s.split_once(':') {
            None if s == "weylq-gr2" => Ok(DumpTarget::WeylqGr2),
            Some(("curvature", m)) if !m.is_empty() => Ok(DumpTarget::Curvature(m.to_string())),
            Some(("holonomy", m)) if !m.is_empty() => Ok(DumpTarget::Holonomy(m.to_string())),
            _ => Err(CliError::Config(format!("unknown dump target {s:?} (weylq-gr2 | curvature:MODEL | holonomy:MODEL)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub kind: String,
    pub n: usize,
    pub shape: Vec<usize>,
    /// All indices are lowered with the metric at the point.
    pub convention: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loops: Option<usize>,
    /// Coordinates of the holonomy matrices.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dump {
    pub header: DumpHeader,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct DumpOptions {
    pub n: usize,
    pub seed: u64,
    pub loops: usize,
    pub steps_per_segment: usize,
}

impl Default for DumpOptions {
    fn default() -> Self {
        Self { n: 2, seed: 7, loops: 4, steps_per_segment: 100 }
    }
}

fn header(kind: &str, model: &str, n: usize, shape: Vec<usize>) -> DumpHeader {
    DumpHeader { kind: kind.into(), n, shape, convention: "lowered".into(), model: model.into(), seed: None, loops: None, basis: None }
}

fn curvature_dump(kind: &str, model: &str, n: usize, r: &CurvatureOp) -> Dump {
    let m = r.dim();
    Dump { header: header(kind, model, n, vec![m; 4]), data: r.data().to_vec() }
}

pub fn build_dump(target: &DumpTarget, opts: DumpOptions) -> CliResult<Dump> {
    match target {
        DumpTarget::WeylqGr2 => match select_model("gr2", 2)? {
            Model::Grassmannian(ctx, _) => Ok(curvature_dump("weylq", "gr2", 2, ctx.w.op())),
            Model::Chart(_) => unreachable!("gr2 resolves to the point model"),
        },
        DumpTarget::Curvature(name) => match select_model(name, opts.n)? {
            Model::Grassmannian(_, r) => Ok(curvature_dump("curvature", name, 2, &r)),
            Model::Chart(c) => {
                let (r, _) = c.riemann(&DVector::zeros(c.dim()))?;
                Ok(curvature_dump("curvature", name, opts.n, &r))
            }
        },
        DumpTarget::Holonomy(name) => match select_model(name, opts.n)? {
            Model::Grassmannian(..) => Err(CliError::Config("holonomy needs a chart model (flat or hpn)".into())),
            Model::Chart(c) => {
                let hopts = HolonomyOptions {
                    loops: opts.loops,
                    steps_per_segment: opts.steps_per_segment,
                    seed: opts.seed,
                    ..Default::default()
                };
                let hm = holonomy_matrices(&c, &DVector::zeros(c.dim()), hopts)?;
                let r = hm.matrices.first().map_or(0, |h| h.nrows());
                let mut data = Vec::with_capacity(opts.loops * r * r);
                for h in &hm.matrices {
                    // row-major
                    data.extend(h.transpose().iter().cloned());
                }
                let mut head = header("holonomy", name, opts.n, vec![opts.loops, r, r]);
                head.basis = Some("compatible forms of the admissible basis, then frame vectors".into());
                head.seed = Some(opts.seed);
                head.loops = Some(opts.loops);
                Ok(Dump { header: head, data })
            }
        },
    }
}

pub fn write_dump(dump: &Dump, path: &Path) -> CliResult<()> {
    let json = serde_json::to_string(dump)?;
    std::fs::write(path, json).map_err(|e| CliError::io(path.display(), e))
}
