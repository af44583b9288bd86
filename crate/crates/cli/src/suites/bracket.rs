//! The conformal-Killing bracket on `HP^n` and its structure constants.

use nalgebra::{DMatrix, DVector};
use qkck::ckforms::{
    bracket_at, ck_bracket, codifferential, codifferential_field, fit_span, killing_fields_hpn, killing_to_ck,
    vector_bracket, FormField, KillingField, VecField,
};
use qkck::manifolds::ChartModel;
use qkck::qalg::{project, Point};
use qkck::sampling::random_point_in_ball;
use rand::seq::SliceRandom;
use rand::Rng;

use super::{max_of, rng_for};
use crate::config::SuiteConfig;
use crate::report::Check;
use crate::CliResult;

/// Points used to expand brackets in the basis.
const TABLE_POINTS: usize = 3;
/// Points used to fit the Killing-field structure constants.
const KILLING_POINTS: usize = 8;
/// Pairs on which `δ[ψ1, ψ2] = [δψ1, δψ2]` is checked.
const CODIFF_PAIRS: usize = 2;
const JACOBI_TRIPLES: usize = 10;
const BALL: f64 = 0.3;

/// Structure constants `c[a][b][c]` with `[e_a, e_b] = Σ_c c_ab^c e_c`,
/// stored as `data[(a * k + b) * k + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureConstants {
    pub k: usize,
    pub data: Vec<f64>,
}

impl StructureConstants {
    pub fn zeros(k: usize) -> Self {
        Self { k, data: vec![0.0; k * k * k] }
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[(a * self.k + b) * self.k + c]
    }

    fn set_pair(&mut self, a: usize, b: usize, coeffs: &DVector<f64>) {
        for c in 0..self.k {
            self.data[(a * self.k + b) * self.k + c] = coeffs[c];
            self.data[(b * self.k + a) * self.k + c] = -coeffs[c];
        }
    }

    /// `[u, v]` for coordinate vectors `u`, `v`.
    pub fn bracket(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let k = self.k;
        let mut out = DVector::zeros(k);
        for a in 0..k {
            for b in 0..k {
                let w = u[a] * v[b];
                if w != 0.0 {
                    for c in 0..k {
                        out[c] += w * self.get(a, b, c);
                    }
                }
            }
        }
        out
    }

    /// `|[[u,v],w] + [[v,w],u] + [[w,u],v]|` relative to the sum of the
    /// three terms' norms.
    pub fn jacobi_residual(&self, u: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let t1 = self.bracket(&self.bracket(u, v), w);
        let t2 = self.bracket(&self.bracket(v, w), u);
        let t3 = self.bracket(&self.bracket(w, u), v);
        let scale = t1.norm() + t2.norm() + t3.norm();
        (t1 + t2 + t3).norm() / scale.max(f64::MIN_POSITIVE)
    }

    pub fn max_difference(&self, other: &StructureConstants) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Constants of the Killing fields from the matrix algebra:
/// `[X_A, X_B] = -X_{[A,B]}`.
pub fn killing_constants_exact(fields: &[KillingField]) -> StructureConstants {
    let k = fields.len();
    let cols: Vec<DVector<f64>> = fields.iter().map(|f| DVector::from_vec(f.matrix.to_real())).collect();
    let basis = DMatrix::from_columns(&cols);
    let mut out = StructureConstants::zeros(k);
    for a in 0..k {
        for b in a + 1..k {
            let comm = DVector::from_vec(fields[a].matrix.commutator(&fields[b].matrix).to_real());
            out.set_pair(a, b, &(-fit_span(&basis, &comm).coefficients));
        }
    }
    out
}

/// Stack `f(p)` over the points into one column.
fn stacked(values: Vec<Vec<f64>>) -> DVector<f64> {
    DVector::from_iterator(values.iter().map(Vec::len).sum(), values.into_iter().flatten())
}

/// Constants of the Killing fields fitted from finite-difference brackets.
fn killing_constants_fd(fields: &[KillingField], pts: &[Point], cfg: &SuiteConfig) -> qkck::Result<StructureConstants> {
    let k = fields.len();
    let scheme = cfg.steps().killing;
    let cols: Vec<DVector<f64>> = fields
        .iter()
        .map(|f| Ok(stacked(pts.iter().map(|p| Ok(f.field.eval(p)?.0.as_slice().to_vec())).collect::<qkck::Result<_>>()?)))
        .collect::<qkck::Result<_>>()?;
    let basis = DMatrix::from_columns(&cols);
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();
    let fits = cfg.exec().map(pairs.clone(), |(a, b)| -> qkck::Result<DVector<f64>> {
        let v = pts
            .iter()
            .map(|p| Ok(vector_bracket(&fields[a].field, &fields[b].field, p, scheme)?.0.as_slice().to_vec()))
            .collect::<qkck::Result<_>>()?;
        Ok(fit_span(&basis, &stacked(v)).coefficients)
    });
    let mut out = StructureConstants::zeros(k);
    for ((a, b), c) in pairs.into_iter().zip(fits) {
        out.set_pair(a, b, &c?);
    }
    Ok(out)
}

/// The bracket table of the forms built from the Killing fields.
pub struct StructureFit {
    pub constants: StructureConstants,
    /// Worst residual of expanding a bracket in the basis, relative to the
    /// largest bracket in the table (commuting pairs give pure noise, so
    /// their own norm is no scale).
    pub closure: f64,
    /// Worst `hw` part of a bracket value, relative to the largest
    /// pointwise bracket.
    pub hw: f64,
    /// Largest stacked bracket norm.
    pub scale: f64,
}

pub fn structure_constants(
    model: &ChartModel,
    forms: &[FormField],
    deltas: &[VecField],
    pts: &[Point],
    cfg: &SuiteConfig,
) -> qkck::Result<StructureFit> {
    let k = forms.len();
    let scheme = cfg.steps().outer;
    let cols: Vec<DVector<f64>> = forms
        .iter()
        .map(|f| Ok(stacked(pts.iter().map(|p| Ok(f.eval(p)?.upper_components())).collect::<qkck::Result<_>>()?)))
        .collect::<qkck::Result<_>>()?;
    let basis = DMatrix::from_columns(&cols);
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();
    let rows = cfg.exec().map(pairs.clone(), |(a, b)| -> qkck::Result<(DVector<f64>, f64, f64, f64, f64)> {
        let mut comps = Vec::with_capacity(pts.len());
        let (mut hw, mut peak): (f64, f64) = (0.0, 0.0);
        for p in pts {
            let v = bracket_at(model, (&forms[a], &deltas[a]), (&forms[b], &deltas[b]), p, scheme)?;
            let geo = model.point_geometry(p)?;
            hw = hw.max(geo.g.norm(&project(&v, &geo.basis, &geo.g).hw));
            peak = peak.max(geo.g.norm(&v));
            comps.push(v.upper_components());
        }
        let target = stacked(comps);
        let fit = fit_span(&basis, &target);
        let res = (&basis * &fit.coefficients - &target).norm();
        Ok((fit.coefficients, res, hw, target.norm(), peak))
    });
    let mut out = StructureFit { constants: StructureConstants::zeros(k), closure: 0.0, hw: 0.0, scale: 0.0 };
    let mut peak: f64 = 0.0;
    for ((a, b), r) in pairs.into_iter().zip(rows) {
        let (c, res, hw, norm, pk) = r?;
        peak = peak.max(pk);
        out.constants.set_pair(a, b, &c);
        out.closure = out.closure.max(res);
        out.hw = out.hw.max(hw);
        out.scale = out.scale.max(norm);
    }
    out.closure /= out.scale;
    out.hw /= peak;
    Ok(out)
}

fn random_coords(k: usize, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(k, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn bracket(cfg: &SuiteConfig) -> CliResult<Vec<Check>> {
    let model = ChartModel::hpn(cfg.n)?;
    let m = model.dim();
    let steps = cfg.steps();
    let fields = killing_fields_hpn(cfg.n);
    let k = fields.len();
    let forms: Vec<FormField> =
        fields.iter().map(|f| Ok(killing_to_ck(&model, &f.field, steps.killing)?.memoized(50_000))).collect::<qkck::Result<_>>()?;
    let deltas: Vec<VecField> = forms.iter().map(|f| codifferential_field(&model, f, steps.form)).collect();
    let mut out = Vec::new();

    // δ[ψ1, ψ2] = [δψ1, δψ2] on non-commuting pairs
    let mut rng = rng_for(cfg, "bracket_codifferential");
    let exact = killing_constants_exact(&fields);
    let mut pairs: Vec<(usize, usize)> =
        (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).filter(|&(a, b)| (0..k).any(|c| exact.get(a, b, c) != 0.0)).collect();
    pairs.shuffle(&mut rng);
    let cases: Vec<((usize, usize), Point)> =
        pairs.into_iter().take(CODIFF_PAIRS).map(|pr| (pr, random_point_in_ball(m, BALL, &mut rng))).collect();
    let res = cfg.exec().map(cases, |((a, b), p)| -> qkck::Result<f64> {
        let br = ck_bracket(&model, &forms[a], &forms[b], steps.form, steps.outer);
        let lhs = codifferential(&model, &br.field, &p, steps.outermost)?;
        let rhs = vector_bracket(&deltas[a], &deltas[b], &p, steps.outer)?;
        Ok((&lhs.0 - &rhs.0).norm() / rhs.0.norm())
    });
    out.push(max_of("bracket_codifferential", cfg, res));

    // bracket table on a few points
    let mut rng = rng_for(cfg, "bracket_table");
    let pts: Vec<Point> = (0..TABLE_POINTS).map(|_| random_point_in_ball(m, BALL, &mut rng)).collect();
    let table = structure_constants(&model, &forms, &deltas, &pts, cfg);
    let mut rng = rng_for(cfg, "killing_structure");
    let kpts: Vec<Point> = (0..KILLING_POINTS).map(|_| random_point_in_ball(m, 0.5, &mut rng)).collect();
    match killing_constants_fd(&fields, &kpts, cfg) {
        Ok(fd) => out.push(Check::measure("killing_structure", fd.max_difference(&exact), cfg)),
        Err(e) => out.push(Check::failed("killing_structure", cfg, e)),
    }
    match table {
        Ok(t) => {
            out.push(Check::measure("bracket_compatible", t.hw, cfg));
            out.push(Check::measure("bracket_closure", t.closure, cfg));
            let largest = exact.data.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            out.push(
                Check::measure("structure_constants", t.constants.max_difference(&exact), cfg)
                    .with_note(format!("largest constant {largest:.3}")),
            );
            let mut rng = rng_for(cfg, "jacobi");
            let worst = (0..JACOBI_TRIPLES)
                .map(|_| {
                    let (u, v, w) = (random_coords(k, &mut rng), random_coords(k, &mut rng), random_coords(k, &mut rng));
                    t.constants.jacobi_residual(&u, &v, &w)
                })
                .fold(0.0, f64::max);
            out.push(Check::measure("jacobi", worst, cfg));
        }
        Err(e) => {
            for name in ["bracket_compatible", "bracket_closure", "structure_constants", "jacobi"] {
                out.push(Check::failed(name, cfg, &e));
            }
        }
    }
    Ok(out)
}
