//! Conformal-Killing forms on the `HP^n` chart: transported sections,
//! forms built from Killing fields and the identities they satisfy.

use nalgebra::DVector;
use qkck::ckforms::{
    ck_residual, codifferential, codifferential_split, dpsi_residual, hamiltonian_residual, killing_fields_hpn,
    killing_to_ck, penrose, prolong_transport, prolongation_derivative, s2e_correspondence, twistor_from_killing,
    twistor_residual, FormField, KillingField, PathSpec, TransportedSection,
};
use qkck::curvalg::ProlongSection;
use qkck::manifolds::ChartModel;
use qkck::qalg::{Point, TangentVec};
use qkck::sampling::{random_point_in_ball, random_tangent, random_two_form};

use super::{max_of, rng_for};
use crate::config::SuiteConfig;
use crate::report::Check;
use crate::CliResult;

/// Evaluation points stay in this ball of the chart.
const BALL: f64 = 0.4;
/// Steps per segment when transporting to an end point, and for the
/// straight continuation used to differentiate the transported field.
const PATH_STEPS: usize = 60;
const FIELD_STEPS: usize = 16;

type Rows = Vec<Result<Vec<f64>, String>>;

/// Split per-case rows of measurements into one column per check.
fn columns(rows: Rows, width: usize) -> Vec<Vec<Result<f64, String>>> {
    let mut cols: Vec<Vec<Result<f64, String>>> = vec![Vec::new(); width];
    for r in rows {
        for (k, col) in cols.iter_mut().enumerate() {
            col.push(match &r {
                Ok(v) => Ok(v[k]),
                Err(e) => Err(e.clone()),
            });
        }
    }
    cols
}

fn vec_gap(a: &[f64], b: &TangentVec) -> f64 {
    a.iter().zip(b.0.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn transported(model: &ChartModel, cfg: &SuiteConfig) -> Vec<Check> {
    let m = model.dim();
    let steps = cfg.steps();
    let mut rng = rng_for(cfg, "transported_sections");
    let o: Point = DVector::zeros(m);
    let cases: Vec<_> = (0..cfg.samples)
        .map(|_| {
            let psi = random_two_form(m, &mut rng);
            let x = random_tangent(m, &mut rng);
            let mid = random_point_in_ball(m, BALL, &mut rng);
            let end = random_point_in_ball(m, BALL, &mut rng);
            (psi, x, mid, end)
        })
        .collect();
    let rows: Rows = cfg.exec().map(cases, |(psi, x, mid, end)| {
        let run = || -> qkck::Result<Vec<f64>> {
            let geo = model.point_geometry(&o)?;
            let init = ProlongSection::compatible(&psi, x, &geo.g, &geo.basis);
            let out = prolong_transport(model, &PathSpec::new(vec![o.clone(), mid, end.clone()], PATH_STEPS), init)?;
            let section = out.sections.into_iter().next().expect("one section");
            let field = TransportedSection::new(model, end.clone(), section.clone(), FIELD_STEPS);
            let r = ck_residual(model, &field.psi_field(), &end, steps.form)?;
            Ok(vec![r.conformal_killing.max(r.prolongation), vec_gap(&r.codifferential, &section.x), out.drift])
        };
        run().map_err(|e| e.to_string())
    });
    let mut cols = columns(rows, 3).into_iter();
    vec![
        max_of("transported_ck_residual", cfg, cols.next().unwrap()),
        max_of("transported_codifferential", cfg, cols.next().unwrap()),
        max_of("transported_drift", cfg, cols.next().unwrap()),
    ]
}

/// Forms built from every Killing field, memoised so the checks below
/// share evaluations.
fn killing_forms(model: &ChartModel, fields: &[KillingField], cfg: &SuiteConfig) -> qkck::Result<Vec<FormField>> {
    fields.iter().map(|k| Ok(killing_to_ck(model, &k.field, cfg.steps().killing)?.memoized(50_000))).collect()
}

pub fn ck(cfg: &SuiteConfig) -> CliResult<Vec<Check>> {
    let model = ChartModel::hpn(cfg.n)?;
    let m = model.dim();
    let steps = cfg.steps();
    let mut out = transported(&model, cfg);

    let fields = killing_fields_hpn(cfg.n);
    let forms = killing_forms(&model, &fields, cfg)?;
    let mut rng = rng_for(cfg, "killing_points");
    let pts: Vec<Point> = (0..cfg.samples).map(|_| random_point_in_ball(m, BALL, &mut rng)).collect();

    // every field at every point: D-derivative and δψ = X
    let cases: Vec<(usize, usize)> = (0..fields.len()).flat_map(|i| (0..pts.len()).map(move |k| (i, k))).collect();
    let rows: Rows = cfg.exec().map(cases, |(i, k)| {
        let run = || -> qkck::Result<Vec<f64>> {
            let p = &pts[k];
            let der = prolongation_derivative(&model, &forms[i], &fields[i].field, p, steps.form)?;
            let g = &model.point_geometry(p)?.g;
            let par = der.iter().map(|s| s.norm(g)).fold(0.0, f64::max);
            let x = fields[i].field.eval(p)?;
            let d = codifferential(&model, &forms[i], p, steps.form)?;
            Ok(vec![par, g.vec_norm(&TangentVec(&d.0 - &x.0))])
        };
        run().map_err(|e| e.to_string())
    });
    let mut cols = columns(rows, 2).into_iter();
    out.push(max_of("killing_ck_parallel", cfg, cols.next().unwrap()));
    out.push(max_of("killing_ck_codifferential", cfg, cols.next().unwrap()));

    // identities of compatible CK forms: each field on a quarter of the points
    let cases: Vec<(usize, usize)> =
        (0..fields.len()).flat_map(|i| (0..pts.len()).filter(move |k| k % 4 == i % 4).map(move |k| (i, k))).collect();
    let rows: Rows = cfg.exec().map(cases, |(i, k)| {
        let run = || -> qkck::Result<Vec<f64>> {
            let p = &pts[k];
            let (a, b) = codifferential_split(&model, &forms[i], p, steps.form)?.ratio_residuals(cfg.n);
            let dpsi = dpsi_residual(&model, &forms[i], p, steps.form)?;
            let tw = twistor_residual(&model, &forms[i], p, steps.form)?;
            let sigma = twistor_from_killing(&model, &fields[i].field, steps.killing)?;
            let pen = penrose(&model, &sigma, p, steps.form)?;
            let x = fields[i].field.eval(p)?;
            let g = &model.point_geometry(p)?.g;
            Ok(vec![a, b, dpsi, tw, pen.residual, g.vec_norm(&TangentVec(&pen.codifferential.0 - &x.0))])
        };
        run().map_err(|e| e.to_string())
    });
    let names = ["codiff_ratio_s2h", "codiff_ratio_s2e", "dpsi_formula", "twistor_equation", "penrose_residual", "penrose_inverse"];
    for (name, col) in names.iter().zip(columns(rows, names.len())) {
        out.push(max_of(name, cfg, col));
    }

    // S²E correspondence: field k mod F at point k
    let cases: Vec<usize> = (0..pts.len()).collect();
    let rows: Rows = cfg.exec().map(cases, |k| {
        let run = || -> qkck::Result<Vec<f64>> {
            let p = &pts[k];
            let psi = &forms[k % forms.len()];
            let (u, rec) = s2e_correspondence(&model, psi, steps.form, steps.outer)?;
            let g = &model.point_geometry(p)?.g;
            let round = g.norm(&(&rec.eval(p)? - &psi.eval(p)?));
            let (ham, _) = hamiltonian_residual(&model, &u, p, steps.outer)?;
            Ok(vec![round, ham])
        };
        run().map_err(|e| e.to_string())
    });
    let mut cols = columns(rows, 2).into_iter();
    out.push(max_of("s2e_roundtrip", cfg, cols.next().unwrap()));
    out.push(max_of("hamiltonian_equation", cfg, cols.next().unwrap()));
    Ok(out)
}
