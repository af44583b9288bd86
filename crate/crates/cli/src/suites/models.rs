//! Chart-model suites: flat `H^n`, the `HP^n` chart, holonomy dimension.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use qkck::ckforms::{
    ck_residual, codifferential, flat_ck_family, holonomy_dimension, killing_check, killing_fields_hpn, killing_to_ck,
    prolong_transport, HolonomyOptions, HolonomyReport, PathSpec,
};
use qkck::curvalg::{base_curvature, curvature_rd, curvature_rd_commutator, dcoeff_form, ProlongSection};
use qkck::manifolds::ChartModel;
use qkck::qalg::{compatible_basis, project, Point, TangentVec};
use qkck::sampling::{random_point_in_ball, random_tangent, random_two_form, random_vector, Rng64};
use rand::Rng;

use super::{max_of, rng_for};
use crate::config::SuiteConfig;
use crate::report::Check;
use crate::CliResult;

/// Steps per segment for the holonomy loops.
pub const HOLONOMY_STEPS: usize = 200;

/// Random unit compatible section with its evaluation directions.
fn random_rd_input(ctx_g: &qkck::qalg::Metric, basis: &qkck::qalg::AdmissibleBasis, rng: &mut Rng64) -> (TangentVec, TangentVec, ProlongSection) {
    let m = ctx_g.dim();
    let mut s = ProlongSection::compatible(&random_two_form(m, rng), random_tangent(m, rng), ctx_g, basis);
    let l = s.norm(ctx_g);
    s.psi = &s.psi * (1.0 / l);
    s.x.0 /= l;
    let unit = |v: TangentVec| {
        let l = ctx_g.vec_norm(&v);
        TangentVec(v.0 / l)
    };
    (unit(random_tangent(m, rng)), unit(random_tangent(m, rng)), s)
}

/// `max |R^D|` over `count` random points and unit inputs.
fn rd_sweep(model: &ChartModel, cfg: &SuiteConfig, name: &str, count: usize) -> Check {
    let mut rng = rng_for(cfg, name);
    let radius = model.domain().min(1.0) * 0.5;
    let pts: Vec<(Point, u64)> = (0..count).map(|_| (random_point_in_ball(model.dim(), radius, &mut rng), rng.gen())).collect();
    let values: Vec<qkck::Result<f64>> = cfg.exec().map(pts, |(p, seed)| {
        let ctx = model.context_at(&p)?;
        let mut r = qkck::sampling::seeded(seed);
        let (y, z, s) = random_rd_input(&ctx.g, &ctx.basis, &mut r);
        let (f, v) = curvature_rd(&y, &z, &s, &ctx);
        Ok((ctx.g.inner(&f, &f) + ctx.g.dot(&v, &v)).sqrt())
    });
    max_of(name, cfg, values)
}

fn holonomy(model: &ChartModel, cfg: &SuiteConfig, name: &str) -> qkck::Result<HolonomyReport> {
    let seed = rng_for(cfg, name).gen();
    let opts = HolonomyOptions { loops: cfg.loops, steps_per_segment: HOLONOMY_STEPS, seed, exec: cfg.exec(), ..Default::default() };
    holonomy_dimension(model, &DVector::zeros(model.dim()), opts)
}

fn holonomy_checks(model: &ChartModel, cfg: &SuiteConfig, dim_name: &str, gap_name: &str, drift_name: Option<&str>) -> Vec<Check> {
    match holonomy(model, cfg, dim_name) {
        Ok(rep) => {
            let moving = match rep.singular_values.get(rep.fixed_dim) {
                Some(v) => format!("smallest moving singular value {v:.3e}"),
                None => "no moving directions".to_string(),
            };
            let fixed = rep.fixed_dim.checked_sub(1).map_or(0.0, |i| rep.singular_values[i]);
            let note = format!("{} loops; {moving}; largest fixed {fixed:.3e}; reference {:.3e}", rep.loop_count, rep.reference);
            let mut out = vec![Check::rank(dim_name, rep.fixed_dim, cfg).with_note(note), Check::measure(gap_name, rep.gap_ratio, cfg)];
            if let Some(d) = drift_name {
                out.push(Check::measure(d, rep.max_drift, cfg).with_note(format!("basis mismatch {:.3e}", rep.max_basis_mismatch)));
            }
            out
        }
        Err(e) => {
            let mut out = vec![Check::failed(dim_name, cfg, &e), Check::failed(gap_name, cfg, &e)];
            if let Some(d) = drift_name {
                out.push(Check::failed(d, cfg, &e));
            }
            out
        }
    }
}

pub fn flat(cfg: &SuiteConfig) -> CliResult<Vec<Check>> {
    let model = ChartModel::flat(cfg.n)?;
    let m = model.dim();
    let g = model.metric_at(&DVector::zeros(m))?;
    let basis = model.reference_basis().clone();
    let steps = cfg.steps();
    let mut out = vec![rd_sweep(&model, cfg, "rd_flat", 10 * cfg.samples)];

    let mut rng = rng_for(cfg, "flat_family");
    let cases: Vec<_> = (0..cfg.samples)
        .map(|_| {
            let psi0 = project(&random_two_form(m, &mut rng), &basis, &g).compatible();
            (psi0, random_tangent(m, &mut rng), random_vector(m, &mut rng))
        })
        .collect();
    let results = cfg.exec().map(cases, |(psi0, x0, p)| {
        let fam = flat_ck_family(&model, psi0, x0.clone());
        let r = ck_residual(&model, &fam, &p, steps.outer)?;
        let d = r.codifferential.iter().zip(x0.0.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        Ok((r.conformal_killing.max(r.prolongation), d))
    });
    let (ck, cd): (Vec<_>, Vec<_>) = results.into_iter().map(|r: qkck::Result<(f64, f64)>| (r.as_ref().map(|v| v.0).map_err(|e| e.to_string()), r.map(|v| v.1).map_err(|e| e.to_string()))).unzip();
    out.push(max_of("flat_family_ck", cfg, ck));
    out.push(max_of("flat_family_codifferential", cfg, cd));

    let mut rng = rng_for(cfg, "flat_transport_closed_form");
    let mut tr: Vec<qkck::Result<f64>> = Vec::new();
    for _ in 0..cfg.samples {
        let psi0 = project(&random_two_form(m, &mut rng), &basis, &g).compatible();
        let x0 = random_tangent(m, &mut rng);
        let (a, b) = (random_vector(m, &mut rng), random_vector(m, &mut rng));
        let res = prolong_transport(&model, &PathSpec::segment(&a, &b, 10), ProlongSection { psi: psi0.clone(), x: x0.clone() }).map(|out| {
            let expect = &psi0 + &dcoeff_form(&x0, &TangentVec(&b - &a), &g, &basis);
            let s = &out.sections[0];
            let scale = 1.0 + g.norm(&psi0) + g.vec_norm(&x0);
            g.norm(&(&s.psi - &expect)).max(g.vec_norm(&TangentVec(&s.x.0 - &x0.0))) / scale
        });
        tr.push(res);
    }
    out.push(max_of("flat_transport_closed_form", cfg, tr));
    out.extend(holonomy_checks(&model, cfg, "holonomy_flat_fixed_dim", "holonomy_flat_gap", None));
    Ok(out)
}

pub fn hpn(cfg: &SuiteConfig) -> CliResult<Vec<Check>> {
    let model = ChartModel::hpn(cfg.n)?;
    let m = model.dim();
    let steps = cfg.steps();
    let mut out = Vec::new();

    // curvature of the chart against R_ν at the centre and random points
    let mut rng = rng_for(cfg, "hpn_geometry");
    let mut pts = vec![DVector::zeros(m)];
    pts.extend((0..10).map(|_| random_point_in_ball(m, 0.5, &mut rng)));
    let samples = cfg.exec().map(pts, |p| model.sample(&p));
    let (mut weyl, mut spread, mut comm): (Vec<Result<f64, String>>, Vec<_>, Vec<_>) = (Vec::new(), Vec::new(), Vec::new());
    for (k, s) in samples.into_iter().enumerate() {
        match s {
            Ok(s) => {
                let rn = s.rg.norm(&s.g);
                weyl.push(Ok(s.rg.minus(&base_curvature(&s.g, &s.basis, model.nu())).norm(&s.g) / rn));
                spread.push(Ok((s.nu_local - model.nu()).abs() / model.nu().abs()));
                let ctx = match model.context_at(&s.p) {
                    Ok(c) => c,
                    Err(e) => {
                        comm.push(Err(e.to_string()));
                        continue;
                    }
                };
                let mut r = qkck::sampling::seeded(k as u64);
                let (y, z, sec) = random_rd_input(&s.g, &s.basis, &mut r);
                let (f, v) = curvature_rd_commutator(&y, &z, &sec, &ctx, &s.rg);
                comm.push(Ok((s.g.inner(&f, &f) + s.g.dot(&v, &v)).sqrt() / rn));
            }
            Err(e) => {
                weyl.push(Err(e.to_string()));
                spread.push(Err(e.to_string()));
                comm.push(Err(e.to_string()));
            }
        }
    }
    out.push(max_of("hpn_weyl_residual", cfg, weyl));
    out.push(max_of("hpn_nu_spread", cfg, spread));
    out.push(Check::measure("hpn_nu_value", (model.nu() - 4.0).abs(), cfg).with_note(format!("ν = {:.8}", model.nu())));
    out.push(rd_sweep(&model, cfg, "rd_hpn", 10 * cfg.samples));
    out.push(max_of("rd_hpn_commutator", cfg, comm));

    // isometries: independence of the 1-jets at the centre
    let fields = killing_fields_hpn(cfg.n);
    let o = DVector::zeros(m);
    let jets: Vec<qkck::Result<DVector<f64>>> = cfg.exec().map(fields.iter().collect(), |k| {
        let x = k.field.eval(&o)?;
        let n = model.nabla_vec(|q| k.field.eval(q), &o, steps.killing)?;
        Ok(DVector::from_iterator(m + m * m, x.0.iter().cloned().chain(n.iter().cloned())))
    });
    match jets.into_iter().collect::<qkck::Result<Vec<_>>>() {
        Ok(cols) => {
            let sv = DMatrix::from_columns(&cols).svd(false, false).singular_values;
            let rank = sv.iter().filter(|s| **s > 1e-8 * sv.max()).count();
            out.push(Check::rank("killing_count", rank, cfg).with_note(format!("{} generators", fields.len())));
        }
        Err(e) => out.push(Check::failed("killing_count", cfg, e)),
    }
    let mut rng = rng_for(cfg, "killing_checks");
    let cases: Vec<_> = (0..cfg.samples)
        .flat_map(|_| {
            let p = random_point_in_ball(m, 0.5, &mut rng);
            (0..fields.len()).map(move |i| (i, p.clone()))
        })
        .collect();
    let reports = cfg.exec().map(cases, |(i, p)| killing_check(&model, &fields[i].field, &p, steps.killing));
    let pick = |f: fn(&qkck::ckforms::KillingReport) -> f64| reports.iter().map(|r| r.as_ref().map(f).map_err(|e| e.to_string())).collect();
    out.push(max_of("killing_lie_derivative", cfg, pick(|r| r.lie_derivative)));
    out.push(max_of("killing_divergence", cfg, pick(|r| r.divergence)));
    out.push(max_of("killing_hw", cfg, pick(|r| r.hw_part)));
    Ok(out)
}

/// Gram rank of the fiber vectors `(ψ(0), δψ(0))` of the forms built from
/// the Killing fields, with the condition number of the Gram matrix.
pub fn killing_gram(model: &ChartModel, cfg: &SuiteConfig) -> qkck::Result<(usize, f64)> {
    let steps = cfg.steps();
    let o = DVector::zeros(model.dim());
    let geo = model.point_geometry(&o)?;
    let fields = killing_fields_hpn(cfg.n);
    let vecs = cfg.exec().map(fields.iter().collect(), |k| {
        let psi = killing_to_ck(model, &k.field, steps.killing)?.memoized(10_000);
        let x = codifferential(model, &psi, &o, steps.form)?;
        Ok((psi.eval(&o)?, x))
    });
    let vecs: Vec<_> = vecs.into_iter().collect::<qkck::Result<Vec<_>>>()?;
    let k = vecs.len();
    let gram = DMatrix::from_fn(k, k, |a, b| geo.g.inner(&vecs[a].0, &vecs[b].0) + geo.g.dot(&vecs[a].1, &vecs[b].1));
    let mut ev: Vec<f64> = SymmetricEigen::new(gram).eigenvalues.iter().cloned().collect();
    ev.sort_by(f64::total_cmp);
    let top = *ev.last().unwrap_or(&0.0);
    let rank = ev.iter().filter(|e| **e > 1e-10 * top).count();
    let cond = if rank == k { top / ev[0] } else { f64::INFINITY };
    debug_assert!(compatible_basis(&geo.g, &geo.basis).len() + model.dim() == cfg.bundle_rank());
    Ok((rank, cond))
}

pub fn dim(cfg: &SuiteConfig) -> CliResult<Vec<Check>> {
    let model = ChartModel::hpn(cfg.n)?;
    let mut out = holonomy_checks(&model, cfg, "holonomy_fixed_dim", "holonomy_gap", Some("holonomy_drift"));
    match killing_gram(&model, cfg) {
        Ok((rank, cond)) => out.push(Check::rank("killing_gram_rank", rank, cfg).with_note(format!("Gram condition number {cond:.4e}"))),
        Err(e) => out.push(Check::failed("killing_gram_rank", cfg, e)),
    }
    Ok(out)
}
