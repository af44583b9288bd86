//! Pointwise suites: quaternionic algebra, model curvature, `Gr2(C^4)`.

use nalgebra::{DMatrix, DVector};
use qkck::curvalg::{
    base_curvature, check_identity_put, curvature_rd, curvature_rd_commutator, validate_weylq, weylq_grassmannian,
    CurvatureOp, ProlongSection, QKContext,
};
use qkck::qalg::{compatible_basis, project, s2e_basis, AdmissibleBasis, Metric, TangentVec, TwoForm};
use qkck::sampling::{random_structure, random_tangent, random_two_form, Rng64};
use rand::Rng;

use super::{max_of, rng_for};
use crate::config::SuiteConfig;
use crate::report::Check;
use crate::{CliError, CliResult};

fn unit_section(g: &Metric, b: &AdmissibleBasis, rng: &mut Rng64) -> ProlongSection {
    let m = g.dim();
    let mut s = ProlongSection::compatible(&random_two_form(m, rng), random_tangent(m, rng), g, b);
    let norm = s.norm(g);
    s.psi = &s.psi * (1.0 / norm);
    s.x.0 /= norm;
    s
}

fn unit_vec(g: &Metric, rng: &mut Rng64) -> TangentVec {
    let v = random_tangent(g.dim(), rng);
    let l = g.vec_norm(&v);
    TangentVec(v.0 / l)
}

fn rd_norm(g: &Metric, rd: &(TwoForm, TangentVec)) -> f64 {
    (g.inner(&rd.0, &rd.0) + g.dot(&rd.1, &rd.1)).sqrt()
}

pub fn qalg(cfg: &SuiteConfig) -> CliResult<Vec<Check>> {
    let n = cfg.n;
    let k = 10 * cfg.samples;
    let mut out = Vec::new();
    let structures = |name: &str| {
        let mut rng = rng_for(cfg, name);
        (0..k.min(50)).map(move |_| random_structure(n, &mut rng))
    };
    out.push(max_of("basis_relations", cfg, structures("basis_relations").map(|r| r.map(|(g, b)| b.residuals(&g).max())).collect()));
    out.push(max_of(
        "kahler_norms",
        cfg,
        structures("kahler_norms")
            .map(|r| {
                r.map(|(g, b)| b.omega.iter().map(|w| (g.inner(w, w) - (2 * n) as f64).abs()).fold(0.0, f64::max))
            })
            .collect(),
    ));
    let mut rng = rng_for(cfg, "projection_identities");
    let mut proj: Vec<qkck::Result<f64>> = Vec::new();
    for _ in 0..k {
        let (g, b) = random_structure(n, &mut rng)?;
        let psi = random_two_form(4 * n, &mut rng);
        let s = project(&psi, &b, &g);
        let scale = g.norm(&psi);
        let sum = g.norm(&(&(&(&s.s2h + &s.s2e) + &s.hw) - &psi));
        let stable = g.norm(&(&project(&s.s2h, &b, &g).s2h - &s.s2h))
            .max(g.norm(&(&project(&s.s2e, &b, &g).s2e - &s.s2e)))
            .max(g.norm(&(&project(&s.hw, &b, &g).hw - &s.hw)));
        let ortho = g.inner(&s.s2h, &s.s2e).abs().max(g.inner(&s.s2h, &s.hw).abs()).max(g.inner(&s.s2e, &s.hw).abs());
        proj.push(Ok(sum.max(stable).max(ortho) / scale));
    }
    out.push(max_of("projection_identities", cfg, proj));
    let (g, b) = random_structure(n, &mut rng_for(cfg, "s2e_dimension"))?;
    let d = s2e_basis(&g, &b).len() as f64 - (n * (2 * n + 1)) as f64;
    out.push(Check::measure("s2e_dimension", d.abs(), cfg).with_note(format!("compatible forms: {}", compatible_basis(&g, &b).len())));
    let mut rng = rng_for(cfg, "put_identity");
    let mut put: Vec<qkck::Result<f64>> = Vec::new();
    for _ in 0..k {
        let (g, b) = random_structure(n, &mut rng)?;
        let a = project(&random_two_form(4 * n, &mut rng), &b, &g).s2e;
        let v = project(&random_two_form(4 * n, &mut rng), &b, &g).s2e;
        put.push(check_identity_put(&a, &v, &g, &b));
    }
    out.push(max_of("put_identity", cfg, put));
    let mut rng = rng_for(cfg, "form_endo_roundtrip");
    let mut rt: Vec<qkck::Result<f64>> = Vec::new();
    for _ in 0..k {
        let (g, _) = random_structure(n, &mut rng)?;
        let psi = random_two_form(4 * n, &mut rng);
        let back = g.endo_to_form(&g.form_to_endo(&psi));
        rt.push(Ok(g.norm(&(&back - &psi)) / g.norm(&psi)));
    }
    out.push(max_of("form_endo_roundtrip", cfg, rt));
    Ok(out)
}

pub fn curvature(cfg: &SuiteConfig) -> CliResult<Vec<Check>> {
    let n = cfg.n;
    let m = 4 * n;
    let k = 10 * cfg.samples;
    let mut out = Vec::new();
    let mut rng = rng_for(cfg, "base_spectrum");
    let mut spec: Vec<qkck::Result<f64>> = Vec::new();
    for _ in 0..k.min(50) {
        let (g, b) = random_structure(n, &mut rng)?;
        let nu: f64 = rng.gen_range(-4.0..4.0);
        let r = base_curvature(&g, &b, nu);
        let psi = random_two_form(m, &mut rng);
        let s = project(&psi, &b, &g);
        let expect = &(&s.s2h * (-(n as f64) * nu)) + &(&s.s2e * -nu);
        spec.push(Ok(g.norm(&(&r.apply(&psi, &g) - &expect)) / g.norm(&psi)));
    }
    out.push(max_of("base_spectrum", cfg, spec));
    let mut rng = rng_for(cfg, "base_einstein");
    let mut ein: Vec<qkck::Result<f64>> = Vec::new();
    for _ in 0..k.min(50) {
        let (g, b) = random_structure(n, &mut rng)?;
        let nu: f64 = rng.gen_range(-4.0..4.0);
        let ric = base_curvature(&g, &b, nu).ricci(&g);
        ein.push(Ok((ric - g.matrix() * (nu * (n + 2) as f64)).amax()));
    }
    out.push(max_of("base_einstein", cfg, ein));
    let (g, b) = random_structure(n, &mut rng_for(cfg, "weyl_validator"))?;
    let wrong = (!validate_weylq(&CurvatureOp::zeros(m), &g, &b).pass) as u8 + validate_weylq(&base_curvature(&g, &b, 1.0), &g, &b).pass as u8;
    out.push(Check::measure("weyl_validator", wrong as f64, cfg));
    let mut rng = rng_for(cfg, "rd_algebraic");
    let mut rd: Vec<qkck::Result<f64>> = Vec::new();
    for _ in 0..k {
        let (g, b) = random_structure(n, &mut rng)?;
        let nu: f64 = rng.gen_range(-4.0..4.0);
        let ctx = QKContext::without_weyl(g.clone(), b.clone(), nu)?;
        let s = unit_section(&g, &b, &mut rng);
        let (y, z) = (unit_vec(&g, &mut rng), unit_vec(&g, &mut rng));
        rd.push(Ok(rd_norm(&g, &curvature_rd(&y, &z, &s, &ctx))));
    }
    out.push(max_of("rd_algebraic", cfg, rd));
    let mut rng = rng_for(cfg, "rd_commutator_base");
    let mut rc: Vec<qkck::Result<f64>> = Vec::new();
    for _ in 0..k {
        let (g, b) = random_structure(n, &mut rng)?;
        let nu: f64 = rng.gen_range(-4.0..4.0);
        let r = base_curvature(&g, &b, nu);
        let ctx = QKContext::without_weyl(g.clone(), b.clone(), nu)?;
        let s = unit_section(&g, &b, &mut rng);
        let (y, z) = (unit_vec(&g, &mut rng), unit_vec(&g, &mut rng));
        rc.push(Ok(rd_norm(&g, &curvature_rd_commutator(&y, &z, &s, &ctx, &r)) / (1.0 + nu * nu)));
    }
    out.push(max_of("rd_commutator_base", cfg, rc));
    Ok(out)
}

/// Dimension of the common kernel of `s ↦ R^D_{e_a, e_b} s` over the
/// prolongation fiber.
fn rd_kernel_dim(ctx: &QKContext) -> usize {
    let g = &ctx.g;
    let m = g.dim();
    let forms = compatible_basis(g, &ctx.basis);
    let rank = forms.len() + m;
    let frame: Vec<TangentVec> = (0..m).map(|k| g.frame_vec(k)).collect();
    let mut cols = Vec::with_capacity(rank);
    for i in 0..rank {
        let s = if i < forms.len() {
            ProlongSection { psi: forms[i].clone(), x: TangentVec::zeros(m) }
        } else {
            ProlongSection { psi: TwoForm::zeros(m), x: frame[i - forms.len()].clone() }
        };
        let mut col = Vec::new();
        for a in 0..m {
            for b in a + 1..m {
                let (f, v) = curvature_rd(&frame[a], &frame[b], &s, ctx);
                col.extend(f.upper_components());
                col.extend(v.0.iter().cloned());
            }
        }
        cols.push(DVector::from_vec(col));
    }
    let mat = DMatrix::from_columns(&cols);
    let sv = mat.svd(false, false).singular_values;
    let tol = 1e-9 * sv.max();
    rank - sv.iter().filter(|s| **s > tol).count()
}

pub fn grassmannian(cfg: &SuiteConfig) -> CliResult<Vec<Check>> {
    if cfg.n != 2 {
        return Err(CliError::Config("the Gr2(C^4) model exists only for n = 2".into()));
    }
    let (ctx, r) = weylq_grassmannian()?;
    let g = &ctx.g;
    let w = ctx.w.op();
    let mut out = Vec::new();
    out.push(Check::measure("gr2_weylq_valid", validate_weylq(w, g, &ctx.basis).max_residual(), cfg));
    let wn = w.norm(g);
    out.push(Check::measure("gr2_weyl_ratio", wn / r.norm(g), cfg));
    let k = 10 * cfg.samples;
    let mut rng = rng_for(cfg, "RD_nonzero");
    let mut best: f64 = 0.0;
    for _ in 0..k {
        let s = unit_section(g, &ctx.basis, &mut rng);
        let (y, z) = (unit_vec(g, &mut rng), unit_vec(g, &mut rng));
        best = best.max(rd_norm(g, &curvature_rd(&y, &z, &s, &ctx)));
    }
    out.push(Check::measure("RD_nonzero", best / wn, cfg).with_note(format!("|W| = {wn:.6e}")));
    let mut rng = rng_for(cfg, "rd_commutator_gr2");
    let mut diff: f64 = 0.0;
    for _ in 0..k {
        let s = unit_section(g, &ctx.basis, &mut rng);
        let (y, z) = (unit_vec(g, &mut rng), unit_vec(g, &mut rng));
        let a = curvature_rd(&y, &z, &s, &ctx);
        let b = curvature_rd_commutator(&y, &z, &s, &ctx, &r);
        diff = diff.max(rd_norm(g, &(&a.0 - &b.0, TangentVec(&a.1 .0 - &b.1 .0))));
    }
    out.push(Check::measure("rd_commutator_gr2", diff, cfg));
    out.push(Check::measure("rd_kernel_dim", rd_kernel_dim(&ctx) as f64, cfg));
    Ok(out)
}
