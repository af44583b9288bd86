//! Conformal-Killing 2-forms: field calculus, residuals, prolongation
//! transport, holonomy counts, Killing fields of `HP^n`, the `S²E`
//! correspondence and the bracket.

mod bracket;
mod fields;
mod holonomy;
mod killing;
mod transport;

pub use bracket::{bracket_at, ck_bracket, exterior_derivative_one_form, fit_span, lie_derivative, vector_bracket, CkBracket, SpanFit};
pub use fields::{FormField, OneFormField, Provenance, VecField};
pub use holonomy::{holonomy_dimension, holonomy_matrices, random_loop, HolonomyMatrices, HolonomyOptions, HolonomyReport};
pub use killing::{killing_check, killing_fields_hpn, killing_vector, sp_basis, KillingField, KillingReport, QuatMatrix};
pub use transport::{prolong_transport, transport_many, PathSpec, TransportOutcome, TransportedSection, DRIFT_LIMIT};

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::curvalg::{dcoeff_form, dcoeff_vec, ProlongSection};
use crate::fd::FdScheme;
use crate::manifolds::{ChartModel, PointGeometry};
use crate::qalg::{project, s2e_part, wedge, DenseForm, OneForm, Point, TangentVec, TwoForm};
use crate::{QkError, Result};

/// A 2-form field with its first coordinate derivatives at one point.
#[derive(Debug, Clone)]
pub struct FormJet {
    pub psi: TwoForm,
    /// `∂_k psi`.
    pub partials: Vec<TwoForm>,
    /// `∇_{∂_k} psi`.
    pub nabla: Vec<TwoForm>,
    pub geo: Arc<PointGeometry>,
}

/// First jet of `psi` at `p`.
pub fn form_jet(model: &ChartModel, psi: &FormField, p: &Point, scheme: FdScheme) -> Result<FormJet> {
    let m = model.dim();
    model.check_point(p, scheme.reach())?;
    let geo = model.point_geometry(p)?;
    let value = psi.eval(p)?;
    let raw = scheme.partials(p, |q| Ok(psi.eval(q)?.upper_components()))?;
    let partials: Vec<TwoForm> = raw.iter().map(|c| TwoForm::from_upper_components(m, c)).collect();
    let nabla = partials
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let mk = geo.gamma.along(&TangentVec::basis(m, k).0);
            d - &TwoForm::from_matrix(mk.transpose() * value.matrix() + value.matrix() * &mk)
        })
        .collect();
    Ok(FormJet { psi: value, partials, nabla, geo })
}

impl FormJet {
    pub fn dim(&self) -> usize {
        self.psi.dim()
    }

    /// `∇_Z psi`.
    pub fn nabla_along(&self, z: &TangentVec) -> TwoForm {
        let mut out = TwoForm::zeros(self.dim());
        for (k, zk) in z.0.iter().enumerate() {
            if *zk != 0.0 {
                out += &(&self.nabla[k] * *zk);
            }
        }
        out
    }

    /// `δpsi = -Σ_k (∇_{e_k} psi)(e_k, ·)`, raised to a vector.
    pub fn codifferential(&self) -> TangentVec {
        let m = self.dim();
        let gi = self.geo.g.inverse();
        let mut lowered = DVector::zeros(m);
        for k in 0..m {
            for j in 0..m {
                let w = gi[(k, j)];
                if w == 0.0 {
                    continue;
                }
                for b in 0..m {
                    lowered[b] -= w * self.nabla[k].matrix()[(j, b)];
                }
            }
        }
        self.geo.g.raise(&OneForm(lowered))
    }

    /// `dpsi_{abc} = ∂_a psi_{bc} + ∂_b psi_{ca} + ∂_c psi_{ab}`.
    pub fn exterior_derivative(&self) -> DenseForm {
        alternating_derivative(&self.partials)
    }

    /// Same from the covariant derivative; agrees with
    /// [`FormJet::exterior_derivative`] because `∇` is torsion free.
    pub fn exterior_derivative_covariant(&self) -> DenseForm {
        alternating_derivative(&self.nabla)
    }
}

fn alternating_derivative(d: &[TwoForm]) -> DenseForm {
    let m = d.len();
    let mut out = DenseForm::zeros(3, m);
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                let v = d[a].matrix()[(b, c)] + d[b].matrix()[(c, a)] + d[c].matrix()[(a, b)];
                out.data[(a * m + b) * m + c] = v;
            }
        }
    }
    out
}

/// `(i_Y T)_{bc} = Y^a T_{abc}` for a 3-form.
pub fn interior3(y: &TangentVec, t: &DenseForm) -> TwoForm {
    let m = t.dim;
    let mut out = nalgebra::DMatrix::zeros(m, m);
    for a in 0..m {
        let ya = y.0[a];
        if ya == 0.0 {
            continue;
        }
        for b in 0..m {
            for c in 0..m {
                out[(b, c)] += ya * t.data[(a * m + b) * m + c];
            }
        }
    }
    TwoForm::from_matrix(out)
}

/// `δpsi` at `p`.
pub fn codifferential(model: &ChartModel, psi: &FormField, p: &Point, scheme: FdScheme) -> Result<TangentVec> {
    Ok(form_jet(model, psi, p, scheme)?.codifferential())
}

/// `dpsi` at `p` (coordinate differences).
pub fn exterior_derivative(model: &ChartModel, psi: &FormField, p: &Point, scheme: FdScheme) -> Result<DenseForm> {
    Ok(form_jet(model, psi, p, scheme)?.exterior_derivative())
}

/// Residuals of the conformal-Killing equation at a point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CkResidual {
    /// `max_Y |∇_Y psi - 1/3 i_Y dpsi + 1/(4n-1) Y ∧ δpsi|` over the
    /// coordinate directions.
    pub conformal_killing: f64,
    /// `max_Y |∇_Y psi - dcoeff_form(δpsi, Y)|` (compatible forms).
    pub prolongation: f64,
    /// `max |dpsi_coord - dpsi_covariant|` (torsion cross-check).
    pub torsion_check: f64,
    pub codifferential: Vec<f64>,
}

pub fn ck_residual(model: &ChartModel, psi: &FormField, p: &Point, scheme: FdScheme) -> Result<CkResidual> {
    let jet = form_jet(model, psi, p, scheme)?;
    Ok(ck_residual_from_jet(&jet, model.n()))
}

pub fn ck_residual_from_jet(jet: &FormJet, n: usize) -> CkResidual {
    let m = jet.dim();
    let g = &jet.geo.g;
    let d = jet.exterior_derivative();
    let dcov = jet.exterior_derivative_covariant();
    let delta = jet.codifferential();
    let c = 1.0 / (4 * n - 1) as f64;
    let mut ck: f64 = 0.0;
    let mut pro: f64 = 0.0;
    for k in 0..m {
        let y = TangentVec::basis(m, k);
        let r = &(&jet.nabla[k] - &(interior3(&y, &d) * (1.0 / 3.0))) + &(wedge(&y, &delta, g) * c);
        ck = ck.max(g.norm(&r));
        let r2 = &jet.nabla[k] - &dcoeff_form(&delta, &y, g, &jet.geo.basis);
        pro = pro.max(g.norm(&r2));
    }
    let torsion = d.data.iter().zip(&dcov.data).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    CkResidual { conformal_killing: ck, prolongation: pro, torsion_check: torsion, codifferential: delta.0.as_slice().to_vec() }
}

/// `𝒟_Z(psi, X)` with both parts, from fields.
pub fn prolongation_derivative(
    model: &ChartModel,
    psi: &FormField,
    x: &VecField,
    p: &Point,
    scheme: FdScheme,
) -> Result<Vec<ProlongSection>> {
    let jet = form_jet(model, psi, p, scheme)?;
    let nx = model.nabla_vec(|q| x.eval(q), p, scheme)?;
    let ctx = model.context_at(p)?;
    let xv = x.eval(p)?;
    let m = model.dim();
    Ok((0..m)
        .map(|k| {
            let z = TangentVec::basis(m, k);
            let f = &jet.nabla[k] - &dcoeff_form(&xv, &z, &ctx.g, &ctx.basis);
            let v = nx.column(k).into_owned() - dcoeff_vec(&jet.psi, &z, &ctx).0;
            ProlongSection { psi: f, x: TangentVec(v) }
        })
        .collect())
}

/// Value and residual of the Penrose operator on an `S²H`-valued field.
#[derive(Debug, Clone)]
pub struct PenroseResult {
    /// `D̄σ` in each coordinate direction.
    pub value: Vec<TwoForm>,
    pub residual: f64,
    pub codifferential: TangentVec,
}

/// `D̄σ = ∇σ + 1/3 Σ_i (δσ)∘J_i ⊗ ω_i`.
pub fn penrose(model: &ChartModel, sigma: &FormField, p: &Point, scheme: FdScheme) -> Result<PenroseResult> {
    let jet = form_jet(model, sigma, p, scheme)?;
    let g = &jet.geo.g;
    let basis = &jet.geo.basis;
    let split = project(&jet.psi, basis, g);
    let scale = g.norm(&jet.psi).max(f64::MIN_POSITIVE);
    let off = g.norm(&(split.s2e.clone() + split.hw.clone())) / scale;
    if off > 1e-8 {
        return Err(QkError::Precondition(format!("penrose: field is not S²H-valued (off part {off:e})")));
    }
    let delta = jet.codifferential();
    let dl = g.lower(&delta);
    let m = jet.dim();
    let mut value = Vec::with_capacity(m);
    let mut residual: f64 = 0.0;
    for k in 0..m {
        let y = TangentVec::basis(m, k);
        let mut v = jet.nabla[k].clone();
        for i in 0..3 {
            let jy = &basis.j[i].0 * &y.0;
            v += &(&basis.omega[i] * (dl.0.dot(&jy) / 3.0));
        }
        residual = residual.max(g.norm(&v));
        value.push(v);
    }
    Ok(PenroseResult { value, residual, codifferential: delta })
}

/// The `S²E` part of a form field.
pub fn s2e_field(model: &ChartModel, psi: &FormField) -> FormField {
    let model = model.clone();
    let psi = psi.clone();
    FormField::new(Provenance::constructed("S²E part"), move |q| {
        let geo = model.point_geometry(q)?;
        Ok(s2e_part(&psi.eval(q)?, &geo.basis))
    })
}

/// The `S²H` part of a form field.
pub fn s2h_field(model: &ChartModel, psi: &FormField) -> FormField {
    let model = model.clone();
    let psi = psi.clone();
    FormField::new(Provenance::constructed("S²H part"), move |q| {
        let geo = model.point_geometry(q)?;
        Ok(project(&psi.eval(q)?, &geo.basis, &geo.g).s2h)
    })
}

/// `δ` of a form field as a (memoised) vector field.
pub fn codifferential_field(model: &ChartModel, psi: &FormField, scheme: FdScheme) -> VecField {
    let model = model.clone();
    let psi = psi.clone();
    VecField::new(Provenance::constructed("codifferential"), move |q| codifferential(&model, &psi, q, scheme))
        .memoized(50_000)
}

/// The 2-form `(∇X)(Z, V) = g(∇_Z X, V)` (antisymmetric part).
pub fn nabla_vec_form(model: &ChartModel, x: &VecField, p: &Point, scheme: FdScheme) -> Result<TwoForm> {
    let n = model.nabla_vec(|q| x.eval(q), p, scheme)?;
    let geo = model.point_geometry(p)?;
    Ok(TwoForm::from_matrix(n.transpose() * geo.g.matrix()))
}

/// `(u, reconstructed)` with `u = psi^{S²E}` and
/// `reconstructed = u - (∇δu)^{S²H} / ((2n+1)ν)`.
pub fn s2e_correspondence(
    model: &ChartModel,
    psi: &FormField,
    inner: FdScheme,
    outer: FdScheme,
) -> Result<(FormField, FormField)> {
    let nu = model.nu();
    if nu == 0.0 {
        return Err(QkError::ZeroScalarCurvature);
    }
    let u = s2e_field(model, psi).memoized(50_000);
    let du = codifferential_field(model, &u, inner);
    let n = model.n();
    let m2 = model.clone();
    let u2 = u.clone();
    let rec = FormField::new(Provenance::constructed("S²E reconstruction"), move |q| {
        let f = nabla_vec_form(&m2, &du, q, outer)?;
        let geo = m2.point_geometry(q)?;
        let h = project(&f, &geo.basis, &geo.g).s2h;
        Ok(u2.eval(q)? - h * (1.0 / ((2 * n + 1) as f64 * nu)))
    });
    Ok((u, rec))
}

/// `max_Y |∇_Y u - 1/(4n-1)(X∧Y + Σ J_iX∧J_iY)|` with `X = (4n-1)/(4n+2) δu`;
/// also returns `X`.
pub fn hamiltonian_residual(model: &ChartModel, u: &FormField, p: &Point, scheme: FdScheme) -> Result<(f64, TangentVec)> {
    let jet = form_jet(model, u, p, scheme)?;
    let n = model.n();
    let g = &jet.geo.g;
    let basis = &jet.geo.basis;
    let x = TangentVec(jet.codifferential().0 * ((4 * n - 1) as f64 / (4 * n + 2) as f64));
    let m = model.dim();
    let mut worst: f64 = 0.0;
    for k in 0..m {
        let y = TangentVec::basis(m, k);
        let mut rhs = wedge(&x, &y, g);
        for j in &basis.j {
            rhs += &wedge(&TangentVec(&j.0 * &x.0), &TangentVec(&j.0 * &y.0), g);
        }
        let r = &jet.nabla[k] - &(rhs * (1.0 / (4 * n - 1) as f64));
        worst = worst.max(g.norm(&r));
    }
    Ok((worst, x))
}

/// `-3/(4n-1) Σ_i J_iX ∧ ω_i` as a 3-form.
pub fn expected_dpsi(x: &TangentVec, geo: &PointGeometry) -> DenseForm {
    let m = x.dim();
    let n = m / 4;
    let mut out = DenseForm::zeros(3, m);
    for i in 0..3 {
        let jx = TangentVec(&geo.basis.j[i].0 * &x.0);
        out.axpy(1.0, &DenseForm::one_wedge_two(&geo.g.lower(&jx), &geo.basis.omega[i]));
    }
    let mut scaled = DenseForm::zeros(3, m);
    scaled.axpy(-3.0 / (4 * n - 1) as f64, &out);
    scaled
}

/// Flat closed-form family `psi(x) = psi0 + dcoeff_form(X0, x)`; it is
/// conformal-Killing with `δpsi = X0`.
pub fn flat_ck_family(model: &ChartModel, psi0: TwoForm, x0: TangentVec) -> FormField {
    let basis = model.reference_basis().clone();
    let g = crate::qalg::Metric::identity(model.dim());
    FormField::new(Provenance::closed_form("flat CK family"), move |q| {
        Ok(&psi0 + &dcoeff_form(&x0, &TangentVec(q.clone()), &g, &basis))
    })
}

/// Killing field to compatible CK form:
/// `psi = 4/((4n-1)ν) (∇X)^{S²E} - 2/((4n-1)ν) (∇X)^{S²H}`.
pub fn killing_to_ck(model: &ChartModel, x: &VecField, scheme: FdScheme) -> Result<FormField> {
    let nu = model.nu();
    if nu == 0.0 {
        return Err(QkError::ZeroScalarCurvature);
    }
    let n = model.n();
    let a = 4.0 / ((4 * n - 1) as f64 * nu);
    let b = -2.0 / ((4 * n - 1) as f64 * nu);
    let model = model.clone();
    let x = x.clone();
    Ok(FormField::new(Provenance::constructed("from Killing field"), move |q| {
        let f = nabla_vec_form(&model, &x, q, scheme)?;
        let geo = model.point_geometry(q)?;
        let s = project(&f, &geo.basis, &geo.g);
        Ok(s.s2e * a + s.s2h * b)
    }))
}

/// `σ = 2/(3ν) (∇X)^{S²H}`.
pub fn twistor_from_killing(model: &ChartModel, x: &VecField, scheme: FdScheme) -> Result<FormField> {
    let nu = model.nu();
    if nu == 0.0 {
        return Err(QkError::ZeroScalarCurvature);
    }
    let model = model.clone();
    let x = x.clone();
    Ok(FormField::new(Provenance::constructed("twistor section"), move |q| {
        let f = nabla_vec_form(&model, &x, q, scheme)?;
        let geo = model.point_geometry(q)?;
        Ok(project(&f, &geo.basis, &geo.g).s2h * (2.0 / (3.0 * nu)))
    }))
}

/// `δpsi`, `δ(psi^{S²H})` and `δ(psi^{S²E})` at `p`.
#[derive(Debug, Clone)]
pub struct CodifferentialSplit {
    pub total: TangentVec,
    pub s2h: TangentVec,
    pub s2e: TangentVec,
}

impl CodifferentialSplit {
    /// `(|δψ^{S²H} - a δψ|, |δψ^{S²E} - b δψ|) / |δψ|` for the expected
    /// factors `a = -3/(4n-1)`, `b = (4n+2)/(4n-1)`.
    pub fn ratio_residuals(&self, n: usize) -> (f64, f64) {
        let a = -3.0 / (4 * n - 1) as f64;
        let b = (4 * n + 2) as f64 / (4 * n - 1) as f64;
        let t = self.total.0.norm().max(f64::MIN_POSITIVE);
        ((&self.s2h.0 - &self.total.0 * a).norm() / t, (&self.s2e.0 - &self.total.0 * b).norm() / t)
    }
}

pub fn codifferential_split(model: &ChartModel, psi: &FormField, p: &Point, scheme: FdScheme) -> Result<CodifferentialSplit> {
    Ok(CodifferentialSplit {
        total: codifferential(model, psi, p, scheme)?,
        s2h: codifferential(model, &s2h_field(model, psi), p, scheme)?,
        s2e: codifferential(model, &s2e_field(model, psi), p, scheme)?,
    })
}

/// `|dpsi + 3/(4n-1) Σ J_iX ∧ ω_i|` with `X = δpsi` (compatible CK forms).
pub fn dpsi_residual(model: &ChartModel, psi: &FormField, p: &Point, scheme: FdScheme) -> Result<f64> {
    let jet = form_jet(model, psi, p, scheme)?;
    let x = jet.codifferential();
    let mut r = jet.exterior_derivative();
    r.axpy(-1.0, &expected_dpsi(&x, &jet.geo));
    Ok(r.norm(&jet.geo.g))
}

/// `max_Y |∇_Y psi^{S²H} + 1/(4n-1) Σ_i ω_i(X, Y) ω_i|` with `X = δpsi`.
pub fn twistor_residual(model: &ChartModel, psi: &FormField, p: &Point, scheme: FdScheme) -> Result<f64> {
    let x = codifferential(model, psi, p, scheme)?;
    let jet = form_jet(model, &s2h_field(model, psi), p, scheme)?;
    let g = &jet.geo.g;
    let basis = &jet.geo.basis;
    let c = 1.0 / (4 * model.n() - 1) as f64;
    let m = model.dim();
    let mut worst: f64 = 0.0;
    for k in 0..m {
        let y = TangentVec::basis(m, k);
        let mut r = jet.nabla[k].clone();
        for om in &basis.omega {
            r += &(om * (c * om.eval(&x, &y)));
        }
        worst = worst.max(g.norm(&r));
    }
    Ok(worst)
}
