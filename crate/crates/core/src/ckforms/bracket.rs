use nalgebra::{DMatrix, DVector};

use super::fields::{FormField, OneFormField, Provenance, VecField};
use super::{codifferential_field, form_jet, interior3};
use crate::fd::FdScheme;
use crate::manifolds::ChartModel;
use crate::qalg::{interior, Point, TangentVec, TwoForm};
use crate::Result;

/// `L_X psi = i_X dpsi + d(i_X psi)` at `p`.
pub fn lie_derivative(model: &ChartModel, x: &VecField, psi: &FormField, p: &Point, scheme: FdScheme) -> Result<TwoForm> {
    let jet = form_jet(model, psi, p, scheme)?;
    let xp = x.eval(p)?;
    let first = interior3(&xp, &jet.exterior_derivative());
    let x = x.clone();
    let psi = psi.clone();
    let alpha = OneFormField::new(Provenance::constructed("i_X psi"), move |q| Ok(interior(&x.eval(q)?, &psi.eval(q)?)));
    Ok(first + exterior_derivative_one_form(&alpha, p, scheme)?)
}

/// `(dα)_{ab} = ∂_a α_b - ∂_b α_a`.
pub fn exterior_derivative_one_form(alpha: &OneFormField, p: &Point, scheme: FdScheme) -> Result<TwoForm> {
    let m = p.len();
    let da = scheme.partials(p, |q| Ok(alpha.eval(q)?.0.as_slice().to_vec()))?;
    Ok(TwoForm::from_matrix(DMatrix::from_fn(m, m, |a, b| da[a][b] - da[b][a])))
}

/// `[X, Y] = (∂Y) X - (∂X) Y` in coordinates.
pub fn vector_bracket(x: &VecField, y: &VecField, p: &Point, scheme: FdScheme) -> Result<TangentVec> {
    let xp = x.eval(p)?;
    let yp = y.eval(p)?;
    let dy = scheme.directional(p, &xp.0, |q| Ok(y.eval(q)?.0.as_slice().to_vec()))?;
    let dx = scheme.directional(p, &yp.0, |q| Ok(x.eval(q)?.0.as_slice().to_vec()))?;
    Ok(TangentVec(DVector::from_vec(dy) - DVector::from_vec(dx)))
}

/// The bracket `½(L_{δψ1} ψ2 - L_{δψ2} ψ1)` as a field, with the two
/// codifferentials it was built from.
#[derive(Debug, Clone)]
pub struct CkBracket {
    pub field: FormField,
    pub x1: VecField,
    pub x2: VecField,
}

/// `inner` differentiates the inputs for `δ`; `outer` is used for the Lie
/// derivatives (one nesting level up, so normally a larger step).
pub fn ck_bracket(model: &ChartModel, psi1: &FormField, psi2: &FormField, inner: FdScheme, outer: FdScheme) -> CkBracket {
    let x1 = codifferential_field(model, psi1, inner);
    let x2 = codifferential_field(model, psi2, inner);
    let (m, p1, p2, a, b) = (model.clone(), psi1.clone(), psi2.clone(), x1.clone(), x2.clone());
    let field =
        FormField::new(Provenance::constructed("CK bracket"), move |q| bracket_at(&m, (&p1, &a), (&p2, &b), q, outer));
    CkBracket { field: field.memoized(50_000), x1, x2 }
}

/// `½(L_{x1} ψ2 - L_{x2} ψ1)` at `p` for given pairs `(ψ_i, x_i = δψ_i)`;
/// lets callers share memoised codifferentials between many brackets.
pub fn bracket_at(
    model: &ChartModel,
    first: (&FormField, &VecField),
    second: (&FormField, &VecField),
    p: &Point,
    scheme: FdScheme,
) -> Result<TwoForm> {
    let l1 = lie_derivative(model, first.1, second.0, p, scheme)?;
    let l2 = lie_derivative(model, second.1, first.0, p, scheme)?;
    Ok((l1 - l2) * 0.5)
}

/// Least-squares expansion of a vector in a spanning set.
#[derive(Debug, Clone)]
pub struct SpanFit {
    pub coefficients: DVector<f64>,
    /// `|target - Σ c_k v_k| / |target|` (absolute when the target is 0).
    pub residual: f64,
}

/// Fit `target ≈ Σ c_k columns[k]` (pseudo-inverse, relative cutoff 1e-12).
pub fn fit_span(columns: &DMatrix<f64>, target: &DVector<f64>) -> SpanFit {
    let svd = columns.clone().svd(true, true);
    let eps = 1e-12 * svd.singular_values.max();
    let c = svd.solve(target, eps).expect("both factors computed");
    let r = (columns * &c - target).norm();
    let t = target.norm();
    SpanFit { coefficients: c, residual: if t > 0.0 { r / t } else { r } }
}
