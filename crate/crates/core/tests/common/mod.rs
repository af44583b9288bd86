//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use qkck::curvalg::{dcoeff_form, dcoeff_vec, CurvatureOp, ProlongSection, QKContext};
use qkck::qalg::{endo_bracket_on_form, TangentVec, TwoForm};

/// `A_Z(psi, X) = (-dcoeff_form(X, Z), -dcoeff_vec(psi, Z))`, so that the
/// prolongation connection is `∇_Z + A_Z`.
pub fn a_z(z: &TangentVec, s: &ProlongSection, ctx: &QKContext) -> ProlongSection {
    ProlongSection {
        psi: dcoeff_form(&s.x, z, &ctx.g, &ctx.basis) * -1.0,
        x: TangentVec(dcoeff_vec(&s.psi, z, ctx).0 * -1.0),
    }
}

/// Curvature of `∇ + A` when `A` is built from parallel tensors:
/// `R^∇_{Y,Z} + [A_Y, A_Z]`, with `r` the Riemann tensor at the point.
pub fn rd_by_commutator(
    y: &TangentVec,
    z: &TangentVec,
    s: &ProlongSection,
    ctx: &QKContext,
    r: &CurvatureOp,
) -> (TwoForm, TangentVec) {
    let ryz = r.endo(y, z, &ctx.g);
    let mut psi = endo_bracket_on_form(&ryz, &s.psi, &ctx.g);
    let mut x = &ryz.0 * &s.x.0;
    let yz = a_z(y, &a_z(z, s, ctx), ctx);
    let zy = a_z(z, &a_z(y, s, ctx), ctx);
    psi += &(yz.psi - zy.psi);
    x += yz.x.0 - zy.x.0;
    (psi, TangentVec(x))
}
