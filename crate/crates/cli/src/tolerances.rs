//! Every threshold used by the suites, keyed by check name.

use crate::report::Comparison::{self, AtLeast, AtMost, Equal};

#[derive(Debug, Clone, Copy)]
pub struct ToleranceSpec {
    pub name: &'static str,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub statement: &'static str,
}

const fn t(name: &'static str, tolerance: f64, comparison: Comparison, statement: &'static str) -> ToleranceSpec {
    ToleranceSpec { name, tolerance, comparison, statement }
}

/// Rank `(n+1)(2n+3)` for `n = 2`; suites with other `n` compare against
/// their own value through [`crate::SuiteConfig::bundle_rank`].
pub const RANK_N2: f64 = 21.0;

pub const TABLE: &[ToleranceSpec] = &[
    // qalg
    t("basis_relations", 1e-10, AtMost, "J_i^2 = -1, J_1J_2 = J_3, J_i orthogonal and anticommuting"),
    t("kahler_norms", 1e-10, AtMost, "|ω_i|^2 = 2n for the Kähler forms of an admissible basis"),
    t("projection_identities", 1e-10, AtMost, "S²H, S²E, hw projectors are idempotent, orthogonal and sum to the identity"),
    t("s2e_dimension", 0.0, AtMost, "dim S²E = n(2n+1)"),
    t("put_identity", 1e-10, AtMost, "(A∧Id)^{S²E}(v) = [A, v] for A, v in S²E"),
    t("form_endo_roundtrip", 1e-12, AtMost, "2-forms and skew endomorphisms correspond isometrically"),
    // curvature
    t("base_spectrum", 1e-10, AtMost, "R_ν acts by -nν on S²H, -ν on S²E, 0 on hw"),
    t("base_einstein", 1e-10, AtMost, "R_ν is Einstein with Ric = ν(n+2) g"),
    t("weyl_validator", 0.0, AtMost, "the W^Q validator accepts 0 and rejects R_ν (count of misclassifications)"),
    t("rd_algebraic", 1e-10, AtMost, "R^D vanishes when W^Q = 0 (closed form, random admissible frames)"),
    t("rd_commutator_base", 1e-10, AtMost, "R^∇ + [A, A] vanishes for R = R_ν (second route)"),
    // flat
    t("rd_flat", 1e-10, AtMost, "R^D = 0 on flat H^n"),
    t("flat_family_ck", 1e-9, AtMost, "ψ0 + dcoeff(X0, x) solves the conformal-Killing equation on H^n"),
    t("flat_family_codifferential", 1e-10, AtMost, "δ(ψ0 + dcoeff(X0, x)) = X0"),
    t("flat_transport_closed_form", 1e-10, AtMost, "D-parallel transport on H^n matches the affine closed form"),
    t("holonomy_flat_fixed_dim", RANK_N2, Equal, "every section of the prolongation bundle is D-parallel on H^n"),
    t("holonomy_flat_gap", 1e3, AtLeast, "fixed-space gap ratio of the flat holonomy"),
    // hpn
    t("hpn_weyl_residual", 1e-4, AtMost, "the HP^n chart curvature equals R_ν (W^Q = 0), relative"),
    t("hpn_nu_spread", 1e-4, AtMost, "ν is constant over the chart, relative"),
    t("hpn_nu_value", 1e-4, AtMost, "|ν - 4| for the HP^n metric with sectional curvature in [1, 4]"),
    t("rd_hpn", 1e-10, AtMost, "R^D = 0 on HP^n (closed form with the measured structure)"),
    t("rd_hpn_commutator", 1e-4, AtMost, "R^∇ + [A, A] = 0 with the finite-difference Riemann tensor of HP^n, relative"),
    t("killing_count", RANK_N2, Equal, "dim sp(n+1) = (n+1)(2n+3)"),
    t("killing_lie_derivative", 1e-5, AtMost, "L_X g = 0 for the sp(n+1) fields"),
    t("killing_divergence", 1e-5, AtMost, "div X = 0 for the sp(n+1) fields"),
    t("killing_hw", 1e-4, AtMost, "∇X has no hw part for Killing X"),
    // grassmannian
    t("gr2_weylq_valid", 1e-9, AtMost, "the Gr2(C^4) remainder W^Q is J-invariant, Ricci-null and algebraic"),
    t("gr2_weyl_ratio", 0.1, AtLeast, "|W^Q| / |R| on Gr2(C^4)"),
    t("RD_nonzero", 1e-3, AtLeast, "max |R^D| / |W^Q| over random evaluations on Gr2(C^4)"),
    t("rd_commutator_gr2", 1e-10, AtMost, "closed-form R^D equals R^∇ + [A, A] on Gr2(C^4)"),
    t("rd_kernel_dim", RANK_N2 - 1.0, AtMost, "common kernel of R^D on Gr2(C^4) is a proper subspace"),
    // ck
    t("transported_ck_residual", 1e-4, AtMost, "D-parallel sections are conformal-Killing forms"),
    t("transported_codifferential", 1e-4, AtMost, "X = δψ for D-parallel (ψ, X)"),
    t("transported_drift", 1e-5, AtMost, "hw component removed during transport"),
    t("killing_ck_parallel", 1e-4, AtMost, "(ψ_X, X) is D-parallel for the form ψ_X built from a Killing field X"),
    t("killing_ck_codifferential", 1e-4, AtMost, "δψ_X = X"),
    t("codiff_ratio_s2h", 1e-4, AtMost, "δψ^{S²H} = -3/(4n-1) δψ, relative"),
    t("codiff_ratio_s2e", 1e-4, AtMost, "δψ^{S²E} = (4n+2)/(4n-1) δψ, relative"),
    t("dpsi_formula", 1e-4, AtMost, "dψ = -3/(4n-1) Σ J_iX ∧ ω_i"),
    t("twistor_equation", 1e-4, AtMost, "∇_Y ψ^{S²H} + 1/(4n-1) Σ ω_i(X, Y) ω_i = 0"),
    t("penrose_residual", 1e-4, AtMost, "the Penrose operator annihilates σ = 2/(3ν) (∇X)^{S²H}"),
    t("penrose_inverse", 1e-4, AtMost, "δσ = X for σ = 2/(3ν) (∇X)^{S²H}"),
    t("s2e_roundtrip", 1e-4, AtMost, "ψ = u - (∇δu)^{S²H} / ((2n+1)ν) with u = ψ^{S²E}"),
    t("hamiltonian_equation", 1e-4, AtMost, "∇_Y u = 1/(4n-1) (X∧Y + Σ J_iX∧J_iY), X = (4n-1)/(4n+2) δu"),
    // bracket
    t("bracket_codifferential", 1e-3, AtMost, "δ[ψ1, ψ2] = [δψ1, δψ2], relative"),
    t("bracket_compatible", 1e-4, AtMost, "[ψ1, ψ2] has no hw part, relative to the largest bracket"),
    t("bracket_closure", 1e-4, AtMost, "brackets of the conformal-Killing basis lie in its span, relative to the largest bracket"),
    t("structure_constants", 1e-3, AtMost, "bracket structure constants equal those of the Killing fields"),
    t("killing_structure", 1e-6, AtMost, "Killing-field structure constants equal minus the sp(n+1) commutator"),
    t("jacobi", 1e-3, AtMost, "Jacobi identity for the conformal-Killing bracket, relative, random triples"),
    // dim
    t("holonomy_fixed_dim", RANK_N2, Equal, "dim of the holonomy fixed space of D on HP^n is (n+1)(2n+3)"),
    t("holonomy_gap", 1e3, AtLeast, "fixed-space gap ratio of the HP^n holonomy"),
    t("holonomy_drift", 1e-5, AtMost, "hw component removed during holonomy transport"),
    t("killing_gram_rank", RANK_N2, Equal, "the forms built from the Killing fields are independent"),
];

pub fn lookup(name: &str) -> ToleranceSpec {
    *TABLE.iter().find(|s| s.name == name).unwrap_or_else(|| panic!("check {name} has no tolerance entry"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique_and_statements_present() {
        let mut names: Vec<&str> = TABLE.iter().map(|s| s.name).collect();
        names.sort();
        let before = names.len();
        names.dedup();
        assert_eq!(before, names.len());
        assert!(TABLE.iter().all(|s| !s.statement.is_empty()));
    }
}
