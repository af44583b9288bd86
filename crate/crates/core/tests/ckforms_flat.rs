use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use qkck::ckforms::*;
use qkck::curvalg::{dcoeff_form, ProlongSection};
use qkck::fd::FdScheme;
use qkck::manifolds::ChartModel;
use qkck::qalg::{project, s2h_part, Metric, OneForm, Point, TangentVec, TwoForm};
use qkck::sampling::{random_tangent, random_two_form, random_vector, seeded, Rng64};
use qkck::QkError;

const S: FdScheme = FdScheme::central4(1e-2);

fn flat() -> ChartModel {
    ChartModel::flat(2).unwrap()
}

fn compatible(m: &ChartModel, rng: &mut Rng64) -> TwoForm {
    project(&random_two_form(8, rng), m.reference_basis(), &Metric::identity(8)).compatible()
}

#[test]
fn constant_form_has_no_derivatives() {
    let m = flat();
    let mut rng = seeded(1);
    let psi = FormField::constant(random_two_form(8, &mut rng));
    let p = random_vector(8, &mut rng);
    assert!(codifferential(&m, &psi, &p, S).unwrap().0.amax() < 1e-12);
    assert!(exterior_derivative(&m, &psi, &p, S).unwrap().max_abs() < 1e-12);
    assert!(ck_residual(&m, &psi, &p, S).unwrap().conformal_killing < 1e-12);
    let omega1 = FormField::constant(m.reference_basis().omega[0].clone());
    assert!(codifferential(&m, &omega1, &p, S).unwrap().0.amax() < 1e-12);
}

#[test]
fn closed_form_family_is_conformal_killing_with_codifferential_x0() {
    let m = flat();
    let mut rng = seeded(2);
    for _ in 0..5 {
        let x0 = random_tangent(8, &mut rng);
        let fam = flat_ck_family(&m, compatible(&m, &mut rng), x0.clone());
        let p = random_vector(8, &mut rng);
        let r = ck_residual(&m, &fam, &p, S).unwrap();
        let d: Vec<f64> = r.codifferential.iter().zip(x0.0.iter()).map(|(a, b)| a - b).collect();
        assert!(d.iter().all(|v| v.abs() < 1e-10), "{d:?}");
        assert!(r.conformal_killing < 1e-9);
        assert!(r.prolongation < 1e-9);
    }
}

#[test]
fn generic_field_is_not_conformal_killing() {
    let m = flat();
    let mut rng = seeded(3);
    let a = random_two_form(8, &mut rng);
    let b = random_two_form(8, &mut rng);
    let psi = FormField::new(Provenance::closed_form("quadratic"), move |q: &Point| Ok(&a * q[0] + &b * (q[1] * q[2])));
    let p = random_vector(8, &mut rng);
    assert!(ck_residual(&m, &psi, &p, S).unwrap().conformal_killing > 1e-2);
}

#[test]
fn exterior_derivative_squares_to_zero() {
    let m = flat();
    let mut rng = seeded(4);
    let coeffs: Vec<DMatrix<f64>> = (0..8).map(|_| DMatrix::from_fn(8, 8, |_, _| rand_unit(&mut rng))).collect();
    let alpha = OneFormField::new(Provenance::closed_form("quadratic 1-form"), move |q: &Point| {
        Ok(OneForm(DVector::from_fn(8, |b, _| q.dot(&(&coeffs[b] * q)))))
    });
    let p = random_vector(8, &mut rng) * 0.5;
    let inner = FdScheme::central4(1e-3);
    let a2 = alpha.clone();
    let da = FormField::new(Provenance::constructed("d alpha"), move |q| exterior_derivative_one_form(&a2, q, inner));
    let dd = exterior_derivative(&m, &da, &p, FdScheme::central4(1e-2)).unwrap();
    assert!(dd.max_abs() < 1e-9, "{}", dd.max_abs());
    assert!(exterior_derivative_one_form(&alpha, &p, inner).unwrap().frobenius() > 1e-2);
}

fn rand_unit(rng: &mut Rng64) -> f64 {
    random_vector(1, rng)[0]
}

#[test]
fn flat_transport_matches_closed_form() {
    let m = flat();
    let mut rng = seeded(5);
    let g = Metric::identity(8);
    for _ in 0..3 {
        let psi0 = compatible(&m, &mut rng);
        let x0 = random_tangent(8, &mut rng);
        let a = random_vector(8, &mut rng);
        let b = random_vector(8, &mut rng);
        let out = prolong_transport(&m, &PathSpec::segment(&a, &b, 10), ProlongSection { psi: psi0.clone(), x: x0.clone() }).unwrap();
        let expect = &psi0 + &dcoeff_form(&x0, &TangentVec(&b - &a), &g, m.reference_basis());
        assert!((out.sections[0].psi.matrix() - expect.matrix()).amax() < 1e-10);
        assert!((&out.sections[0].x.0 - &x0.0).amax() < 1e-12);
        assert!(out.drift < 1e-12);
    }
}

#[test]
fn zero_section_stays_zero() {
    let m = flat();
    let a = DVector::zeros(8);
    let b = DVector::from_element(8, 1.0);
    let out = prolong_transport(&m, &PathSpec::segment(&a, &b, 5), ProlongSection::zeros(8)).unwrap();
    assert_eq!(out.sections[0], ProlongSection::zeros(8));
}

#[test]
fn transport_rejects_incompatible_start() {
    let m = flat();
    let mut rng = seeded(6);
    let bad = project(&random_two_form(8, &mut rng), m.reference_basis(), &Metric::identity(8)).hw;
    let path = PathSpec::segment(&DVector::zeros(8), &DVector::from_element(8, 1.0), 5);
    let r = prolong_transport(&m, &path, ProlongSection { psi: bad, x: TangentVec::zeros(8) });
    assert!(matches!(r, Err(QkError::Precondition(_))));
}

#[test]
fn parallel_forms_need_vanishing_x_on_flat_space() {
    // a compatible Killing form (X = 0) is parallel
    let m = flat();
    let mut rng = seeded(7);
    let psi0 = compatible(&m, &mut rng);
    let ts = TransportedSection::new(&m, DVector::zeros(8), ProlongSection { psi: psi0, x: TangentVec::zeros(8) }, 8);
    let p = random_vector(8, &mut rng);
    let jet = qkck::ckforms::form_jet(&m, &ts.psi_field(), &p, S).unwrap();
    assert!(jet.nabla.iter().all(|d| d.frobenius() < 1e-10));
}

#[test]
fn path_spec_reports_closure() {
    let a = DVector::zeros(8);
    let b = DVector::from_element(8, 0.1);
    assert!(PathSpec::new(vec![a.clone(), b.clone(), a.clone()], 3).is_closed());
    assert!(!PathSpec::segment(&a, &b, 3).is_closed());
    let json = serde_json::to_string(&PathSpec::segment(&a, &b, 3)).unwrap();
    let back: PathSpec = serde_json::from_str(&json).unwrap();
    assert_eq!(back.steps_per_segment, 3);
}

#[test]
fn penrose_vanishes_on_constant_sections() {
    let m = flat();
    let mut rng = seeded(8);
    let sigma = s2h_part(&random_two_form(8, &mut rng), m.reference_basis(), &Metric::identity(8));
    let p = random_vector(8, &mut rng);
    let r = penrose(&m, &FormField::constant(sigma), &p, S).unwrap();
    assert!(r.residual < 1e-12);
    let not_s2h = FormField::constant(random_two_form(8, &mut rng));
    assert!(penrose(&m, &not_s2h, &p, S).is_err());
}

#[test]
fn killing_check_on_flat_isometries() {
    let m = flat();
    let mut rng = seeded(9);
    let c = random_tangent(8, &mut rng);
    let constant = VecField::new(Provenance::closed_form("constant"), move |_| Ok(c.clone()));
    let r = random_two_form(8, &mut rng).into_matrix();
    let rotation = VecField::new(Provenance::closed_form("rotation"), move |q: &Point| Ok(TangentVec(&r * q)));
    let p = random_vector(8, &mut rng);
    for f in [constant, rotation] {
        let rep = killing_check(&m, &f, &p, S).unwrap();
        assert!(rep.lie_derivative < 1e-10 && rep.divergence < 1e-10);
    }
}

#[test]
fn killing_correspondence_needs_curvature() {
    let m = flat();
    let x = VecField::new(Provenance::closed_form("zero"), |q: &Point| Ok(TangentVec::zeros(q.len())));
    assert!(matches!(killing_to_ck(&m, &x, S), Err(QkError::ZeroScalarCurvature)));
}

#[test]
fn bracket_of_flat_family_members() {
    let m = flat();
    let mut rng = seeded(10);
    let p1 = flat_ck_family(&m, compatible(&m, &mut rng), random_tangent(8, &mut rng));
    let p2 = flat_ck_family(&m, compatible(&m, &mut rng), random_tangent(8, &mut rng));
    let p = random_vector(8, &mut rng);
    let inner = FdScheme::central4(1e-2);
    let outer = FdScheme::central4(2e-2);
    let same = ck_bracket(&m, &p1, &p1, inner, outer);
    assert!(same.field.eval(&p).unwrap().frobenius() < 1e-9);
    // constant codifferentials commute, so the bracket is co-closed
    let br = ck_bracket(&m, &p1, &p2, inner, outer);
    let d = codifferential(&m, &br.field, &p, FdScheme::central4(5e-2)).unwrap();
    assert!(d.0.amax() < 1e-8, "{}", d.0.amax());
}

#[test]
fn flat_holonomy_is_trivial() {
    let m = flat();
    let opts = HolonomyOptions { loops: 3, steps_per_segment: 20, ..Default::default() };
    let rep = holonomy_dimension(&m, &DVector::zeros(8), opts).unwrap();
    assert_eq!(rep.fixed_dim, 21);
    assert!(rep.gap_ratio > 1e3);
}

#[test]
fn provenance_round_trips_through_json() {
    let p = Provenance::Transported { waypoints: vec![vec![0.0; 8]], steps_per_segment: 4 };
    let s = serde_json::to_string(&p).unwrap();
    assert!(s.contains("\"kind\":\"transported\""));
    assert_eq!(serde_json::from_str::<Provenance>(&s).unwrap(), p);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transport_is_linear(seed in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let m = flat();
        let mut rng = seeded(seed);
        let s1 = ProlongSection { psi: compatible(&m, &mut rng), x: random_tangent(8, &mut rng) };
        let s2 = ProlongSection { psi: compatible(&m, &mut rng), x: random_tangent(8, &mut rng) };
        let path = PathSpec::new(vec![random_vector(8, &mut rng), random_vector(8, &mut rng), random_vector(8, &mut rng)], 4);
        let comb = ProlongSection { psi: &(&s1.psi * a) + &(&s2.psi * b), x: TangentVec(&s1.x.0 * a + &s2.x.0 * b) };
        let out = transport_many(&m, &path, vec![s1, s2, comb]).unwrap().sections;
        let lin = &(&out[0].psi * a) + &(&out[1].psi * b);
        prop_assert!((lin.matrix() - out[2].psi.matrix()).amax() < 1e-10);
        prop_assert!((&out[0].x.0 * a + &out[1].x.0 * b - &out[2].x.0).amax() < 1e-10);
    }

    #[test]
    fn codifferential_of_family_is_linear_in_x0(seed in 0u64..1000) {
        let m = flat();
        let mut rng = seeded(seed);
        let x0 = random_tangent(8, &mut rng);
        let fam = flat_ck_family(&m, TwoForm::zeros(8), x0.clone());
        let p = random_vector(8, &mut rng);
        let d = codifferential(&m, &fam, &p, S).unwrap();
        prop_assert!((&d.0 - &x0.0).amax() < 1e-10);
    }
}
