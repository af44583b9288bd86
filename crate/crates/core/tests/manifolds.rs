use nalgebra::DVector;
use qkck::fd::{richardson, FdScheme};
use qkck::manifolds::{ChartModel, GeometryScheme, ModelKind, HPN_VALIDATION_TOL};
use qkck::sampling::{random_point_in_ball, seeded};
use qkck::QkError;

#[test]
fn flat_geometry_is_trivial() {
    let m = ChartModel::flat(2).unwrap();
    let p = DVector::from_element(8, 3.0);
    assert_eq!(m.christoffels(&p).unwrap().max_abs(), 0.0);
    assert!(m.riemann(&p).unwrap().0.max_abs() < 1e-12);
    assert_eq!(m.nu(), 0.0);
    assert_eq!(m.kind(), ModelKind::Flat);
}

#[test]
fn hpn_metric_at_centre_is_euclidean() {
    let m = ChartModel::hpn(2).unwrap();
    let g = m.metric_at(&DVector::zeros(8)).unwrap();
    assert!((g.matrix() - nalgebra::DMatrix::<f64>::identity(8, 8)).amax() < 1e-15);
}

#[test]
fn hpn_reduced_scalar_curvature_is_four() {
    // sectional curvatures in [1, 4] give Ric = 4(n+2) g
    let m = ChartModel::hpn(2).unwrap();
    assert!((m.nu() - 4.0).abs() < 1e-4, "nu = {}", m.nu());
    let v = m.validate().unwrap();
    assert!(v.nu_spread < HPN_VALIDATION_TOL);
    assert!(v.weyl_residual < HPN_VALIDATION_TOL);
    assert!(v.min_gap_ratio > 1e3);
}

#[test]
fn christoffel_error_converges_at_second_order() {
    let m = ChartModel::hpn(2).unwrap();
    let mut rng = seeded(4);
    let p = random_point_in_ball(8, 0.4, &mut rng);
    let exact = m.christoffels_with(&p, FdScheme::central4(1e-3)).unwrap();
    let err = |h: f64| {
        let g = m.christoffels_with(&p, FdScheme::central2(h)).unwrap();
        g.data().iter().zip(exact.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let (ratio, order) = richardson([err(0.04), err(0.02), err(0.01)]);
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    assert!((order - 2.0).abs() < 0.2);
}

#[test]
fn levi_civita_is_metric_and_torsion_free() {
    let m = ChartModel::hpn(2).unwrap();
    let mut rng = seeded(5);
    for _ in 0..3 {
        let p = random_point_in_ball(8, 0.5, &mut rng);
        let r = m.metricity_residual(&p, FdScheme::central4(1e-3)).unwrap();
        assert!(r < 1e-7, "metricity {r}");
        assert!(m.christoffels(&p).unwrap().asymmetry() < 1e-12);
    }
}

#[test]
fn recovered_basis_varies_continuously() {
    let m = ChartModel::hpn(2).unwrap();
    let mut rng = seeded(6);
    let p = random_point_in_ball(8, 0.4, &mut rng);
    let q = &p + random_point_in_ball(8, 1e-3, &mut rng);
    let a = m.point_geometry(&p).unwrap();
    let b = m.point_geometry_aligned(&q, &a.basis).unwrap();
    // the overlap matrix of neighbouring bases is close to the identity
    let o = a.basis.overlap(&b.basis, &a.g);
    assert!((o - nalgebra::Matrix3::identity()).amax() < 1e-2);
    assert!(b.basis.residuals(&b.g).max() < 1e-5);
}

#[test]
fn cache_serves_repeated_points() {
    let m = ChartModel::hpn(2).unwrap();
    let p = DVector::from_element(8, 0.1);
    let a = m.point_geometry(&p).unwrap();
    let b = m.point_geometry(&p).unwrap();
    assert!(std::sync::Arc::ptr_eq(&a, &b));
    assert!(m.cache().stats().0 >= 1);
}

#[test]
fn points_outside_the_chart_are_rejected() {
    let m = ChartModel::hpn(2).unwrap();
    let p = DVector::from_element(8, 0.5);
    assert!(matches!(m.point_geometry(&p), Err(QkError::OutsideDomain { .. })));
}

#[test]
fn accurate_scheme_agrees_with_standard() {
    let a = ChartModel::hpn(2).unwrap();
    let b = ChartModel::hpn_with_scheme(2, GeometryScheme::ACCURATE).unwrap();
    assert!((a.nu() - b.nu()).abs() < 1e-5);
}
