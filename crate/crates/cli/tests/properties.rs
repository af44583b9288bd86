use proptest::prelude::*;
use qkck_cli::suites::rng_for;
use qkck_cli::{Check, Comparison, SuiteConfig};
use rand::Rng;

fn draws(cfg: &SuiteConfig, name: &str) -> Vec<u64> {
    let mut rng = rng_for(cfg, name);
    (0..4).map(|_| rng.gen()).collect()
}

proptest! {
    #[test]
    fn rng_streams_are_reproducible(seed in any::<u64>(), name in "[a-z_]{1,16}") {
        let cfg = SuiteConfig { seed, ..SuiteConfig::default() };
        prop_assert_eq!(draws(&cfg, &name), draws(&cfg, &name));
        let other = SuiteConfig { seed: seed.wrapping_add(1), ..SuiteConfig::default() };
        prop_assert_ne!(draws(&cfg, &name), draws(&other, &name));
    }

    #[test]
    fn loosening_tolerances_never_fails_a_passing_check(
        value in 0.0..1e-3f64,
        scale in 1e-3..1e3f64,
        factor in 1.0..1e3f64,
    ) {
        let tight = SuiteConfig { tol_scale: scale, ..SuiteConfig::default() };
        let loose = SuiteConfig { tol_scale: scale * factor, ..SuiteConfig::default() };
        let a = Check::measure("basis_relations", value, &tight);
        let b = Check::measure("basis_relations", value, &loose);
        prop_assert_eq!(a.comparison, Comparison::AtMost);
        prop_assert!(b.tolerance >= a.tolerance);
        prop_assert!(!a.pass || b.pass);
    }

    #[test]
    fn tol_scale_leaves_lower_bounds_alone(value in 0.0..1e6f64, scale in 1e-6..1e6f64) {
        let cfg = SuiteConfig { tol_scale: scale, ..SuiteConfig::default() };
        let c = Check::measure("holonomy_gap", value, &cfg);
        let base = Check::measure("holonomy_gap", value, &SuiteConfig::default());
        prop_assert_eq!(c.comparison, Comparison::AtLeast);
        prop_assert_eq!(c.tolerance, base.tolerance);
        prop_assert_eq!(c.pass, base.pass);
    }
}
