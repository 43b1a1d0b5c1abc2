use unicomp::harness::{generate, Family, GeneratorSpec};
use unicomp::shtarkov::comp_max;
use unicomp::{ComputeConfig, EntropifiedModel};
use unicomp_web::{nml_view, rate_report, theorem1_rows};

#[test]
fn nml_probabilities_sum_to_one_and_regret_is_flat() {
    let v = nml_view(3, 4, 3, 0.5, 11).unwrap();
    assert_eq!(v.rows.len(), 27);
    let total: f64 = v.rows.iter().map(|r| r.nml).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(v.spread < 1e-9);
    for r in &v.rows {
        assert!((r.regret - v.log_shtarkov).abs() < 1e-9);
    }
    assert!((v.log_shtarkov - v.eta * v.comp).abs() < 1e-12);
}

#[test]
fn nml_view_matches_library_on_same_seed() {
    let v = nml_view(2, 3, 4, 1.0, 5).unwrap();
    let p = generate(&GeneratorSpec::new(Family::RandomFinite { outcomes: 2, predictors: 3 }, 5).with_n(4)).unwrap().problem;
    let m = EntropifiedModel::new(&p);
    let comp = comp_max(&m, &ComputeConfig::default()).unwrap().report.comp;
    assert_eq!(v.comp, comp);
    assert_eq!(v.losses, p.class().losses());
}

#[test]
fn theorem1_moments_are_one() {
    let rows = theorem1_rows(3, 3, 2, 0.25, 2).unwrap();
    assert_eq!(rows.len(), 12);
    for r in rows {
        assert!(r.pass && r.deviation.abs() < 1e-9, "{r:?}");
    }
}

#[test]
fn demo_limits_reject_large_inputs() {
    assert!(nml_view(5, 2, 2, 1.0, 0).is_err());
    assert!(theorem1_rows(2, 2, 7, 1.0, 0).is_err());
}

#[test]
fn rate_curve_is_seeded_and_decreasing() {
    let a = rate_report(128, 0.9, 300, 4).unwrap();
    let b = rate_report(128, 0.9, 300, 4).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), 7);
    assert!(a.rows.first().unwrap().mean_excess_risk > a.rows.last().unwrap().mean_excess_risk);
}
