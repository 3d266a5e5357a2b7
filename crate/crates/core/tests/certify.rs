//! Cooperativity certificates, eventual mode and order preservation.

use slowcone::certify::{
    algebraic_certificate, dynamic_certificate, eventual_tstar, monotonicity_check, perturbation_size,
    pseudo_order_scan, sample_pairs, LambdaSpec, ALGEBRAIC_MARGIN, DYNAMIC_MARGIN,
};
use slowcone::cone::{QuadraticCone, DEFAULT_MARGIN};
use slowcone::dynsys::{get_builtin, BoundSystem, BoxDomain, SystemDef};
use slowcone::integrate::{flow, SolverOptions};
use slowcone::Error;

const T_GRID: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];

fn limit() -> (BoundSystem, QuadraticCone, BoxDomain) {
    let b = get_builtin("paper-3d-limit").unwrap();
    (b.system.bind_defaults().unwrap(), b.cone.unwrap(), b.domain.unwrap())
}

fn lambda(f: &BoundSystem) -> LambdaSpec {
    LambdaSpec::parse("3*(x^2+y^2+z^2)", f).unwrap()
}

/// The limit field plus a rotation mixing `x` and `z` that breaks the cone.
fn rotated_limit() -> BoundSystem {
    SystemDef::from_sources(
        "rotated",
        &["x", "y", "z"],
        &[],
        &[
            "x - y - 1.5*x*z^2 - 0.5*x*(x^2 + y^2) - 10*z",
            "x + y - 1.5*y*z^2 - 0.5*y*(x^2 + y^2)",
            "-z - 0.5*z^3 - 1.5*z*(x^2 + y^2) + 10*x",
        ],
    )
    .unwrap()
    .bind_defaults()
    .unwrap()
}

#[test]
fn algebraic_and_dynamic_certificates_agree() {
    let (f, cone, dom) = limit();
    let alg = algebraic_certificate(&f, &cone, &dom, 9, &lambda(&f), ALGEBRAIC_MARGIN).unwrap();
    let pairs = sample_pairs(&dom, 20, 7);
    let dynamic =
        dynamic_certificate(&f, &cone, &pairs, &T_GRID, 16, 7, &SolverOptions::default(), DYNAMIC_MARGIN).unwrap();
    assert!(alg.pass);
    assert!(dynamic.pass);
    assert_eq!(alg.checked, 9 * 9 * 9);
}

#[test]
fn rotation_breaks_both_certificates() {
    let f = rotated_limit();
    let (_, cone, dom) = limit();
    let auto = algebraic_certificate(&f, &cone, &dom, 5, &LambdaSpec::Auto, ALGEBRAIC_MARGIN).unwrap();
    assert!(!auto.pass);
    let pairs = sample_pairs(&dom, 10, 7);
    let dynamic =
        dynamic_certificate(&f, &cone, &pairs, &T_GRID, 8, 7, &SolverOptions::default(), DYNAMIC_MARGIN).unwrap();
    assert!(!dynamic.pass);
}

#[test]
fn auto_lambda_certifies_the_limit_system() {
    let (f, cone, dom) = limit();
    let r = algebraic_certificate(&f, &cone, &dom, 7, &LambdaSpec::Auto, ALGEBRAIC_MARGIN).unwrap();
    assert!(r.pass, "worst {:?}", r.worst);
    assert!(r.worst.unwrap().margin <= -1.9);
}

#[test]
fn constant_lambda_fails_away_from_the_origin() {
    let (f, cone, dom) = limit();
    let r = algebraic_certificate(&f, &cone, &dom, 5, &LambdaSpec::constant(0.0), ALGEBRAIC_MARGIN).unwrap();
    assert!(!r.pass);
    assert!(r.failures > 0 && r.failures < r.checked);
}

#[test]
fn dynamic_margin_compounds_over_time() {
    let (f, cone, dom) = limit();
    let pairs = sample_pairs(&dom, 20, 21);
    let r = dynamic_certificate(&f, &cone, &pairs, &T_GRID, 16, 21, &SolverOptions::default(), DYNAMIC_MARGIN)
        .unwrap();
    let first = r.by_time.first().unwrap();
    let last = r.by_time.last().unwrap();
    assert_eq!((first.0, last.0), (0.1, 5.0));
    assert!(last.1 < first.1, "{:?}", r.by_time);
}

#[test]
fn eventual_mode_on_the_unperturbed_field_starts_immediately() {
    let (f, cone, dom) = limit();
    let pairs = sample_pairs(&dom, 10, 5);
    let r = eventual_tstar(&f, &cone, &pairs, &T_GRID, 8, 5, &SolverOptions::default(), DYNAMIC_MARGIN).unwrap();
    assert!(r.pass);
    assert_eq!(r.t_star, Some(0.1));
}

#[test]
fn eventual_mode_on_the_slow_manifold_field() {
    let sf = get_builtin("paper-4d").unwrap().slow_fast.unwrap();
    let g = sf.slow_manifold_field();
    let (f, cone, dom) = limit();
    let pairs = sample_pairs(&dom, 10, 5);
    let r = eventual_tstar(&g, &cone, &pairs, &T_GRID, 8, 5, &SolverOptions::default(), DYNAMIC_MARGIN).unwrap();
    assert!(r.t_star.is_some(), "{:?}", r.by_time);
    let size = perturbation_size(&f, &g, &dom, 50, 5).unwrap();
    assert!(size > 0.0 && size.is_finite());
}

#[test]
fn eventual_mode_fails_under_a_strong_rotation() {
    let (f, cone, dom) = limit();
    let g = rotated_limit();
    let pairs = sample_pairs(&dom, 10, 5);
    let r = eventual_tstar(&g, &cone, &pairs, &T_GRID, 8, 5, &SolverOptions::default(), DYNAMIC_MARGIN).unwrap();
    assert!(!r.pass);
    assert_eq!(r.t_star, None);
    assert!(perturbation_size(&f, &g, &dom, 50, 5).unwrap() >= 10.0);
}

#[test]
fn ordered_example_pair_stays_ordered() {
    let (f, cone, _) = limit();
    let p = vec![1.0, 0.0, 0.0];
    let q = vec![1.1, 0.05, 0.0];
    let r = monotonicity_check(&f, &cone, &[(p, q)], &[0.5, 1.0, 2.0], None, &SolverOptions::default()).unwrap();
    assert!(r.pass);
    assert_eq!(r.checks, 3);
    assert!(r.violations.is_empty());
}

#[test]
fn unordered_pair_is_a_precondition_error() {
    let (f, cone, _) = limit();
    let err = monotonicity_check(
        &f,
        &cone,
        &[(vec![0.0; 3], vec![0.0, 0.0, 1.0])],
        &[1.0],
        None,
        &SolverOptions::default(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::Precondition(_)));
}

#[test]
fn limit_trajectory_has_an_ordered_pair_of_times() {
    let (f, cone, _) = limit();
    let tr = flow(&f, &[2.0, 2.0, 3.0], 20.0, &SolverOptions::default()).unwrap();
    let (t1, t2) = pseudo_order_scan(&tr, &cone, 1).expect("an ordered pair of times");
    assert!(t1 < t2);
    let d: Vec<f64> = tr.at(t2).iter().zip(tr.at(t1)).map(|(b, a)| b - a).collect();
    assert!(cone.contains(&d, DEFAULT_MARGIN).unwrap().in_cone());
}
