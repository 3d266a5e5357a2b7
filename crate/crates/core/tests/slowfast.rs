//! Slow manifold, fast contraction and Tikhonov closeness.

use slowcone::dynsys::{get_builtin, BoxDomain, SystemDef, VectorField};
use slowcone::integrate::SolverOptions;
use slowcone::slowfast::{ManifoldOrder, SlowFastSystem};
use slowcone::Error;

fn four_d(eps: f64) -> SlowFastSystem {
    get_builtin("paper-4d").unwrap().slow_fast.unwrap().with_eps(eps).unwrap()
}

fn slow_box() -> BoxDomain {
    BoxDomain::symmetric(&[4.0, 4.0, 4.0])
}

/// `f₁ + f₂ + f₃` of the four-dimensional system at `(x, y, z, w)`.
fn slow_sum(p: &[f64], w: f64, eps: f64) -> f64 {
    let (x, y, z) = (p[0], p[1], p[2]);
    let r2 = x * x + y * y;
    let f1 = x - y - 1.5 * x * z * z - 0.5 * x * r2 + eps * x * w;
    let f2 = x + y - 1.5 * y * z * z - 0.5 * y * r2 + eps * y * w;
    let f3 = -z - 0.5 * z * z * z - 1.5 * z * r2 + eps * z * w;
    f1 + f2 + f3
}

#[test]
fn fast_stability_holds_on_the_slow_box() {
    let r = four_d(0.05).certify_fast_stability(&slow_box(), 9).unwrap();
    assert!(r.pass);
    assert_eq!(r.points, 9 * 9 * 9);
    assert_eq!(r.max_spectral_abscissa, -1.0);
    assert!((r.mu - 0.9).abs() < 1e-12);
}

#[test]
fn first_order_manifold_at_zero_eps_is_the_critical_manifold() {
    let sf = four_d(0.0);
    for x in slow_box().grid(5) {
        assert_eq!(sf.first_order_manifold(&x).unwrap(), sf.h0(&x, None).unwrap());
    }
}

#[test]
fn first_order_correction_is_minus_the_slow_sum() {
    let sf = four_d(0.05);
    for x in slow_box().grid(4) {
        let h0 = sf.h0(&x, None).unwrap();
        assert_eq!(h0, vec![x[0] + x[1] + x[2]]);
        let h1 = sf.h1(&x, &h0).unwrap();
        let want = -slow_sum(&x, h0[0], 0.0);
        assert!((h1[0] - want).abs() <= 1e-12 * (1.0 + want.abs()));
    }
}

#[test]
fn order_zero_defect_is_the_scaled_slow_sum() {
    let eps = 0.05;
    let sf = four_d(eps);
    let x = [1.0, 1.0, 0.0];
    let d = sf.invariance_defect(&sf.manifold(ManifoldOrder::Zero), &x).unwrap();
    let want = eps * slow_sum(&x, 2.0, eps).abs();
    assert!(d > 0.0);
    assert!((d - want).abs() <= 1e-12);
}

#[test]
fn order_one_defect_scales_quadratically() {
    let x = [1.0, 1.0, 0.0];
    let at = |eps: f64| {
        let sf = four_d(eps);
        sf.invariance_defect(&sf.manifold(ManifoldOrder::One), &x).unwrap()
    };
    let ratio = at(0.05) / at(0.025);
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

fn mean_square_defects(half_width: f64, eps: f64) -> (f64, f64) {
    let grid = BoxDomain::symmetric(&[half_width; 3]).grid(7);
    let sf = four_d(eps);
    let (m0, m1) = (sf.manifold(ManifoldOrder::Zero), sf.manifold(ManifoldOrder::One));
    let (mut s0, mut s1) = (0.0, 0.0);
    for x in &grid {
        s0 += sf.invariance_defect(&m0, x).unwrap().powi(2);
        s1 += sf.invariance_defect(&m1, x).unwrap().powi(2);
    }
    (s0, s1)
}

#[test]
fn order_one_defect_is_smaller_in_mean_square_near_the_attractor() {
    for eps in [0.05, 0.025, 0.01] {
        let (s0, s1) = mean_square_defects(1.5, eps);
        assert!(s1 < s0, "ε {eps}: {s1} vs {s0}");
    }
}

/// At the corners of [-2,2]³ the slow field is steep enough that the
/// second-order remainder dominates at ε = 0.05.
#[test]
fn order_one_defect_loses_far_from_the_attractor_at_large_eps() {
    let (s0, s1) = mean_square_defects(2.0, 0.05);
    assert!(s1 > s0);
    let (s0, s1) = mean_square_defects(2.0, 0.0125);
    assert!(s1 < s0);
}

/// Where `f₁ + f₂ + f₃` vanishes at `ε = 0` the order-zero defect is
/// already `O(ε²)`, so the first-order correction need not win pointwise.
#[test]
fn order_zero_can_win_where_the_slow_sum_vanishes() {
    let x = [1.0, 1.0, 0.0];
    assert_eq!(slow_sum(&x, 2.0, 0.0), 0.0);
    let sf = four_d(0.05);
    let d0 = sf.invariance_defect(&sf.manifold(ManifoldOrder::Zero), &x).unwrap();
    let d1 = sf.invariance_defect(&sf.manifold(ManifoldOrder::One), &x).unwrap();
    assert!(d1 > d0, "{d1} vs {d0}");
}

#[test]
fn exact_invariant_graph_has_no_defect() {
    let raw = SystemDef::from_sources("graph", &["x", "y"], &[("eps", Some(0.1))], &["0", "-(y - x^2)"]).unwrap();
    let sf = SlowFastSystem::new(raw, 1, "eps").unwrap();
    for x in [-2.0, -0.5, 0.0, 1.5] {
        let d = sf.invariance_defect(&sf.manifold(ManifoldOrder::Zero), &[x]).unwrap();
        assert!(d <= 1e-10);
    }
}

#[test]
fn frozen_fast_subsystem_is_globally_attracting() {
    let sf = four_d(0.05);
    for x in [[1.0, 1.0, 0.0], [-3.0, 2.0, 4.0], [0.0, 0.0, 0.0]] {
        let r = sf.frozen_fast_convergence(&x, 50, 16.0, 40.0, 9).unwrap();
        assert!(r.converged, "{r:?}");
        assert_eq!(r.h0, vec![x[0] + x[1] + x[2]]);
    }
}

#[test]
fn contraction_beats_the_quarter_rate_bound() {
    let sf = four_d(0.05);
    let mu = sf.certify_fast_stability(&slow_box(), 5).unwrap().mu;
    for ic in [[2.0, 2.0, 3.0, 12.0], [1.0, 1.0, 0.1, 4.0], [0.5, 0.5, 0.5, 5.0]] {
        let fit = sf.fast_contraction_rate(&ic, 10.0, &SolverOptions::default()).unwrap();
        assert!(fit.rate <= -mu / 4.0, "{ic:?}: {fit:?}");
    }
}

/// Near the cycle the slow drift is mild and the fitted rate reflects the
/// fast eigenvalue −1. From (2,2,3,12) the slow state moves at speed ~50,
/// the first-order manifold lags and the fit is only about −0.7.
#[test]
fn contraction_reflects_the_fast_eigenvalue_where_the_slow_drift_is_mild() {
    let sf = four_d(0.05);
    for ic in [[1.0, 1.0, 0.1, 4.0], [1.0, 1.0, 0.0, 7.0], [0.5, 0.5, 0.5, 5.0]] {
        let fit = sf.fast_contraction_rate(&ic, 10.0, &SolverOptions::default()).unwrap();
        assert!(fit.rate <= -0.9, "{ic:?}: {fit:?}");
    }
    let far = sf
        .fast_contraction_rate(&[2.0, 2.0, 3.0, 12.0], 10.0, &SolverOptions::default())
        .unwrap();
    assert!(far.rate < -0.5 && far.rate > -0.9, "{far:?}");
}

#[test]
fn start_on_the_manifold_is_rejected() {
    let sf = four_d(0.05);
    let x = [1.0, 0.5, 0.2];
    let h = sf.first_order_manifold(&x).unwrap();
    let err = sf
        .fast_contraction_rate(&[x[0], x[1], x[2], h[0]], 5.0, &SolverOptions::default())
        .unwrap_err();
    assert!(matches!(err, Error::AlreadyOnManifold { .. }));
}

#[test]
fn tikhonov_error_is_linear_in_eps() {
    let sf = four_d(0.05);
    let out = sf
        .tikhonov_closeness(&[2.0, 2.0, 3.0, 12.0], 10.0, &[0.04, 0.02, 0.01], 0.9, &SolverOptions::default())
        .unwrap();
    for pair in out.windows(2) {
        let ratio = pair[0].sup_error / pair[1].sup_error;
        assert!((1.5..=3.0).contains(&ratio), "{out:?}");
    }
    assert!((out[0].t_bl - 5.0 * 0.04 / 0.9).abs() < 1e-15);
}

#[test]
fn reduced_field_vanishes_at_the_origin() {
    let red = four_d(0.05).reduced_system().unwrap();
    assert_eq!(red.eval_vec(&[0.0; 3]).unwrap(), vec![0.0; 3]);
}
