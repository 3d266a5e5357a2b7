//! Equilibria, closed orbits and the genericity sweep.

use std::f64::consts::PI;

use slowcone::dynsys::{get_builtin, BoundSystem, BoxDomain, SystemDef, VectorField};
use slowcone::integrate::flow;
use slowcone::limitsets::{
    classify_omega, find_equilibria, genericity_sweep, refine_periodic_orbit, ClassifyOptions, OmegaClassification,
    RefineOptions, EQUILIBRIUM_RESIDUAL,
};
use slowcone::linalg;

fn limit() -> BoundSystem {
    get_builtin("paper-3d-limit").unwrap().system.bind_defaults().unwrap()
}

fn limit_options() -> ClassifyOptions {
    let mut o = ClassifyOptions::default();
    o.equilibria = vec![vec![0.0; 3]];
    o
}

fn assert_closed_orbit_invariants(c: &OmegaClassification, opts: &ClassifyOptions) -> Vec<f64> {
    let OmegaClassification::ClosedOrbit { orbit, raw_period, equilibrium_distance } = c else {
        panic!("expected a closed orbit, got {c:?}");
    };
    assert!(orbit.residual <= 1e-9, "residual {}", orbit.residual);
    assert_eq!(orbit.unit_multipliers, 1);
    assert!(orbit.hyperbolic);
    assert!((orbit.period - raw_period).abs() <= 0.02 * raw_period);
    if let Some(d) = equilibrium_distance {
        assert!(*d > opts.separation_tol);
    }
    orbit.anchor.clone()
}

#[test]
fn limit_orbits_from_several_starts_are_the_same_cycle() {
    let f = limit();
    let opts = limit_options();
    for ic in [[2.0, 2.0, 3.0], [-1.0, 0.3, -2.0], [0.1, 0.0, 0.5], [3.0, -3.0, 1.0]] {
        let c = classify_omega(&f, &ic, &opts);
        let anchor = assert_closed_orbit_invariants(&c, &opts);
        let r2 = anchor[0] * anchor[0] + anchor[1] * anchor[1];
        assert!((r2 - 2.0).abs() <= 1e-4 && anchor[2].abs() <= 1e-4, "{anchor:?}");
    }
}

#[test]
fn four_dimensional_orbit_satisfies_the_orbit_invariants() {
    let sf = get_builtin("paper-4d").unwrap().slow_fast.unwrap();
    let f = sf.full_field().unwrap();
    let mut opts = ClassifyOptions::for_slow_fast(&sf);
    opts.equilibria = vec![vec![0.0; 4]];
    let c = classify_omega(&f, &[2.0, 2.0, 3.0, 12.0], &opts);
    let anchor = assert_closed_orbit_invariants(&c, &opts);
    let w_on_manifold = anchor[0] + anchor[1] + anchor[2];
    assert!((anchor[3] - w_on_manifold).abs() < 0.2);
}

#[test]
fn refinement_from_a_perturbed_guess_lands_on_the_circle() {
    let f = limit();
    let guess = [1.5, 0.05, 0.02];
    let o = refine_periodic_orbit(&f, &guess, 6.0, &RefineOptions::default()).unwrap();
    assert!((o.period - 2.0 * PI).abs() < 1e-7);
    assert!(o.residual <= 1e-9);
    let back = flow(&f, &o.anchor, o.period, &RefineOptions::default().solver).unwrap();
    assert!(linalg::distance(back.final_state(), &o.anchor) <= 1e-8);
    let mu2 = o.floquet[1].re;
    assert!(((mu2 - (-4.0 * PI).exp()) / (-4.0 * PI).exp()).abs() < 1e-4);
}

#[test]
fn equilibria_reverify_under_fresh_evaluation() {
    let f = SystemDef::from_sources("pair", &["x", "y"], &[], &["x - x^3", "-y"])
        .unwrap()
        .bind_defaults()
        .unwrap();
    let eqs = find_equilibria(&f, &BoxDomain::symmetric(&[2.0, 2.0]), 7).unwrap();
    assert_eq!(eqs.len(), 3);
    for e in &eqs {
        let r = linalg::norm(&f.eval_vec(&e.point).unwrap());
        assert!(r <= EQUILIBRIUM_RESIDUAL);
    }
    let stable: Vec<bool> = eqs.iter().map(|e| e.is_stable()).collect();
    assert_eq!(stable.iter().filter(|s| **s).count(), 2);
}

#[test]
fn axis_start_tends_to_the_origin() {
    let f = limit();
    match classify_omega(&f, &[0.0, 0.0, 1.0], &limit_options()) {
        OmegaClassification::Equilibrium(e) => {
            assert!(linalg::norm(&e.point) < 1e-9);
            assert!(linalg::norm(&f.eval_vec(&e.point).unwrap()) <= EQUILIBRIUM_RESIDUAL);
        }
        other => panic!("expected the origin, got {other:?}"),
    }
}

#[test]
fn sweep_is_reproducible_and_mostly_closed_orbits() {
    let f = limit();
    let dom = BoxDomain::symmetric(&[4.0, 4.0, 4.0]);
    let opts = limit_options();
    let a = genericity_sweep(&f, &dom, 20, 42, &[vec![0.0, 0.0, 1.0]], &opts).unwrap();
    let b = genericity_sweep(&f, &dom, 20, 42, &[vec![0.0, 0.0, 1.0]], &opts).unwrap();
    assert_eq!(a.n, 20);
    assert_eq!(a.entries[0].initial, vec![0.0, 0.0, 1.0]);
    assert_eq!(a.counts.closed_orbit, b.counts.closed_orbit);
    assert_eq!(a.counts.equilibrium, 1);
    assert!(a.counts.closed_orbit >= 18);
    let kinds = |r: &slowcone::limitsets::SweepReport| -> Vec<&'static str> {
        r.entries.iter().map(|e| e.outcome.kind()).collect()
    };
    assert_eq!(kinds(&a), kinds(&b));
    for u in &a.unresolved {
        assert!(matches!(u.outcome, OmegaClassification::Unresolved { diagnostics: Some(_), .. }));
    }
}
