use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dynsys::VectorField;
use crate::error::{Error, Result};
use crate::integrate::{flow, variational_flow, SolverOptions};
use crate::linalg::{self, Eigenvalue};

/// Bisection stops once the crossing time is bracketed to this width.
pub const SECTION_TIME_TOL: f64 = 1e-10;
/// Crossings with `|⟨F, d⟩| / (‖F‖‖d‖)` below this are tangential.
pub const TANGENCY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct PeriodicOrbit {
    /// Point of the orbit on the section through the initial guess.
    pub anchor: Vec<f64>,
    pub period: f64,
    /// Uniform samples over one period, starting at the anchor.
    pub samples: Vec<Vec<f64>>,
    /// Monodromy eigenvalues, sorted by decreasing modulus.
    pub floquet: Vec<Eigenvalue>,
    /// `‖φ_T(x*) − x*‖`.
    pub residual: f64,
    /// Multipliers within the Floquet tolerance of 1.
    pub unit_multipliers: usize,
    /// Exactly one multiplier on the unit circle (within tolerance).
    pub hyperbolic: bool,
    pub newton_iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RefineOptions {
    pub orbit_tol: f64,
    pub floquet_tol: f64,
    pub max_iter: usize,
    pub samples: usize,
    pub solver: SolverOptions,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            orbit_tol: 1e-9,
            floquet_tol: 1e-4,
            max_iter: 25,
            samples: 256,
            solver: SolverOptions::with_tolerances(1e-12, 1e-14),
        }
    }
}

/// Next crossing of `{x : ⟨x − anchor, d⟩ = 0}` in the direction of the
/// flow at `anchor`, starting from `start`. Returns the point and time.
pub fn poincare_return<F: VectorField + ?Sized>(
    field: &F,
    anchor: &[f64],
    direction: Option<&[f64]>,
    start: &[f64],
    t_max: f64,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, f64)> {
    section_crossing(field, anchor, direction, start, 0.0, t_max, opts)
}

/// As [`poincare_return`], ignoring crossings before `t_min`.
fn section_crossing<F: VectorField + ?Sized>(
    field: &F,
    anchor: &[f64],
    direction: Option<&[f64]>,
    start: &[f64],
    t_min: f64,
    t_max: f64,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, f64)> {
    let n = field.dim();
    if anchor.len() != n || start.len() != n {
        return Err(Error::Invalid(format!("section points need {n} entries")));
    }
    let fa = field.eval_vec(anchor)?;
    let d = direction.map(<[f64]>::to_vec).unwrap_or_else(|| fa.clone());
    if d.len() != n {
        return Err(Error::Invalid(format!("section normal needs {n} entries")));
    }
    let transversality = dot(&fa, &d);
    if !(transversality.abs() > TANGENCY_TOL * linalg::norm(&fa) * linalg::norm(&d)) {
        return Err(Error::Precondition(
            "section is not transversal to the flow at the anchor".into(),
        ));
    }
    let sigma = transversality.signum();
    let s = |x: &[f64]| sigma * x.iter().zip(anchor).zip(&d).map(|((a, b), c)| (a - b) * c).sum::<f64>();
    let traj = flow(field, start, t_max, opts)?;
    let times = traj.times();
    let mut buf = vec![0.0; n];
    for i in 0..times.len() - 1 {
        let (s0, s1) = (s(traj.state(i)), s(traj.state(i + 1)));
        if times[i + 1] < t_min || !(s0 < 0.0 && s1 >= 0.0) {
            continue;
        }
        let (mut a, mut b) = (times[i], times[i + 1]);
        while b - a > SECTION_TIME_TOL {
            let m = 0.5 * (a + b);
            traj.interpolate_step(i, m, &mut buf);
            if s(&buf) < 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        let t = 0.5 * (a + b);
        if t < t_min {
            continue;
        }
        traj.interpolate_step(i, t, &mut buf);
        let fx = field.eval_vec(&buf)?;
        let rate = sigma * dot(&fx, &d);
        if !(rate > TANGENCY_TOL * linalg::norm(&fx).max(1.0) * linalg::norm(&d)) {
            return Err(Error::TangentialCrossing { t, rate });
        }
        return Ok((buf, t));
    }
    Err(Error::NoCrossing { t_max })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fixed point of the return map to the section through `x_guess` with
/// normal `F(x_guess)`. Each step solves `(DP − I)·δ = −(P(x) − x)` on the
/// section, where `DP = (I − F(P(x))·nᵀ / ⟨n, F(P(x))⟩)·Dφ_T(x)`, in the
/// least-squares sense so that neutral directions do not stall it.
pub fn refine_periodic_orbit<F: VectorField + ?Sized>(
    field: &F,
    x_guess: &[f64],
    t_guess: f64,
    opts: &RefineOptions,
) -> Result<PeriodicOrbit> {
    let n = field.dim();
    if x_guess.len() != n {
        return Err(Error::Invalid(format!("orbit guess needs {n} entries")));
    }
    if !(t_guess > 0.0) {
        return Err(Error::Invalid("period guess must be positive".into()));
    }
    let normal = field.eval_vec(x_guess)?;
    let fnorm = linalg::norm(&normal);
    if !(fnorm > 1e-10) {
        return Err(Error::Precondition(
            "section degenerates: the guess is (nearly) an equilibrium".into(),
        ));
    }
    let normal: Vec<f64> = normal.iter().map(|v| v / fnorm).collect();
    let mut x = x_guess.to_vec();
    let mut t_est = t_guess;
    let scale = 1.0 + linalg::norm(x_guess);
    for iter in 0..=opts.max_iter {
        // iterates sit on the section, so a crossing right at the start is spurious
        let (xr, t) = section_crossing(field, x_guess, Some(&normal), &x, 0.5 * t_est, 2.0 * t_est, &opts.solver)?;
        let resid: Vec<f64> = xr.iter().zip(&x).map(|(a, b)| a - b).collect();
        let r = linalg::norm(&resid);
        t_est = t;
        if r <= opts.orbit_tol {
            let vf = variational_flow(field, &x, t, &opts.solver)?;
            let closure = linalg::distance(&vf.p_end(), &x);
            return finish(field, x, t, vf.u_end(), closure, iter, opts);
        }
        if iter == opts.max_iter || r > 10.0 * scale {
            break;
        }
        let m = variational_flow(field, &x, t, &opts.solver)?.u_end();
        let fr = field.eval_vec(&xr)?;
        let nf = dot(&normal, &fr);
        let mut a = DMatrix::zeros(n + 1, n);
        let mut rhs = DVector::zeros(n + 1);
        for i in 0..n {
            for j in 0..n {
                let proj_m: f64 = (0..n)
                    .map(|k| {
                        let pik = if i == k { 1.0 } else { 0.0 } - fr[i] * normal[k] / nf;
                        pik * m[(k, j)]
                    })
                    .sum();
                a[(i, j)] = proj_m - if i == j { 1.0 } else { 0.0 };
            }
            a[(n, i)] = normal[i];
            rhs[i] = -resid[i];
        }
        let step = a
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::Singular(format!("return-map Newton system: {e}")))?;
        for i in 0..n {
            x[i] += step[i];
        }
    }
    Err(Error::NoConvergence(format!(
        "periodic orbit refinement from T = {t_guess} did not reach {:e}",
        opts.orbit_tol
    )))
}

fn finish<F: VectorField + ?Sized>(
    field: &F,
    anchor: Vec<f64>,
    period: f64,
    monodromy: DMatrix<f64>,
    residual: f64,
    iterations: usize,
    opts: &RefineOptions,
) -> Result<PeriodicOrbit> {
    let mut floquet = linalg::eigenvalues(&monodromy);
    floquet.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    let unit_multipliers = floquet
        .iter()
        .filter(|e| (e.re - 1.0).hypot(e.im) <= opts.floquet_tol)
        .count();
    let on_circle = floquet
        .iter()
        .filter(|e| (e.norm() - 1.0).abs() <= opts.floquet_tol)
        .count();
    let traj = flow(field, &anchor, period, &opts.solver)?;
    let k = opts.samples.max(2);
    let samples = (0..k)
        .map(|i| traj.at(period * i as f64 / k as f64))
        .collect();
    Ok(PeriodicOrbit {
        anchor,
        period,
        samples,
        floquet,
        residual,
        unit_multipliers,
        hyperbolic: unit_multipliers == 1 && on_circle == 1,
        newton_iterations: iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{get_builtin, SystemDef};
    use std::f64::consts::PI;

    fn tight() -> SolverOptions {
        SolverOptions::with_tolerances(1e-12, 1e-14)
    }

    #[test]
    fn circle_return_time() {
        let f = get_builtin("circle").unwrap().system.bind_defaults().unwrap();
        let (x, t) = poincare_return(&f, &[1.0, 0.0], Some(&[0.0, 1.0]), &[1.0, 0.0], 10.0, &tight()).unwrap();
        assert!((t - 2.0 * PI).abs() < 1e-9, "{t}");
        assert!((x[0] - 1.0).abs() < 1e-9 && x[1].abs() < 1e-9);
    }

    #[test]
    fn decay_never_returns() {
        let f = SystemDef::from_sources("d", &["x", "y"], &[], &["-x", "-y"])
            .unwrap()
            .bind_defaults()
            .unwrap();
        let r = poincare_return(&f, &[1.0, 0.0], Some(&[1.0, 0.0]), &[1.0, 0.0], 20.0, &tight());
        assert!(matches!(r, Err(Error::NoCrossing { .. })));
    }

    #[test]
    fn tangent_section_rejected() {
        let f = get_builtin("circle").unwrap().system.bind_defaults().unwrap();
        let r = poincare_return(&f, &[1.0, 0.0], Some(&[1.0, 0.0]), &[1.0, 0.0], 10.0, &tight());
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn circle_orbit_is_neutral() {
        let f = get_builtin("circle").unwrap().system.bind_defaults().unwrap();
        let o = refine_periodic_orbit(&f, &[1.0, 0.0], 6.2, &RefineOptions::default()).unwrap();
        assert!((o.period - 2.0 * PI).abs() < 1e-8);
        assert_eq!(o.unit_multipliers, 2);
        assert!(!o.hyperbolic);
    }

    #[test]
    fn limit_cycle_refines() {
        let f = get_builtin("paper-3d-limit").unwrap().system.bind_defaults().unwrap();
        let o = refine_periodic_orbit(&f, &[1.3, 0.3, 0.05], 6.0, &RefineOptions::default()).unwrap();
        assert!((o.period - 2.0 * PI).abs() < 1e-6);
        let r2 = o.anchor[0].powi(2) + o.anchor[1].powi(2);
        assert!((r2 - 2.0).abs() < 1e-6 && o.anchor[2].abs() < 1e-6);
        assert!(o.hyperbolic);
        assert!((o.floquet[1].norm() / (-4.0 * PI).exp() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn far_guess_fails() {
        let f = get_builtin("paper-3d-limit").unwrap().system.bind_defaults().unwrap();
        let r = refine_periodic_orbit(&f, &[3.5, -3.0, 2.0], 0.7, &RefineOptions::default());
        assert!(r.is_err());
    }
}
