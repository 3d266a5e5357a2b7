//! Sampled certificates of C-cooperativity.
//!
//! The algebraic check asks `P·DF(ξ) + DF(ξ)ᵀ·P + λ(ξ)·P` to be negative
//! definite on a grid. The dynamic check maps cone directions through the
//! chord fundamental matrix `U^pq(t)` and requires them to land strictly
//! inside the cone. Both are finite samples of statements quantified over
//! all points and all `t > 0`; a pass is evidence, not a proof.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cone::{Position, QuadraticCone, Stratum, DEFAULT_MARGIN};
use crate::dynsys::{parse_expr, BoundSystem, BoxDomain, Expr, VectorField};
use crate::error::{Error, Result};
use crate::integrate::{flow, fundamental_matrix, SolverOptions, Trajectory};
use crate::linalg;

/// Default margin for the algebraic certificate (absolute eigenvalue).
pub const ALGEBRAIC_MARGIN: f64 = 1e-8;
/// Default margin for the dynamic certificate (relative form value).
pub const DYNAMIC_MARGIN: f64 = 1e-6;

const AUTO_SCAN: usize = 64;
const AUTO_HALF_WIDTH: f64 = 10.0;

/// How `λ(ξ)` is chosen.
#[derive(Clone, Debug)]
pub enum LambdaSpec {
    /// An expression in the system's states and parameters.
    Expr {
        source: String,
        expr: Expr,
        params: Vec<f64>,
    },
    /// Per-point search for the λ minimising the largest eigenvalue.
    Auto,
}

impl LambdaSpec {
    /// `"auto"` or an expression over the states of `sys`.
    pub fn parse(src: &str, sys: &BoundSystem) -> Result<Self> {
        if src.trim() == "auto" {
            return Ok(LambdaSpec::Auto);
        }
        let expr = parse_expr(src, &sys.def.scope())?;
        Ok(LambdaSpec::Expr {
            source: src.trim().to_string(),
            expr,
            params: sys.params.clone(),
        })
    }

    /// A constant λ.
    pub fn constant(v: f64) -> Self {
        LambdaSpec::Expr {
            source: format!("{v:?}"),
            expr: Expr::Num(v),
            params: Vec::new(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            LambdaSpec::Expr { source, .. } => source.clone(),
            LambdaSpec::Auto => "auto".to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Mode {
    Algebraic,
    Dynamic,
    Eventual,
}

/// One checked item: a grid point (algebraic) or a pair at a time (dynamic).
#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub point: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partner: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Largest eigenvalue (algebraic) or worst `q(Uv)/‖Uv‖²` (dynamic).
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CooperativityReport {
    pub mode: Mode,
    pub description: String,
    pub lambda: String,
    pub required_margin: f64,
    pub checked: usize,
    pub worst: Option<Witness>,
    pub failures: usize,
    pub pass: bool,
    /// Worst margin over all pairs at each grid time (dynamic modes).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub by_time: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_star: Option<f64>,
    /// Sampled `sup ‖F − G‖ + ‖DF − DG‖` against a reference field.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation_size: Option<f64>,
    /// Every checked item; reports serialize only the worst few.
    #[serde(rename = "worst_witnesses", serialize_with = "serialize_worst")]
    pub witnesses: Vec<Witness>,
}

/// Witnesses kept in a serialized report.
pub const REPORTED_WITNESSES: usize = 10;

fn serialize_worst<S: serde::Serializer>(w: &[Witness], s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut sorted: Vec<&Witness> = w.iter().collect();
    sorted.sort_by(|a, b| b.margin.total_cmp(&a.margin));
    sorted.truncate(REPORTED_WITNESSES);
    serde::Serialize::serialize(&sorted, s)
}

impl CooperativityReport {
    fn from_witnesses(
        mode: Mode,
        description: String,
        lambda: String,
        required_margin: f64,
        witnesses: Vec<Witness>,
    ) -> Self {
        let failures = witnesses
            .iter()
            .filter(|w| !(w.margin < -required_margin))
            .count();
        let worst = witnesses
            .iter()
            .max_by(|a, b| a.margin.total_cmp(&b.margin))
            .cloned();
        let mut by_time: Vec<(f64, f64)> = Vec::new();
        for w in &witnesses {
            if let Some(t) = w.t {
                match by_time.iter_mut().find(|(s, _)| *s == t) {
                    Some(e) => e.1 = e.1.max(w.margin),
                    None => by_time.push((t, w.margin)),
                }
            }
        }
        by_time.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            mode,
            description,
            lambda,
            required_margin,
            checked: witnesses.len(),
            worst,
            failures,
            pass: failures == 0 && !witnesses.is_empty(),
            by_time,
            t_star: None,
            perturbation_size: None,
            witnesses,
        }
    }
}

fn check_dims(n: usize, cone: &QuadraticCone) -> Result<()> {
    if cone.dim() != n || cone.rank() > n {
        return Err(Error::Precondition(format!(
            "cone of rank {} in dimension {} does not fit a {n}-dimensional field",
            cone.rank(),
            cone.dim()
        )));
    }
    Ok(())
}

/// `P·J + Jᵀ·P` for the cone matrix `P`.
fn symmetric_part(p: &DMatrix<f64>, j: &DMatrix<f64>) -> DMatrix<f64> {
    let pj = p * j;
    &pj + pj.transpose()
}

fn max_eig(s: &DMatrix<f64>, p: &DMatrix<f64>, lambda: f64) -> f64 {
    linalg::max_symmetric_eigenvalue(&(s + p * lambda))
}

/// Centre of the necessary feasibility window. In the eigenbasis of `P`
/// rescaled by `|p_i|^{-1/2}`, negative-definiteness of `S + λP` needs
/// `λ > λ_max(S₋₋)` on the negative block and `λ < −λ_max(S₊₊)` on the
/// positive block.
fn lambda_centre(s: &DMatrix<f64>, cone: &QuadraticCone) -> f64 {
    let ev = cone.eigenvalues();
    let mut q = cone.eigenvectors().clone();
    for (i, p) in ev.iter().enumerate() {
        q.column_mut(i).scale_mut(1.0 / p.abs().sqrt());
    }
    let sd = q.transpose() * s * q;
    let block = |idx: &[usize]| -> Option<f64> {
        if idx.is_empty() {
            return None;
        }
        let b = DMatrix::from_fn(idx.len(), idx.len(), |r, c| sd[(idx[r], idx[c])]);
        Some(linalg::max_symmetric_eigenvalue(&b))
    };
    let neg: Vec<usize> = (0..ev.len()).filter(|&i| ev[i] < 0.0).collect();
    let pos: Vec<usize> = (0..ev.len()).filter(|&i| ev[i] > 0.0).collect();
    match (block(&neg), block(&pos).map(|m| -m)) {
        (Some(lo), Some(hi)) => 0.5 * (lo + hi),
        (Some(lo), None) => lo,
        (None, Some(hi)) => hi,
        (None, None) => 0.0,
    }
}

/// λ minimising the largest eigenvalue of `S + λP`: a 64-point scan over
/// `λ_c ± 10`, then golden-section refinement around the best sample.
fn auto_lambda(s: &DMatrix<f64>, cone: &QuadraticCone) -> (f64, f64) {
    let p = cone.matrix();
    let c = lambda_centre(s, cone);
    let step = 2.0 * AUTO_HALF_WIDTH / (AUTO_SCAN - 1) as f64;
    let grid: Vec<f64> = (0..AUTO_SCAN).map(|k| c - AUTO_HALF_WIDTH + k as f64 * step).collect();
    let vals: Vec<f64> = grid.iter().map(|&l| max_eig(s, p, l)).collect();
    let best = (0..AUTO_SCAN)
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .unwrap_or(0);
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(AUTO_SCAN - 1)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (max_eig(s, p, x1), max_eig(s, p, x2));
    while b - a > 1e-10 * (1.0 + a.abs().max(b.abs())) {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = max_eig(s, p, x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = max_eig(s, p, x2);
        }
    }
    let mut cands = [(grid[best], vals[best]), (x1, f1), (x2, f2)];
    cands.sort_by(|u, v| u.1.total_cmp(&v.1));
    cands[0]
}

/// Largest eigenvalue of `P·DF(ξ) + DF(ξ)ᵀ·P + λP` at one point, with the
/// λ used.
pub fn cooperativity_margin<F: VectorField + ?Sized>(
    field: &F,
    cone: &QuadraticCone,
    xi: &[f64],
    lambda: &LambdaSpec,
) -> Result<(f64, f64)> {
    check_dims(field.dim(), cone)?;
    let s = symmetric_part(cone.matrix(), &field.jacobian(xi)?);
    match lambda {
        LambdaSpec::Expr { expr, params, .. } => {
            let l = expr.eval(xi, params)?;
            Ok((max_eig(&s, cone.matrix(), l), l))
        }
        LambdaSpec::Auto => {
            let (l, v) = auto_lambda(&s, cone);
            Ok((v, l))
        }
    }
}

/// Algebraic certificate on a `grid_res`-per-axis grid of `domain`.
pub fn algebraic_certificate<F: VectorField + ?Sized>(
    field: &F,
    cone: &QuadraticCone,
    domain: &BoxDomain,
    grid_res: usize,
    lambda: &LambdaSpec,
    required_margin: f64,
) -> Result<CooperativityReport> {
    check_dims(field.dim(), cone)?;
    if domain.dim() != field.dim() {
        return Err(Error::Invalid("box dimension differs from the field".into()));
    }
    let grid = domain.grid(grid_res);
    if grid.is_empty() || domain.is_empty() {
        return Err(Error::Invalid("empty certification grid".into()));
    }
    let witnesses = grid
        .par_iter()
        .map(|x| {
            let (margin, l) = cooperativity_margin(field, cone, x, lambda)?;
            Ok(Witness {
                point: x.clone(),
                partner: None,
                t: None,
                lambda: Some(l),
                margin,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CooperativityReport::from_witnesses(
        Mode::Algebraic,
        format!("{} grid points ({grid_res} per axis)", grid.len()),
        lambda.describe(),
        required_margin,
        witnesses,
    ))
}

/// Seeded pairs drawn uniformly from `domain`.
pub fn sample_pairs(domain: &BoxDomain, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (domain.sample(&mut rng), domain.sample(&mut rng)))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn dynamic_witnesses<F: VectorField + ?Sized>(
    field: &F,
    cone: &QuadraticCone,
    pairs: &[(Vec<f64>, Vec<f64>)],
    t_grid: &[f64],
    n_directions: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<Vec<Witness>> {
    check_dims(field.dim(), cone)?;
    if t_grid.is_empty() {
        return Err(Error::Invalid("empty time grid".into()));
    }
    if let Some(t) = t_grid.iter().find(|&&t| !(t > 0.0) || !t.is_finite()) {
        return Err(Error::Invalid(format!(
            "time grid entries must be positive (U(0) = I maps the boundary to itself), got {t}"
        )));
    }
    let mut dirs = cone.sample_directions(n_directions, Stratum::Boundary, seed)?;
    dirs.extend(cone.sample_directions((n_directions / 4).max(1), Stratum::Interior, seed ^ 0x5eed)?);
    let dirs: Vec<DMatrix<f64>> = dirs
        .into_iter()
        .map(|v| DMatrix::from_column_slice(v.len(), 1, &v))
        .collect();
    let t_max = t_grid.iter().copied().fold(0.0, f64::max);
    let per_pair: Vec<Result<Vec<Witness>>> = pairs
        .par_iter()
        .map(|(p, q)| {
            let cf = fundamental_matrix(field, p, q, t_max, opts)?;
            t_grid
                .iter()
                .map(|&t| {
                    let u = cf.u_at(t);
                    let mut worst = f64::NEG_INFINITY;
                    for v in &dirs {
                        let w = &u * v;
                        worst = worst.max(cone.normalized_form(w.as_slice())?);
                    }
                    Ok(Witness {
                        point: p.clone(),
                        partner: Some(q.clone()),
                        t: Some(t),
                        lambda: None,
                        margin: worst,
                    })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for r in per_pair {
        out.extend(r?);
    }
    Ok(out)
}

/// Dynamic certificate: for every pair and grid time, all sampled boundary
/// and interior directions must map strictly inside the cone.
#[allow(clippy::too_many_arguments)]
pub fn dynamic_certificate<F: VectorField + ?Sized>(
    field: &F,
    cone: &QuadraticCone,
    pairs: &[(Vec<f64>, Vec<f64>)],
    t_grid: &[f64],
    n_directions: usize,
    seed: u64,
    opts: &SolverOptions,
    required_margin: f64,
) -> Result<CooperativityReport> {
    let w = dynamic_witnesses(field, cone, pairs, t_grid, n_directions, seed, opts)?;
    Ok(CooperativityReport::from_witnesses(
        Mode::Dynamic,
        format!(
            "{} pairs × {} times × {} boundary directions",
            pairs.len(),
            t_grid.len(),
            n_directions
        ),
        "n/a".to_string(),
        required_margin,
        w,
    ))
}

/// Sampled `sup ‖F − G‖ + ‖DF − DG‖` over `samples` seeded points of `domain`.
pub fn perturbation_size<F, G>(f: &F, g: &G, domain: &BoxDomain, samples: usize, seed: u64) -> Result<f64>
where
    F: VectorField + ?Sized,
    G: VectorField + ?Sized,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sup = 0.0f64;
    for _ in 0..samples {
        let x = domain.sample(&mut rng);
        let d0 = linalg::distance(&f.eval_vec(&x)?, &g.eval_vec(&x)?);
        let d1 = (f.jacobian(&x)? - g.jacobian(&x)?).norm();
        sup = sup.max(d0 + d1);
    }
    Ok(sup)
}

/// Smallest grid time from which the dynamic check passes at every later
/// grid time, across all pairs. `t_star` is `None` when no tail passes.
#[allow(clippy::too_many_arguments)]
pub fn eventual_tstar<F: VectorField + ?Sized>(
    field: &F,
    cone: &QuadraticCone,
    pairs: &[(Vec<f64>, Vec<f64>)],
    t_grid: &[f64],
    n_directions: usize,
    seed: u64,
    opts: &SolverOptions,
    required_margin: f64,
) -> Result<CooperativityReport> {
    let mut grid = t_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let w = dynamic_witnesses(field, cone, pairs, &grid, n_directions, seed, opts)?;
    let mut report = CooperativityReport::from_witnesses(
        Mode::Eventual,
        format!("{} pairs × {} times", pairs.len(), grid.len()),
        "n/a".to_string(),
        required_margin,
        w,
    );
    let mut t_star = None;
    for &(t, worst) in report.by_time.iter().rev() {
        if worst < -required_margin {
            t_star = Some(t);
        } else {
            break;
        }
    }
    report.t_star = t_star;
    report.pass = t_star.is_some();
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityReport {
    pub pairs: usize,
    pub checks: usize,
    pub skipped: usize,
    pub violations: Vec<Witness>,
    pub pass: bool,
}

/// Check `φ_t(q) − φ_t(p) ∈ C` for ordered pairs (`q − p ∈ C`) at every
/// sample time, and strict interior membership for `t ≥ strong_from`.
pub fn monotonicity_check<F: VectorField + ?Sized>(
    field: &F,
    cone: &QuadraticCone,
    pairs: &[(Vec<f64>, Vec<f64>)],
    t_samples: &[f64],
    strong_from: Option<f64>,
    opts: &SolverOptions,
) -> Result<MonotonicityReport> {
    check_dims(field.dim(), cone)?;
    let mut skipped = 0;
    let mut active = Vec::new();
    for (p, q) in pairs {
        let d: Vec<f64> = q.iter().zip(p).map(|(a, b)| a - b).collect();
        if d.iter().all(|v| *v == 0.0) {
            skipped += 1;
            continue;
        }
        if !cone.contains(&d, DEFAULT_MARGIN)?.in_cone() {
            return Err(Error::Precondition(format!(
                "pair is not ordered: q − p = {d:?} lies outside the cone"
            )));
        }
        active.push((p, q));
    }
    let t_max = t_samples.iter().copied().fold(0.0, f64::max);
    let results: Vec<Result<Vec<Witness>>> = active
        .par_iter()
        .map(|(p, q)| {
            let fp = flow(field, p, t_max, opts)?;
            let fq = flow(field, q, t_max, opts)?;
            let mut bad = Vec::new();
            for &t in t_samples {
                let (a, b) = (fp.at(t), fq.at(t));
                let d: Vec<f64> = b.iter().zip(&a).map(|(x, y)| x - y).collect();
                let pos = cone.contains(&d, DEFAULT_MARGIN)?;
                let strong = strong_from.is_some_and(|s| t >= s);
                let ok = if strong {
                    pos.position == Position::Interior
                } else {
                    pos.in_cone()
                };
                if !ok {
                    bad.push(Witness {
                        point: (*p).clone(),
                        partner: Some((*q).clone()),
                        t: Some(t),
                        lambda: None,
                        margin: cone.normalized_form(&d)?,
                    });
                }
            }
            Ok(bad)
        })
        .collect();
    let mut violations = Vec::new();
    for r in results {
        violations.extend(r?);
    }
    Ok(MonotonicityReport {
        pairs: pairs.len(),
        checks: active.len() * t_samples.len(),
        skipped,
        pass: violations.is_empty(),
        violations,
    })
}

/// Seeded C-ordered pairs: `p` uniform in `domain`, `q = p + s·v` with `v` a
/// unit interior direction and `s ∈ [0.01, scale]`.
pub fn ordered_pairs(
    cone: &QuadraticCone,
    domain: &BoxDomain,
    count: usize,
    scale: f64,
    seed: u64,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let dirs = cone.sample_directions(count, Stratum::Interior, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    Ok(dirs
        .into_iter()
        .map(|v| {
            let p = domain.sample(&mut rng);
            let s = 0.01 + (scale - 0.01) * rand::Rng::random::<f64>(&mut rng);
            let q = p.iter().zip(&v).map(|(a, b)| a + s * b).collect();
            (p, q)
        })
        .collect())
}

/// First strided sample pair `t₁ < t₂` with `x(t₂) − x(t₁) ∈ C \ {0}`.
pub fn pseudo_order_scan(traj: &Trajectory, cone: &QuadraticCone, stride: usize) -> Option<(f64, f64)> {
    let samples: Vec<(f64, &[f64])> = traj.samples().collect();
    pseudo_order_scan_samples(&samples, cone, stride)
}

pub fn pseudo_order_scan_samples(
    samples: &[(f64, &[f64])],
    cone: &QuadraticCone,
    stride: usize,
) -> Option<(f64, f64)> {
    let stride = stride.max(1);
    for i in (0..samples.len()).step_by(stride) {
        for j in (i + stride..samples.len()).step_by(stride) {
            let (t1, a) = samples[i];
            let (t2, b) = samples[j];
            let d: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
            if d.iter().all(|v| *v == 0.0) {
                continue;
            }
            if cone.contains(&d, DEFAULT_MARGIN).map(|p| p.in_cone()).unwrap_or(false) {
                return Some((t1, t2));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{get_builtin, SystemDef};
    use nalgebra::DVector;

    fn limit() -> (BoundSystem, QuadraticCone) {
        let b = get_builtin("paper-3d-limit").unwrap();
        (b.system.bind_defaults().unwrap(), b.cone.unwrap())
    }

    #[test]
    fn origin_margin_with_zero_lambda() {
        let (f, cone) = limit();
        let (m, l) = cooperativity_margin(&f, &cone, &[0.0; 3], &LambdaSpec::constant(0.0)).unwrap();
        assert_eq!(l, 0.0);
        assert!((m + 2.0).abs() < 1e-12);
    }

    #[test]
    fn auto_lambda_finds_window_centre_at_origin() {
        let (f, cone) = limit();
        let (m, l) = cooperativity_margin(&f, &cone, &[0.0; 3], &LambdaSpec::Auto).unwrap();
        assert!(l.abs() < 1e-6, "{l}");
        assert!((m + 2.0).abs() < 1e-9);
        let (m, l) = cooperativity_margin(&f, &cone, &[1.0, -0.5, 0.7], &LambdaSpec::Auto).unwrap();
        let r2 = 1.0 + 0.25 + 0.49;
        assert!(m < -1.9 && (l - 3.0 * r2).abs() < 2.0, "{m} {l}");
        let (m, l) = cooperativity_margin(&f, &cone, &[-4.0, -4.0, -4.0], &LambdaSpec::Auto).unwrap();
        assert!((m + 2.0).abs() < 1e-8 && (l - 144.0).abs() < 1e-6, "{m} {l}");
    }

    #[test]
    fn zero_field_fails() {
        let z = SystemDef::from_sources("z", &["x", "y", "z"], &[], &["0", "0", "0"])
            .unwrap()
            .bind_defaults()
            .unwrap();
        let (_, cone) = limit();
        let r = algebraic_certificate(
            &z,
            &cone,
            &BoxDomain::symmetric(&[1.0; 3]),
            2,
            &LambdaSpec::constant(1.0),
            ALGEBRAIC_MARGIN,
        )
        .unwrap();
        assert!(!r.pass);
        assert_eq!(r.failures, 8);
    }

    #[test]
    fn scaling_the_cone_keeps_decisions() {
        let (f, cone) = limit();
        let dom = BoxDomain::symmetric(&[4.0; 3]);
        let spec = LambdaSpec::parse("3*(x^2+y^2+z^2) + 1.5", &f).unwrap();
        let a = algebraic_certificate(&f, &cone, &dom, 5, &spec, 0.0).unwrap();
        let b = algebraic_certificate(&f, &cone.scaled(2.0), &dom, 5, &spec, 0.0).unwrap();
        let signs = |r: &CooperativityReport| -> Vec<bool> { r.witnesses.iter().map(|w| w.margin < 0.0).collect() };
        assert_eq!(signs(&a), signs(&b));
        assert_eq!(a.pass, b.pass);
    }

    #[test]
    fn dynamic_rejects_nonpositive_times_and_bad_dims() {
        let (f, cone) = limit();
        let pairs = vec![(vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0])];
        let o = SolverOptions::default();
        assert!(matches!(
            dynamic_certificate(&f, &cone, &pairs, &[0.0, 1.0], 8, 1, &o, DYNAMIC_MARGIN),
            Err(Error::Invalid(_))
        ));
        let one = SystemDef::from_sources("g", &["x"], &[], &["x"]).unwrap().bind_defaults().unwrap();
        assert!(matches!(
            dynamic_certificate(&one, &cone, &[(vec![1.0], vec![0.0])], &[1.0], 8, 1, &o, DYNAMIC_MARGIN),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn unordered_pair_rejected_and_equal_pair_skipped() {
        let (f, cone) = limit();
        let o = SolverOptions::default();
        let rev = vec![(vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 0.1])];
        assert!(matches!(
            monotonicity_check(&f, &cone, &rev, &[1.0], None, &o),
            Err(Error::Precondition(_))
        ));
        let same = vec![(vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0])];
        let r = monotonicity_check(&f, &cone, &same, &[1.0], Some(0.5), &o).unwrap();
        assert_eq!(r.skipped, 1);
        assert!(r.pass);
    }

    #[test]
    fn circle_pseudo_order() {
        let cone = QuadraticCone::new(DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0]))).unwrap();
        let a = [1.0, 0.0];
        let b = [0.0, 1.0];
        let samples: Vec<(f64, &[f64])> = vec![(0.0, &a), (1.0, &b)];
        assert_eq!(pseudo_order_scan_samples(&samples, &cone, 1), Some((0.0, 1.0)));
        let c = [2.0, 2.0];
        let constant: Vec<(f64, &[f64])> = vec![(0.0, &c), (1.0, &c), (2.0, &c)];
        assert_eq!(pseudo_order_scan_samples(&constant, &cone, 1), None);
    }
}
