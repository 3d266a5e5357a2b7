//! Slow-fast systems `x' = f(x, y, ε)`, `ε y' = g(x, y, ε)`: critical
//! manifold, reduced flow, first-order slow manifold, invariance defect,
//! fast-fiber contraction and O(ε) closeness to the reduced flow.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynsys::{BoundSystem, BoxDomain, EvalError, Expr, SystemDef, VectorField};
use crate::error::{Error, Result};
use crate::integrate::{flow, SolverOptions, Trajectory};
use crate::linalg::{self, Eigenvalue};

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 60;
const SINGULAR_TOL: f64 = 1e-4;

/// Default stable-fiber neighbourhood size. The theory only asserts that
/// some positive value exists.
pub const DEFAULT_DELTA0: f64 = 0.5;

/// `x' = f`, `ε y' = g` with `n` slow and `m` fast (trailing) states.
#[derive(Clone, Debug)]
pub struct SlowFastSystem {
    raw: SystemDef,
    n: usize,
    m: usize,
    eps_index: usize,
    eps: f64,
    current: BoundSystem,
    limit: BoundSystem,
    /// `h₀` as expressions in the slow states when `g` is affine in `y`.
    h0_symbolic: Option<Vec<Expr>>,
}

struct Blocks {
    fx: DMatrix<f64>,
    fy: DMatrix<f64>,
    gx: DMatrix<f64>,
    gy: DMatrix<f64>,
}

impl SlowFastSystem {
    /// `raw` lists `f` for the leading states and `g` for the trailing `m`.
    /// `ε` takes its declared default, or 0 when none is given; every other
    /// parameter needs a default.
    pub fn new(raw: SystemDef, m: usize, eps_name: &str) -> Result<Self> {
        let dim = raw.dim();
        if m == 0 || m >= dim {
            return Err(Error::Invalid(format!(
                "need at least one slow and one fast state, got {m} fast of {dim}"
            )));
        }
        let eps_index = raw
            .param_names
            .iter()
            .position(|p| p == eps_name)
            .ok_or_else(|| {
                Error::Invalid(format!("slow-fast system must declare parameter `{eps_name}`"))
            })?;
        let eps = raw.param_defaults[eps_index].unwrap_or(0.0);
        let n = dim - m;
        let h0_symbolic = symbolic_critical_manifold(&raw, n, m, eps_index);
        let mut sf = Self {
            current: bind_with(&raw, eps_index, eps)?,
            limit: bind_with(&raw, eps_index, 0.0)?,
            raw,
            n,
            m,
            eps_index,
            eps,
            h0_symbolic,
        };
        sf.raw.param_defaults[eps_index] = Some(eps);
        Ok(sf)
    }

    /// The same system at another `ε ≥ 0`.
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::Invalid(format!("ε must be non-negative, got {eps}")));
        }
        let mut out = self.clone();
        out.eps = eps;
        out.raw.param_defaults[self.eps_index] = Some(eps);
        out.current = bind_with(&self.raw, self.eps_index, eps)?;
        Ok(out)
    }

    pub fn raw(&self) -> &SystemDef {
        &self.raw
    }

    pub fn slow_dim(&self) -> usize {
        self.n
    }

    pub fn fast_dim(&self) -> usize {
        self.m
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn eps_name(&self) -> &str {
        &self.raw.param_names[self.eps_index]
    }

    pub fn has_symbolic_manifold(&self) -> bool {
        self.h0_symbolic.is_some()
    }

    /// Slow-time field `(f, g/ε)`.
    pub fn full_system(&self) -> SystemDef {
        let mut def = self.raw.clone();
        for c in def.components[self.n..].iter_mut() {
            *c = Expr::div(c.clone(), Expr::Param(self.eps_index));
        }
        def
    }

    /// Fast-time field `(ε f, g)`.
    pub fn fast_time_system(&self) -> SystemDef {
        let mut def = self.raw.clone();
        for c in def.components[..self.n].iter_mut() {
            *c = Expr::mul(Expr::Param(self.eps_index), c.clone());
        }
        def
    }

    /// Slow-time field bound at the current `ε`.
    pub fn full_field(&self) -> Result<BoundSystem> {
        if self.eps <= 0.0 {
            return Err(Error::Invalid("the slow-time field needs ε > 0".into()));
        }
        Ok(bind_with(&self.full_system(), self.eps_index, self.eps)?)
    }

    pub fn fast_time_field(&self) -> Result<BoundSystem> {
        Ok(bind_with(&self.fast_time_system(), self.eps_index, self.eps)?)
    }

    fn join(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.n + self.m);
        z.extend_from_slice(x);
        z.extend_from_slice(y);
        z
    }

    fn check_dims(&self, x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() != self.n || y.len() != self.m {
            return Err(Error::Invalid(format!(
                "expected {} slow and {} fast components, got {} and {}",
                self.n,
                self.m,
                x.len(),
                y.len()
            )));
        }
        Ok(())
    }

    fn eval_split(&self, b: &BoundSystem, x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_dims(x, y)?;
        let mut v = b.eval_vec(&self.join(x, y))?;
        let g = v.split_off(self.n);
        Ok((v, g))
    }

    /// `(f(x, y, ε), g(x, y, ε))` at the current `ε`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.eval_split(&self.current, x, y)
    }

    /// `(f(x, y, 0), g(x, y, 0))`.
    pub fn eval_limit(&self, x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.eval_split(&self.limit, x, y)
    }

    fn blocks(&self, b: &BoundSystem, x: &[f64], y: &[f64]) -> Result<Blocks> {
        self.check_dims(x, y)?;
        let j = b.jacobian(&self.join(x, y))?;
        let (n, m) = (self.n, self.m);
        Ok(Blocks {
            fx: j.view((0, 0), (n, n)).into_owned(),
            fy: j.view((0, n), (n, m)).into_owned(),
            gx: j.view((n, 0), (m, n)).into_owned(),
            gy: j.view((n, n), (m, m)).into_owned(),
        })
    }

    /// `D_y g(x, y, 0)`.
    pub fn fast_jacobian(&self, x: &[f64], y: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.blocks(&self.limit, x, y)?.gy)
    }

    fn g_eps_limit(&self, x: &[f64], y: &[f64]) -> Result<DVector<f64>> {
        let d = self.limit.param_derivative(&self.join(x, y), self.eps_index)?;
        Ok(DVector::from_column_slice(&d[self.n..]))
    }

    /// Damped Newton for `g(x, y, 0) = 0` in `y`, with the fast spectrum at
    /// the root attached.
    pub fn solve_critical_manifold(
        &self,
        x: &[f64],
        y_guess: &[f64],
    ) -> Result<CriticalManifoldPoint> {
        self.check_dims(x, y_guess)?;
        let mut y = y_guess.to_vec();
        let mut res = linalg::norm(&self.eval_limit(x, &y)?.1);
        let mut iterations = 0;
        while res > NEWTON_TOL {
            if iterations == NEWTON_MAX_ITER {
                return Err(Error::NoConvergence(format!(
                    "critical manifold Newton at x = {x:?}: residual {res:e} after {iterations} iterations"
                )));
            }
            iterations += 1;
            let g = DVector::from_vec(self.eval_limit(x, &y)?.1);
            let gy = self.fast_jacobian(x, &y)?;
            let step = linalg::solve(&gy, &(-g)).ok_or_else(|| {
                Error::Singular(format!("D_y g is singular at x = {x:?}, y = {y:?}"))
            })?;
            let mut lambda = 1.0;
            loop {
                let trial: Vec<f64> = y.iter().zip(step.iter()).map(|(a, d)| a + lambda * d).collect();
                let r = match self.eval_limit(x, &trial) {
                    Ok((_, g)) => linalg::norm(&g),
                    Err(_) => f64::INFINITY,
                };
                if r < res || lambda < 1e-6 {
                    if r.is_finite() {
                        y = trial;
                        res = r;
                    }
                    break;
                }
                lambda *= 0.5;
            }
            if !res.is_finite() {
                return Err(Error::NoConvergence(format!(
                    "critical manifold Newton diverged at x = {x:?}"
                )));
            }
        }
        let gy = self.fast_jacobian(x, &y)?;
        if linalg::smallest_singular_value(&gy) < SINGULAR_TOL {
            return Err(Error::Singular(format!(
                "D_y g is singular at the root y = {y:?} over x = {x:?}"
            )));
        }
        let eigenvalues = linalg::eigenvalues(&gy);
        let abscissa = eigenvalues.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
        Ok(CriticalManifoldPoint {
            x: x.to_vec(),
            h0: y,
            eigenvalues,
            spectral_abscissa: abscissa,
            mu: -abscissa,
            stable: abscissa < 0.0,
            residual: res,
            iterations,
        })
    }

    /// `h₀(x)`: symbolic when available, otherwise Newton from `guess`
    /// (or the origin).
    pub fn h0(&self, x: &[f64], guess: Option<&[f64]>) -> Result<Vec<f64>> {
        if let Some(exprs) = &self.h0_symbolic {
            if x.len() != self.n {
                return Err(Error::Invalid(format!("expected {} slow components", self.n)));
            }
            return exprs
                .iter()
                .map(|e| e.eval(x, &self.limit.params).map_err(Error::from))
                .collect();
        }
        let zeros = vec![0.0; self.m];
        Ok(self.solve_critical_manifold(x, guess.unwrap_or(&zeros))?.h0)
    }

    /// `Dh₀(x) = −(D_y g)⁻¹ D_x g` at `(x, h₀(x), 0)`.
    pub fn dh0(&self, x: &[f64], h0: &[f64]) -> Result<DMatrix<f64>> {
        let b = self.blocks(&self.limit, x, h0)?;
        let lu = b.gy.clone().lu();
        lu.solve(&(-b.gx))
            .ok_or_else(|| Error::Singular(format!("D_y g singular at x = {x:?}")))
    }

    /// `h₁(x) = (D_y g)⁻¹ (Dh₀ f(x, h₀, 0) − ∂_ε g(x, h₀, 0))`.
    pub fn h1(&self, x: &[f64], h0: &[f64]) -> Result<Vec<f64>> {
        let b = self.blocks(&self.limit, x, h0)?;
        let lu = b.gy.clone().lu();
        let dh0 = lu
            .solve(&(-&b.gx))
            .ok_or_else(|| Error::Singular(format!("D_y g singular at x = {x:?}")))?;
        let f0 = DVector::from_vec(self.eval_limit(x, h0)?.0);
        let rhs = dh0 * f0 - self.g_eps_limit(x, h0)?;
        let h1 = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Singular(format!("D_y g singular at x = {x:?}")))?;
        Ok(h1.iter().copied().collect())
    }

    /// `h₀(x) + ε h₁(x)` at the current `ε`.
    pub fn first_order_manifold(&self, x: &[f64]) -> Result<Vec<f64>> {
        let h0 = self.h0(x, None)?;
        if self.eps == 0.0 {
            return Ok(h0);
        }
        let h1 = self.h1(x, &h0)?;
        Ok(h0.iter().zip(&h1).map(|(a, b)| a + self.eps * b).collect())
    }

    pub fn manifold(&self, order: ManifoldOrder) -> SlowManifoldApprox<'_> {
        SlowManifoldApprox { sf: self, order }
    }

    /// `‖g(x, h(x), ε) − ε Dh(x) f(x, h(x), ε)‖` at the current `ε`.
    pub fn invariance_defect(&self, h: &dyn ManifoldMap, x: &[f64]) -> Result<f64> {
        let y = h.eval(x)?;
        let dh = h.derivative(x)?;
        let (f, g) = self.eval(x, &y)?;
        let flow_term = dh * DVector::from_vec(f) * self.eps;
        let d: Vec<f64> = g.iter().zip(flow_term.iter()).map(|(a, b)| a - b).collect();
        Ok(linalg::norm(&d))
    }

    /// The reduced field `x ↦ f(x, h₀(x), 0)`.
    pub fn reduced_system(&self) -> Result<ReducedSystem> {
        if let Some(h0) = &self.h0_symbolic {
            let eps = self.eps_index;
            let n = self.n;
            let components = self.raw.components[..n]
                .iter()
                .map(|c| {
                    c.substitute_states(&|i| (i >= n).then(|| h0[i - n].clone()))
                        .substitute_params(&|k| (k == eps).then(|| Expr::Num(0.0)))
                        .simplify()
                })
                .collect();
            let mut param_defaults = self.raw.param_defaults.clone();
            param_defaults[eps] = Some(0.0);
            let def = SystemDef {
                name: format!("{}-reduced", self.raw.name),
                state_names: self.raw.state_names[..n].to_vec(),
                param_names: self.raw.param_names.clone(),
                param_defaults,
                components,
            };
            let bound = def.bind_defaults()?;
            return Ok(ReducedSystem::Symbolic(bound));
        }
        Ok(ReducedSystem::Implicit(Box::new(ImplicitReduced {
            sf: self.clone(),
            guesses: None,
        })))
    }

    /// Like [`Self::reduced_system`], but for non-affine `g` the Newton
    /// solves are seeded by multilinear interpolation of `h₀` tabulated on
    /// a `res`-point-per-axis grid of `slow_box`.
    pub fn reduced_system_tabulated(&self, slow_box: &BoxDomain, res: usize) -> Result<ReducedSystem> {
        let reduced = self.reduced_system()?;
        let ReducedSystem::Implicit(_) = reduced else {
            return Ok(reduced);
        };
        let table = GuessTable::build(self, slow_box, res)?;
        Ok(ReducedSystem::Implicit(Box::new(ImplicitReduced {
            sf: self.clone(),
            guesses: Some(table),
        })))
    }

    /// Certify that `h₀` exists with a stable fast spectrum on a grid of
    /// `slow_box`; `μ` is 90% of the smallest spectral gap found.
    pub fn certify_fast_stability(&self, slow_box: &BoxDomain, res: usize) -> Result<FastStabilityReport> {
        if slow_box.dim() != self.n {
            return Err(Error::Invalid("box dimension differs from the slow dimension".into()));
        }
        let grid = slow_box.grid(res);
        if grid.is_empty() {
            return Err(Error::Invalid("empty certification grid".into()));
        }
        let zeros = vec![0.0; self.m];
        let results: Vec<std::result::Result<CriticalManifoldPoint, String>> = grid
            .par_iter()
            .map(|x| {
                let guess = self.h0(x, None).unwrap_or_else(|_| zeros.clone());
                self.solve_critical_manifold(x, &guess).map_err(|e| e.to_string())
            })
            .collect();
        let mut failures = Vec::new();
        let mut worst = f64::NEG_INFINITY;
        for (x, r) in grid.iter().zip(&results) {
            match r {
                Ok(p) => {
                    worst = worst.max(p.spectral_abscissa);
                    if !p.stable {
                        failures.push(StabilityFailure {
                            x: x.clone(),
                            reason: format!("spectral abscissa {}", p.spectral_abscissa),
                        });
                    }
                }
                Err(e) => failures.push(StabilityFailure {
                    x: x.clone(),
                    reason: e.clone(),
                }),
            }
        }
        let max_abscissa = worst;
        Ok(FastStabilityReport {
            points: grid.len(),
            max_spectral_abscissa: max_abscissa,
            mu: if failures.is_empty() { 0.9 * -max_abscissa } else { 0.0 },
            pass: failures.is_empty() && max_abscissa < 0.0,
            failures,
        })
    }

    /// Global attraction of `h₀(x)` for the frozen fast system
    /// `y' = g(x, y, 0)` from `samples` seeded starts with `|y_i − h₀_i| ≤ spread`.
    pub fn frozen_fast_convergence(
        &self,
        x: &[f64],
        samples: usize,
        spread: f64,
        tau: f64,
        seed: u64,
    ) -> Result<FrozenFastReport> {
        let h0 = self.h0(x, None)?;
        let frozen = FrozenFast { sf: self, x: x.to_vec() };
        let lower: Vec<f64> = h0.iter().map(|v| v - spread).collect();
        let upper: Vec<f64> = h0.iter().map(|v| v + spread).collect();
        let dom = BoxDomain::new(lower, upper);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let starts: Vec<Vec<f64>> = (0..samples).map(|_| dom.sample(&mut rng)).collect();
        let opts = SolverOptions::default();
        let finals: Vec<Result<f64>> = starts
            .par_iter()
            .map(|y0| {
                let tr = flow(&frozen, y0, tau, &opts)?;
                Ok(linalg::distance(tr.final_state(), &h0))
            })
            .collect();
        let mut max_final = 0.0f64;
        for d in finals {
            max_final = max_final.max(d?);
        }
        let bound = spread * (-0.5 * tau).exp().max(1e-9);
        Ok(FrozenFastReport {
            x: x.to_vec(),
            h0,
            samples,
            max_final_distance: max_final,
            converged: max_final <= bound.max(1e-6),
        })
    }

    /// Decay rate of `‖y(τ) − h_ε(x(τ))‖` along the fast-time flow from
    /// `ic`, fitted by least squares on `log d` from the peak of `d` to its
    /// first later local minimum.
    pub fn fast_contraction_rate(
        &self,
        ic: &[f64],
        tau_span: f64,
        opts: &SolverOptions,
    ) -> Result<ContractionFit> {
        if ic.len() != self.n + self.m {
            return Err(Error::Invalid(format!(
                "initial condition needs {} components",
                self.n + self.m
            )));
        }
        let floor = 100.0 * opts.abs_tol;
        let dist = |z: &[f64]| -> Result<f64> {
            let h = self.first_order_manifold(&z[..self.n])?;
            Ok(linalg::distance(&z[self.n..], &h))
        };
        let d0 = dist(ic)?;
        if d0 <= floor {
            return Err(Error::AlreadyOnManifold { distance: d0 });
        }
        let field = self.fast_time_field()?;
        let traj = flow(&field, ic, tau_span, opts)?;
        let samples = 801;
        let mut taus = Vec::with_capacity(samples);
        let mut ds = Vec::with_capacity(samples);
        for (tau, z) in traj.resample(samples) {
            taus.push(tau);
            ds.push(dist(&z)?);
        }
        let peak = (0..samples)
            .max_by(|&a, &b| ds[a].total_cmp(&ds[b]))
            .unwrap_or(0);
        let mut end = samples - 1;
        for i in peak + 1..samples - 1 {
            if ds[i] <= floor {
                end = i - 1;
                break;
            }
            if ds[i] <= ds[i - 1] && ds[i] <= ds[i + 1] {
                end = i;
                break;
            }
        }
        let window: Vec<usize> = (peak..=end).filter(|&i| ds[i] > floor).collect();
        if window.len() < 3 {
            return Err(Error::Invalid(
                "too few samples above the noise floor to fit a decay rate".into(),
            ));
        }
        let k = window.len() as f64;
        let mt = window.iter().map(|&i| taus[i]).sum::<f64>() / k;
        let ml = window.iter().map(|&i| ds[i].ln()).sum::<f64>() / k;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for &i in &window {
            let dt = taus[i] - mt;
            sxy += dt * (ds[i].ln() - ml);
            sxx += dt * dt;
        }
        Ok(ContractionFit {
            rate: sxy / sxx,
            window: (taus[window[0]], taus[*window.last().unwrap()]),
            samples: window.len(),
            initial_distance: d0,
            final_distance: *ds.last().unwrap(),
            within_delta0: d0 <= DEFAULT_DELTA0,
        })
    }

    /// Sup-distance over `[t_bl, T]` between the slow components of the
    /// full flow and the reduced flow from the same slow initial state,
    /// for each `ε`. `t_bl = 5ε/μ`.
    pub fn tikhonov_closeness(
        &self,
        ic: &[f64],
        t_end: f64,
        eps_list: &[f64],
        mu: f64,
        opts: &SolverOptions,
    ) -> Result<Vec<ClosenessEntry>> {
        if ic.len() != self.n + self.m {
            return Err(Error::Invalid(format!(
                "initial condition needs {} components",
                self.n + self.m
            )));
        }
        if !(mu > 0.0) {
            return Err(Error::Invalid("μ must be positive".into()));
        }
        let reduced = self.reduced_system()?;
        let x0 = &ic[..self.n];
        let red = flow(&reduced, x0, t_end, opts)?;
        eps_list
            .par_iter()
            .map(|&eps| {
                if !(eps > 0.0) {
                    return Err(Error::Invalid(format!("ε must be positive, got {eps}")));
                }
                let sf = self.with_eps(eps)?;
                let full = sf.full_field()?;
                let t_bl = 5.0 * eps / mu;
                if t_bl >= t_end {
                    return Err(Error::Invalid(format!(
                        "boundary layer {t_bl} exceeds the horizon {t_end}"
                    )));
                }
                let tr = flow(&full, ic, t_end, &sf.slow_time_options(opts))?;
                let sup = sup_slow_distance(&tr, &red, self.n, t_bl, t_end);
                Ok(ClosenessEntry {
                    eps,
                    t_bl,
                    sup_error: sup,
                })
            })
            .collect()
    }

    /// Solver options for the slow-time full system: fast components get
    /// `abs_tol · ε`.
    pub fn slow_time_options(&self, opts: &SolverOptions) -> SolverOptions {
        let mut o = opts.clone();
        let mut tols = vec![opts.abs_tol; self.n + self.m];
        for t in tols[self.n..].iter_mut() {
            *t *= self.eps.max(f64::MIN_POSITIVE);
        }
        o.abs_tol_components = Some(tols);
        o
    }

    /// The slow flow restricted to the first-order slow manifold,
    /// `x ↦ f(x, h₀(x) + ε h₁(x), ε)`.
    pub fn slow_manifold_field(&self) -> SlowManifoldField {
        SlowManifoldField { sf: self.clone() }
    }

    /// One row per grid point of `slow_box`: `h₀`, `h₁`, both invariance
    /// defects and the fast spectral abscissa.
    pub fn manifold_table(&self, slow_box: &BoxDomain, res: usize) -> Result<Vec<ManifoldRow>> {
        let grid = slow_box.grid(res);
        let m0 = self.manifold(ManifoldOrder::Zero);
        let m1 = self.manifold(ManifoldOrder::One);
        grid.par_iter()
            .map(|x| {
                let p = self.solve_critical_manifold(x, &self.h0(x, None)?)?;
                let h1 = self.h1(x, &p.h0)?;
                Ok(ManifoldRow {
                    defect0: self.invariance_defect(&m0, x)?,
                    defect1: self.invariance_defect(&m1, x)?,
                    x: x.clone(),
                    h0: p.h0,
                    h1,
                    spectral_abscissa: p.spectral_abscissa,
                })
            })
            .collect()
    }
}

fn bind_with(def: &SystemDef, eps_index: usize, eps: f64) -> std::result::Result<BoundSystem, EvalError> {
    let mut values = BTreeMap::new();
    values.insert(def.param_names[eps_index].clone(), eps);
    def.bind(&values)
}

/// `h₀ = −r / c` from `g = c·y + r` when there is one fast state and `g` is
/// affine in it with `c` free of `y`.
fn symbolic_critical_manifold(raw: &SystemDef, n: usize, m: usize, eps: usize) -> Option<Vec<Expr>> {
    if m != 1 {
        return None;
    }
    let g = raw.components[n].substitute_params(&|k| (k == eps).then(|| Expr::Num(0.0)));
    let (c, r) = g.simplify().affine_split(n)?;
    if matches!(c, Expr::Num(v) if v == 0.0) {
        return None;
    }
    Some(vec![Expr::div(Expr::Neg(Box::new(r)), c).simplify()])
}

fn sup_slow_distance(full: &Trajectory, reduced: &Trajectory, n: usize, t_bl: f64, t_end: f64) -> f64 {
    let mut times: Vec<f64> = full
        .times()
        .iter()
        .chain(reduced.times())
        .copied()
        .filter(|&t| t >= t_bl && t <= t_end)
        .collect();
    let k = 2000;
    times.extend((0..=k).map(|i| t_bl + (t_end - t_bl) * i as f64 / k as f64));
    times
        .iter()
        .map(|&t| linalg::distance(&full.at(t)[..n], &reduced.at(t)))
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalManifoldPoint {
    pub x: Vec<f64>,
    pub h0: Vec<f64>,
    pub eigenvalues: Vec<Eigenvalue>,
    pub spectral_abscissa: f64,
    /// `−spectral_abscissa`: the local normal-hyperbolicity gap.
    pub mu: f64,
    pub stable: bool,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ManifoldOrder {
    Zero,
    One,
}

/// A graph `y = h(x)` over the slow variables.
pub trait ManifoldMap {
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// `Dh(x)`, by central differences unless overridden.
    fn derivative(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        central_difference(|p| self.eval(p), x)
    }
}

fn central_difference(h: impl Fn(&[f64]) -> Result<Vec<f64>>, x: &[f64]) -> Result<DMatrix<f64>> {
    let h_x = h(x)?;
    let mut d = DMatrix::zeros(h_x.len(), x.len());
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        let step = 1e-5 * (1.0 + x[j].abs());
        xp[j] = x[j] + step;
        let hp = h(&xp)?;
        xp[j] = x[j] - step;
        let hm = h(&xp)?;
        xp[j] = x[j];
        for i in 0..h_x.len() {
            d[(i, j)] = (hp[i] - hm[i]) / (2.0 * step);
        }
    }
    Ok(d)
}

/// `h₀` or `h₀ + ε h₁` of a slow-fast system.
pub struct SlowManifoldApprox<'a> {
    sf: &'a SlowFastSystem,
    pub order: ManifoldOrder,
}

impl ManifoldMap for SlowManifoldApprox<'_> {
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self.order {
            ManifoldOrder::Zero => self.sf.h0(x, None),
            ManifoldOrder::One => self.sf.first_order_manifold(x),
        }
    }

    fn derivative(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        match self.order {
            ManifoldOrder::Zero => {
                let h0 = self.sf.h0(x, None)?;
                self.sf.dh0(x, &h0)
            }
            ManifoldOrder::One => central_difference(|p| self.eval(p), x),
        }
    }
}

/// The reduced flow on the critical manifold.
#[derive(Clone, Debug)]
pub enum ReducedSystem {
    /// Closed-form substitution of an affine critical manifold.
    Symbolic(BoundSystem),
    /// `h₀` resolved by Newton at every evaluation.
    Implicit(Box<ImplicitReduced>),
}

impl ReducedSystem {
    /// The substituted system definition, when one exists.
    pub fn system_def(&self) -> Option<&SystemDef> {
        match self {
            ReducedSystem::Symbolic(b) => Some(&b.def),
            ReducedSystem::Implicit(_) => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ImplicitReduced {
    sf: SlowFastSystem,
    guesses: Option<GuessTable>,
}

impl ImplicitReduced {
    fn h0(&self, x: &[f64]) -> std::result::Result<Vec<f64>, EvalError> {
        let guess = self.guesses.as_ref().map(|g| g.interpolate(x));
        let zeros = vec![0.0; self.sf.m];
        self.sf
            .solve_critical_manifold(x, guess.as_deref().unwrap_or(&zeros))
            .map(|p| p.h0)
            .map_err(|_| EvalError::NonFinite)
    }
}

impl VectorField for ReducedSystem {
    fn dim(&self) -> usize {
        match self {
            ReducedSystem::Symbolic(b) => b.dim(),
            ReducedSystem::Implicit(r) => r.sf.n,
        }
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> std::result::Result<(), EvalError> {
        match self {
            ReducedSystem::Symbolic(b) => b.eval(x, out),
            ReducedSystem::Implicit(r) => {
                let h0 = r.h0(x)?;
                let f = r
                    .sf
                    .eval_limit(x, &h0)
                    .map_err(|_| EvalError::NonFinite)?
                    .0;
                out.copy_from_slice(&f);
                Ok(())
            }
        }
    }

    fn jacobian(&self, x: &[f64]) -> std::result::Result<DMatrix<f64>, EvalError> {
        match self {
            ReducedSystem::Symbolic(b) => b.jacobian(x),
            ReducedSystem::Implicit(r) => {
                let h0 = r.h0(x)?;
                let b = r.sf.blocks(&r.sf.limit, x, &h0).map_err(|_| EvalError::NonFinite)?;
                let dh0 = b.gy.clone().lu().solve(&(-&b.gx)).ok_or(EvalError::DivisionByZero)?;
                Ok(b.fx + b.fy * dh0)
            }
        }
    }
}

/// See [`SlowFastSystem::slow_manifold_field`].
#[derive(Clone, Debug)]
pub struct SlowManifoldField {
    sf: SlowFastSystem,
}

impl VectorField for SlowManifoldField {
    fn dim(&self) -> usize {
        self.sf.n
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> std::result::Result<(), EvalError> {
        let to_eval = |e: Error| match e {
            Error::Eval(e) => e,
            _ => EvalError::NonFinite,
        };
        let h = self.sf.first_order_manifold(x).map_err(to_eval)?;
        let f = self.sf.eval(x, &h).map_err(to_eval)?.0;
        out.copy_from_slice(&f);
        Ok(())
    }
}

/// `h₀` tabulated on a grid, for seeding Newton.
#[derive(Clone, Debug)]
struct GuessTable {
    domain: BoxDomain,
    res: usize,
    values: Vec<Vec<f64>>,
}

impl GuessTable {
    fn build(sf: &SlowFastSystem, domain: &BoxDomain, res: usize) -> Result<Self> {
        if res < 2 {
            return Err(Error::Invalid("tabulation needs at least 2 points per axis".into()));
        }
        let grid = domain.grid(res);
        let zeros = vec![0.0; sf.m];
        let values = grid
            .par_iter()
            .map(|x| sf.solve_critical_manifold(x, &zeros).map(|p| p.h0))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            domain: domain.clone(),
            res,
            values,
        })
    }

    fn interpolate(&self, x: &[f64]) -> Vec<f64> {
        let n = self.domain.dim();
        let r = self.res;
        let mut base = 0usize;
        let mut fracs = Vec::with_capacity(n);
        let mut strides = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * r;
        }
        for i in 0..n {
            let (lo, hi) = (self.domain.lower[i], self.domain.upper[i]);
            let s = ((x[i] - lo) / (hi - lo) * (r - 1) as f64).clamp(0.0, (r - 1) as f64);
            let k = (s.floor() as usize).min(r - 2);
            base += k * strides[i];
            fracs.push(s - k as f64);
        }
        let m = self.values[0].len();
        let mut out = vec![0.0; m];
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut idx = base;
            for i in 0..n {
                if corner >> i & 1 == 1 {
                    w *= fracs[i];
                    idx += strides[i];
                } else {
                    w *= 1.0 - fracs[i];
                }
            }
            for (o, v) in out.iter_mut().zip(&self.values[idx]) {
                *o += w * v;
            }
        }
        out
    }
}

struct FrozenFast<'a> {
    sf: &'a SlowFastSystem,
    x: Vec<f64>,
}

impl VectorField for FrozenFast<'_> {
    fn dim(&self) -> usize {
        self.sf.m
    }

    fn eval(&self, y: &[f64], out: &mut [f64]) -> std::result::Result<(), EvalError> {
        let z = self.sf.join(&self.x, y);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.sf.limit.eval_component(self.sf.n + i, &z)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityFailure {
    pub x: Vec<f64>,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct FastStabilityReport {
    pub points: usize,
    pub max_spectral_abscissa: f64,
    pub mu: f64,
    pub pass: bool,
    pub failures: Vec<StabilityFailure>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FrozenFastReport {
    pub x: Vec<f64>,
    pub h0: Vec<f64>,
    pub samples: usize,
    pub max_final_distance: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContractionFit {
    /// Fitted slope of `log d(τ)` in fast time.
    pub rate: f64,
    pub window: (f64, f64),
    pub samples: usize,
    pub initial_distance: f64,
    pub final_distance: f64,
    /// Whether the start lies within the default stable-fiber neighbourhood.
    pub within_delta0: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosenessEntry {
    pub eps: f64,
    pub t_bl: f64,
    pub sup_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ManifoldRow {
    pub x: Vec<f64>,
    pub h0: Vec<f64>,
    pub h1: Vec<f64>,
    pub defect0: f64,
    pub defect1: f64,
    pub spectral_abscissa: f64,
}
