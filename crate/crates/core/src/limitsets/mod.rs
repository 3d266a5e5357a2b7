//! ω-limit sets: equilibria, periodic orbits and their classification.

mod equilibria;
mod periodic;
mod sweep;

pub use equilibria::{find_equilibria, newton_root, Equilibrium, DEDUP_DISTANCE, EQUILIBRIUM_RESIDUAL};
pub use periodic::{
    poincare_return, refine_periodic_orbit, PeriodicOrbit, RefineOptions, SECTION_TIME_TOL, TANGENCY_TOL,
};
pub use sweep::{genericity_sweep, SweepCounts, SweepEntry, SweepReport};

use serde::Serialize;

use crate::dynsys::VectorField;
use crate::integrate::{flow, SolverOptions};
use crate::linalg;
use crate::slowfast::SlowFastSystem;

/// Largest relative gap between the refined and the raw period.
pub const PERIOD_AGREEMENT: f64 = 0.02;

#[derive(Clone, Debug, Serialize)]
pub struct ClassifyOptions {
    /// Transient integrated before any test.
    pub transient: f64,
    /// Further transients tried when neither test fires.
    pub extensions: usize,
    pub eq_tol: f64,
    /// Window over which an equilibrium candidate must not move.
    pub probe_window: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub recur_tol: f64,
    /// Smallest allowed distance between a closed orbit and an equilibrium.
    pub separation_tol: f64,
    pub solver: SolverOptions,
    pub refine: RefineOptions,
    /// Known equilibria for the separation guard.
    #[serde(skip)]
    pub equilibria: Vec<Vec<f64>>,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            transient: 50.0,
            extensions: 2,
            eq_tol: 1e-9,
            probe_window: 1.0,
            t_min: 0.5,
            t_max: 50.0,
            recur_tol: 1e-4,
            separation_tol: 1e-2,
            solver: SolverOptions::default(),
            refine: RefineOptions::default(),
            equilibria: Vec::new(),
        }
    }
}

impl ClassifyOptions {
    /// Options for the full system in slow time: fast components get
    /// ε-scaled absolute tolerances in both the scan and the refinement.
    pub fn for_slow_fast(sf: &SlowFastSystem) -> Self {
        let mut o = Self::default();
        o.solver = sf.slow_time_options(&o.solver);
        o.refine.solver = sf.slow_time_options(&o.refine.solver);
        o
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub integrated_time: f64,
    pub final_state: Vec<f64>,
    pub field_norm: f64,
    pub displacement: f64,
    /// Time and distance of the closest return within the window.
    pub best_return: Option<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind")]
pub enum OmegaClassification {
    Equilibrium(Equilibrium),
    ClosedOrbit {
        orbit: PeriodicOrbit,
        /// Period estimate from the raw near-recurrence.
        raw_period: f64,
        /// Smallest distance from the orbit samples to a known equilibrium.
        equilibrium_distance: Option<f64>,
    },
    Unresolved {
        reason: String,
        diagnostics: Option<Diagnostics>,
    },
}

impl OmegaClassification {
    pub fn kind(&self) -> &'static str {
        match self {
            OmegaClassification::Equilibrium(_) => "Equilibrium",
            OmegaClassification::ClosedOrbit { .. } => "ClosedOrbit",
            OmegaClassification::Unresolved { .. } => "Unresolved",
        }
    }

    fn unresolved(reason: impl Into<String>, diagnostics: Option<Diagnostics>) -> Self {
        OmegaClassification::Unresolved {
            reason: reason.into(),
            diagnostics,
        }
    }
}

/// First local minimum of `‖x(t) − x_ref‖` over `[t_min, t_max]` below
/// `tol`, refined by golden section on the dense output; otherwise the
/// overall best sample.
fn near_recurrence<F: VectorField + ?Sized>(
    field: &F,
    x_ref: &[f64],
    opts: &ClassifyOptions,
) -> crate::Result<(Option<f64>, Option<(f64, f64)>)> {
    let traj = flow(field, x_ref, opts.t_max, &opts.solver)?;
    let dist = |t: f64| linalg::distance(&traj.at(t), x_ref);
    let h = 0.01f64.min((opts.t_max - opts.t_min) / 100.0);
    let k = ((opts.t_max - opts.t_min) / h).floor() as usize;
    let ts: Vec<f64> = (0..=k).map(|i| opts.t_min + i as f64 * h).collect();
    let ds: Vec<f64> = ts.iter().map(|&t| dist(t)).collect();
    let mut best: Option<(f64, f64)> = None;
    for i in 1..ts.len().saturating_sub(1) {
        if !(ds[i] <= ds[i - 1] && ds[i] <= ds[i + 1]) {
            continue;
        }
        let (t, d) = golden_min(&dist, ts[i - 1], ts[i + 1]);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((t, d));
        }
        if d < opts.recur_tol {
            return Ok((Some(t), best));
        }
    }
    Ok((None, best))
}

fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > 1e-12 * (1.0 + b.abs()) {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Classify the ω-limit set of `x0`: integrate a transient, then test for
/// an equilibrium, then for a near-recurrence handed to periodic-orbit
/// refinement. Anything else is reported as unresolved.
pub fn classify_omega<F: VectorField + ?Sized>(
    field: &F,
    x0: &[f64],
    opts: &ClassifyOptions,
) -> OmegaClassification {
    let mut progress = Diagnostics {
        integrated_time: 0.0,
        final_state: x0.to_vec(),
        field_norm: f64::NAN,
        displacement: f64::NAN,
        best_return: None,
    };
    match classify_inner(field, x0, opts, &mut progress) {
        Ok(c) => c,
        Err(e) => OmegaClassification::unresolved(e.to_string(), Some(progress)),
    }
}

/// `progress` holds the last state reached, for reporting on failure.
fn classify_inner<F: VectorField + ?Sized>(
    field: &F,
    x0: &[f64],
    opts: &ClassifyOptions,
    progress: &mut Diagnostics,
) -> crate::Result<OmegaClassification> {
    if x0.len() != field.dim() {
        return Err(crate::Error::Invalid(format!(
            "initial condition needs {} entries",
            field.dim()
        )));
    }
    let mut x = x0.to_vec();
    let mut elapsed = 0.0;
    for _ in 0..=opts.extensions {
        x = flow(field, &x, opts.transient, &opts.solver)?.final_state().to_vec();
        elapsed += opts.transient;
        progress.integrated_time = elapsed;
        progress.final_state = x.clone();
        let field_norm = linalg::norm(&field.eval_vec(&x)?);
        let probe = flow(field, &x, opts.probe_window, &opts.solver)?;
        let displacement = linalg::distance(probe.final_state(), &x);
        if field_norm < opts.eq_tol && displacement < opts.eq_tol {
            return Ok(match Equilibrium::at(field, &x) {
                Ok(eq) => OmegaClassification::Equilibrium(eq),
                Err(e) => OmegaClassification::unresolved(
                    format!("equilibrium candidate failed to polish: {e}"),
                    Some(Diagnostics {
                        integrated_time: elapsed,
                        final_state: x,
                        field_norm,
                        displacement,
                        best_return: None,
                    }),
                ),
            });
        }
        progress.field_norm = field_norm;
        progress.displacement = displacement;
        let (hit, best) = near_recurrence(field, &x, opts)?;
        progress.best_return = best;
        if let Some(t) = hit {
            return Ok(closed_orbit(field, &x, t, opts, progress.clone()));
        }
    }
    Ok(OmegaClassification::unresolved(
        "neither an equilibrium nor a near-recurrence was detected",
        Some(progress.clone()),
    ))
}

fn closed_orbit<F: VectorField + ?Sized>(
    field: &F,
    x: &[f64],
    raw_period: f64,
    opts: &ClassifyOptions,
    diagnostics: Diagnostics,
) -> OmegaClassification {
    let orbit = match refine_periodic_orbit(field, x, raw_period, &opts.refine) {
        Ok(o) => o,
        Err(e) => {
            return OmegaClassification::unresolved(
                format!("near-recurrence at t = {raw_period} but refinement failed: {e}"),
                Some(diagnostics),
            )
        }
    };
    if (orbit.period - raw_period).abs() > PERIOD_AGREEMENT * raw_period {
        return OmegaClassification::unresolved(
            format!(
                "refined period {} disagrees with the near-recurrence time {raw_period}",
                orbit.period
            ),
            Some(diagnostics),
        );
    }
    let equilibrium_distance = opts
        .equilibria
        .iter()
        .flat_map(|e| orbit.samples.iter().map(move |s| linalg::distance(s, e)))
        .reduce(f64::min);
    if let Some(d) = equilibrium_distance {
        if d <= opts.separation_tol {
            return OmegaClassification::unresolved(
                format!("refined orbit passes within {d:e} of an equilibrium"),
                Some(diagnostics),
            );
        }
    }
    OmegaClassification::ClosedOrbit {
        orbit,
        raw_period,
        equilibrium_distance,
    }
}
