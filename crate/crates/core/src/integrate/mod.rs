//! Adaptive integration of flows, the chord matrix `A^pq(t)` and the chord
//! fundamental matrix `U^pq(t)`.

mod chord;
mod dopri;
mod trajectory;

use serde::Serialize;
use thiserror::Error;

use crate::dynsys::{EvalError, VectorField};

pub use chord::{
    chord_matrix, cocycle_compose, fundamental_matrix, gauss_legendre_8, variational_flow,
    ChordFlow,
};
pub use dopri::Stepper;
pub use trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("non-finite state encountered at t = {t}")]
    NonFinite { t: f64 },
    #[error("field evaluation failed at t = {t}: {source}")]
    Eval { t: f64, source: EvalError },
    #[error("maximum step count {steps} exceeded at t = {t}")]
    MaxSteps { t: f64, steps: usize },
    #[error("invalid time span [{t0}, {t1}]")]
    InvalidSpan { t0: f64, t1: f64 },
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
}

impl IntegrateError {
    pub(crate) fn from_eval(t: f64, e: EvalError) -> Self {
        match e {
            EvalError::NonFinite => IntegrateError::NonFinite { t },
            source => IntegrateError::Eval { t, source },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Per-component absolute tolerances overriding `abs_tol`.
    pub abs_tol_components: Option<Vec<f64>>,
    pub max_steps: usize,
    pub h_max: f64,
    pub h_init: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            abs_tol_components: None,
            max_steps: 2_000_000,
            h_max: f64::INFINITY,
            h_init: None,
        }
    }
}

impl SolverOptions {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub(crate) fn abs_tol_for(&self, i: usize) -> f64 {
        self.abs_tol_components
            .as_ref()
            .and_then(|v| v.get(i).copied())
            .unwrap_or(self.abs_tol)
    }

    /// Tolerances for an augmented state of dimension `dim` whose leading
    /// components follow this configuration; the rest use `abs_tol`.
    pub(crate) fn extended(&self, dim: usize) -> Self {
        let mut o = self.clone();
        if let Some(v) = &self.abs_tol_components {
            let mut ext = vec![self.abs_tol; dim];
            for (e, t) in ext.iter_mut().zip(v) {
                *e = *t;
            }
            o.abs_tol_components = Some(ext);
        }
        o
    }

    fn validate(&self, dim: usize) -> Result<(), IntegrateError> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(IntegrateError::InvalidOptions(
                "rel_tol and abs_tol must be positive".into(),
            ));
        }
        if let Some(v) = &self.abs_tol_components {
            if v.len() != dim || v.iter().any(|t| !(*t > 0.0)) {
                return Err(IntegrateError::InvalidOptions(format!(
                    "abs_tol_components needs {dim} positive entries"
                )));
            }
        }
        if !(self.h_max > 0.0) {
            return Err(IntegrateError::InvalidOptions("h_max must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SolverStats {
    pub steps: usize,
    pub rejected: usize,
    pub nfev: usize,
}

/// Integrate `y' = rhs(t, y)` over `[t0, t1]`, keeping every accepted step.
pub fn integrate<R>(
    rhs: R,
    t0: f64,
    y0: &[f64],
    t1: f64,
    opts: &SolverOptions,
) -> Result<Trajectory, IntegrateError>
where
    R: FnMut(f64, &[f64], &mut [f64]) -> Result<(), EvalError>,
{
    let mut stepper = Stepper::new(rhs, t0, y0, t1, opts.clone())?;
    let mut traj = Trajectory::start(t0, y0);
    while stepper.step()? {
        traj.push_step(stepper.t(), stepper.y(), stepper.cont());
    }
    traj.stats = stepper.stats();
    Ok(traj)
}

/// The flow `φ_t(x0)` of an autonomous field for `t ∈ [0, t_end]`.
pub fn flow<F: VectorField + ?Sized>(
    field: &F,
    x0: &[f64],
    t_end: f64,
    opts: &SolverOptions,
) -> Result<Trajectory, IntegrateError> {
    if x0.len() != field.dim() {
        return Err(IntegrateError::InvalidOptions(format!(
            "initial state has {} entries, field dimension is {}",
            x0.len(),
            field.dim()
        )));
    }
    integrate(|_, y, dy| field.eval(y, dy), 0.0, x0, t_end, opts)
}
