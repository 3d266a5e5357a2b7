//! Dormand–Prince 5(4) with PI step-size control and 4th-order dense output.

use super::{IntegrateError, SolverOptions, SolverStats};
use crate::dynsys::EvalError;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Evaluate the dense-output polynomial of a step at `theta ∈ [0, 1]`.
pub(crate) fn interpolate(cont: &[f64], dim: usize, theta: f64, out: &mut [f64]) {
    let theta1 = 1.0 - theta;
    for i in 0..dim {
        let r = |k: usize| cont[k * dim + i];
        out[i] = r(0) + theta * (r(1) + theta1 * (r(2) + theta * (r(3) + theta1 * r(4))));
    }
}

/// Single-direction (forward in time) adaptive stepper.
///
/// After each accepted [`Stepper::step`] the previous and current states,
/// and the dense-output coefficients between them, are available.
pub struct Stepper<R> {
    rhs: R,
    dim: usize,
    opts: SolverOptions,
    t_end: f64,
    t: f64,
    y: Vec<f64>,
    t_prev: f64,
    y_prev: Vec<f64>,
    k: [Vec<f64>; 7],
    cont: Vec<f64>,
    ytmp: Vec<f64>,
    ynew: Vec<f64>,
    h: f64,
    err_old: f64,
    last_rejected: bool,
    stats: SolverStats,
}

impl<R> Stepper<R>
where
    R: FnMut(f64, &[f64], &mut [f64]) -> Result<(), EvalError>,
{
    pub fn new(
        mut rhs: R,
        t0: f64,
        y0: &[f64],
        t_end: f64,
        opts: SolverOptions,
    ) -> Result<Self, IntegrateError> {
        opts.validate(y0.len())?;
        if !(t_end >= t0) || !t0.is_finite() || !t_end.is_finite() {
            return Err(IntegrateError::InvalidSpan { t0, t1: t_end });
        }
        if y0.iter().any(|v| !v.is_finite()) {
            return Err(IntegrateError::NonFinite { t: t0 });
        }
        let dim = y0.len();
        let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; dim]);
        rhs(t0, y0, &mut k[0]).map_err(|e| IntegrateError::from_eval(t0, e))?;
        let mut s = Self {
            rhs,
            dim,
            opts,
            t_end,
            t: t0,
            y: y0.to_vec(),
            t_prev: t0,
            y_prev: y0.to_vec(),
            k,
            cont: vec![0.0; 5 * dim],
            ytmp: vec![0.0; dim],
            ynew: vec![0.0; dim],
            h: 0.0,
            err_old: 1e-4,
            last_rejected: false,
            stats: SolverStats {
                nfev: 1,
                ..SolverStats::default()
            },
        };
        s.h = match s.opts.h_init {
            Some(h) => h,
            None => s.initial_step()?,
        };
        Ok(s)
    }

    fn tol(&self, i: usize, a: f64, b: f64) -> f64 {
        self.opts.abs_tol_for(i) + self.opts.rel_tol * a.abs().max(b.abs())
    }

    /// Starting step from Hairer, Nørsett & Wanner (II.4).
    fn initial_step(&mut self) -> Result<f64, IntegrateError> {
        let span = self.t_end - self.t;
        if span == 0.0 {
            return Ok(0.0);
        }
        let n = self.dim as f64;
        let (mut dnf, mut dny) = (0.0, 0.0);
        for i in 0..self.dim {
            let sk = self.tol(i, self.y[i], self.y[i]);
            dnf += (self.k[0][i] / sk).powi(2);
            dny += (self.y[i] / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
            1e-6
        } else {
            (dny / dnf).sqrt() * 0.01
        };
        h = h.min(self.opts.h_max).min(span);
        for i in 0..self.dim {
            self.ytmp[i] = self.y[i] + h * self.k[0][i];
        }
        let (t, ytmp) = (self.t, std::mem::take(&mut self.ytmp));
        let mut f1 = vec![0.0; self.dim];
        let res = (self.rhs)(t + h, &ytmp, &mut f1);
        self.ytmp = ytmp;
        self.stats.nfev += 1;
        if res.is_err() {
            return Ok(h * 1e-3);
        }
        let mut der2 = 0.0;
        for i in 0..self.dim {
            let sk = self.tol(i, self.y[i], self.y[i]);
            der2 += ((f1[i] - self.k[0][i]) / sk).powi(2);
        }
        let der2 = der2.sqrt() / h / n.sqrt();
        let der12 = der2.abs().max((dnf / n).sqrt());
        let h1 = if der12 <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / der12).powf(0.2)
        };
        Ok((100.0 * h).min(h1).min(self.opts.h_max).min(span))
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn t_prev(&self) -> f64 {
        self.t_prev
    }

    pub fn y_prev(&self) -> &[f64] {
        &self.y_prev
    }

    /// Derivative at the current state (first stage of the next step).
    pub fn dy(&self) -> &[f64] {
        &self.k[0]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    pub fn finished(&self) -> bool {
        self.t >= self.t_end
    }

    /// Dense-output coefficients of the last accepted step.
    pub fn cont(&self) -> &[f64] {
        &self.cont
    }

    /// Interpolate within the last accepted step.
    pub fn dense(&self, t: f64, out: &mut [f64]) {
        let h = self.t - self.t_prev;
        let theta = if h > 0.0 { (t - self.t_prev) / h } else { 1.0 };
        interpolate(&self.cont, self.dim, theta, out);
    }

    fn stage(&mut self, t: f64, idx: usize) -> Result<(), EvalError> {
        let r = (self.rhs)(t, &self.ytmp, &mut self.k[idx]);
        self.stats.nfev += 1;
        r
    }

    /// Advance by one accepted step. Returns `Ok(false)` once `t_end` is
    /// reached.
    pub fn step(&mut self) -> Result<bool, IntegrateError> {
        if self.finished() {
            return Ok(false);
        }
        let dim = self.dim;
        loop {
            if self.stats.steps + self.stats.rejected >= self.opts.max_steps {
                return Err(IntegrateError::MaxSteps {
                    t: self.t,
                    steps: self.opts.max_steps,
                });
            }
            let remaining = self.t_end - self.t;
            let mut h = self.h.min(self.opts.h_max);
            let mut last = false;
            if h >= remaining || h * 1.01 >= remaining {
                h = remaining;
                last = true;
            }
            let h_min = 1e-14 * self.t.abs().max(1.0);
            if h < h_min && !last {
                return Err(IntegrateError::StepSizeUnderflow { t: self.t, h });
            }
            let t = self.t;

            match self.attempt(t, h) {
                Ok(()) => {}
                Err(EvalError::NonFinite) | Err(EvalError::DivisionByZero) => {
                    // Trial point left the field's domain; retreat.
                    self.stats.rejected += 1;
                    self.h = 0.25 * h;
                    self.last_rejected = true;
                    if self.h < h_min {
                        return Err(IntegrateError::NonFinite { t });
                    }
                    continue;
                }
                Err(e) => return Err(IntegrateError::from_eval(t, e)),
            }

            let mut err = 0.0;
            for i in 0..dim {
                let e = h
                    * (E1 * self.k[0][i]
                        + E3 * self.k[2][i]
                        + E4 * self.k[3][i]
                        + E5 * self.k[4][i]
                        + E6 * self.k[5][i]
                        + E7 * self.k[6][i]);
                let sk = self.tol(i, self.y[i], self.ynew[i]);
                err += (e / sk).powi(2);
            }
            let err = (err / dim as f64).sqrt();
            if !err.is_finite() {
                self.stats.rejected += 1;
                self.h = 0.25 * h;
                self.last_rejected = true;
                continue;
            }

            let expo1 = 0.2 - BETA * 0.75;
            let fac11 = err.powf(expo1);
            if err <= 1.0 {
                let mut fac = fac11 / self.err_old.powf(BETA);
                fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let mut h_new = h / fac;
                if self.last_rejected {
                    h_new = h_new.min(h);
                }
                self.err_old = err.max(1e-4);
                self.accept(t, h, last);
                self.h = h_new;
                self.last_rejected = false;
                return Ok(true);
            }
            self.stats.rejected += 1;
            self.h = h / (fac11 / SAFETY).min(1.0 / FAC_MIN);
            self.last_rejected = true;
        }
    }

    fn attempt(&mut self, t: f64, h: f64) -> Result<(), EvalError> {
        let dim = self.dim;
        let y = &self.y;
        let k = &self.k;
        for i in 0..dim {
            self.ytmp[i] = y[i] + h * A21 * k[0][i];
        }
        self.stage(t + C2 * h, 1)?;
        let (y, k) = (&self.y, &self.k);
        for i in 0..dim {
            self.ytmp[i] = y[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
        }
        self.stage(t + C3 * h, 2)?;
        let (y, k) = (&self.y, &self.k);
        for i in 0..dim {
            self.ytmp[i] = y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
        }
        self.stage(t + C4 * h, 3)?;
        let (y, k) = (&self.y, &self.k);
        for i in 0..dim {
            self.ytmp[i] =
                y[i] + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
        }
        self.stage(t + C5 * h, 4)?;
        let (y, k) = (&self.y, &self.k);
        for i in 0..dim {
            self.ytmp[i] = y[i]
                + h * (A61 * k[0][i]
                    + A62 * k[1][i]
                    + A63 * k[2][i]
                    + A64 * k[3][i]
                    + A65 * k[4][i]);
        }
        self.stage(t + h, 5)?;
        let (y, k) = (&self.y, &self.k);
        for i in 0..dim {
            self.ynew[i] = y[i]
                + h * (A71 * k[0][i]
                    + A73 * k[2][i]
                    + A74 * k[3][i]
                    + A75 * k[4][i]
                    + A76 * k[5][i]);
        }
        std::mem::swap(&mut self.ytmp, &mut self.ynew);
        let r = self.stage(t + h, 6);
        std::mem::swap(&mut self.ytmp, &mut self.ynew);
        r?;
        if self.ynew.iter().any(|v| !v.is_finite()) {
            return Err(EvalError::NonFinite);
        }
        Ok(())
    }

    fn accept(&mut self, t: f64, h: f64, last: bool) {
        let dim = self.dim;
        for i in 0..dim {
            let y0 = self.y[i];
            let y1 = self.ynew[i];
            let dy = y1 - y0;
            let bspl = h * self.k[0][i] - dy;
            self.cont[i] = y0;
            self.cont[dim + i] = dy;
            self.cont[2 * dim + i] = bspl;
            self.cont[3 * dim + i] = dy - h * self.k[6][i] - bspl;
            self.cont[4 * dim + i] = h
                * (D1 * self.k[0][i]
                    + D3 * self.k[2][i]
                    + D4 * self.k[3][i]
                    + D5 * self.k[4][i]
                    + D6 * self.k[5][i]
                    + D7 * self.k[6][i]);
        }
        self.t_prev = t;
        std::mem::swap(&mut self.y_prev, &mut self.y);
        self.y.copy_from_slice(&self.ynew);
        let k7 = std::mem::take(&mut self.k[6]);
        self.k[6] = std::mem::replace(&mut self.k[0], k7);
        self.t = if last { self.t_end } else { t + h };
        self.stats.steps += 1;
    }
}
