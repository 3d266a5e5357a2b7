use std::io::{self, Write};

use super::dopri::interpolate;
use super::SolverStats;

/// Accepted steps of an integration with their dense-output polynomials.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    /// `5 * dim` coefficients per step; step `i` spans `times[i]..times[i+1]`.
    cont: Vec<f64>,
    pub stats: SolverStats,
}

impl Trajectory {
    pub(crate) fn start(t0: f64, y0: &[f64]) -> Self {
        Self {
            dim: y0.len(),
            times: vec![t0],
            states: y0.to_vec(),
            cont: Vec::new(),
            stats: SolverStats::default(),
        }
    }

    pub(crate) fn push_step(&mut self, t: f64, y: &[f64], cont: &[f64]) {
        self.times.push(t);
        self.states.extend_from_slice(y);
        self.cont.extend_from_slice(cont);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored samples (accepted steps + 1).
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.times
            .iter()
            .copied()
            .zip(self.states.chunks_exact(self.dim.max(1)))
    }

    pub fn initial_time(&self) -> f64 {
        self.times[0]
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has an initial sample")
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// Dense interpolation at `t`, clamped to the integrated span.
    pub fn at(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.at_into(t, &mut out);
        out
    }

    pub fn at_into(&self, t: f64, out: &mut [f64]) {
        let n = self.len();
        if n == 1 || t <= self.times[0] {
            out.copy_from_slice(self.state(0));
            return;
        }
        if t >= self.final_time() {
            out.copy_from_slice(self.final_state());
            return;
        }
        // index of the step containing t
        let i = self.times.partition_point(|&s| s <= t) - 1;
        self.interpolate_step(i, t, out);
    }

    /// Interpolate inside step `i` (between samples `i` and `i + 1`).
    pub fn interpolate_step(&self, i: usize, t: f64, out: &mut [f64]) {
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let theta = if t1 > t0 { (t - t0) / (t1 - t0) } else { 1.0 };
        let c = &self.cont[i * 5 * self.dim..(i + 1) * 5 * self.dim];
        interpolate(c, self.dim, theta, out);
    }

    /// `n` uniformly spaced samples covering the span, endpoints included.
    pub fn resample(&self, n: usize) -> Vec<(f64, Vec<f64>)> {
        let (a, b) = (self.initial_time(), self.final_time());
        match n {
            0 => Vec::new(),
            1 => vec![(b, self.final_state().to_vec())],
            _ => (0..n)
                .map(|k| {
                    let t = if k == n - 1 {
                        b
                    } else {
                        a + (b - a) * k as f64 / (n - 1) as f64
                    };
                    (t, self.at(t))
                })
                .collect(),
        }
    }

    /// The sub-trajectory from sample `start` onwards, keeping dense output.
    pub fn tail_from(&self, start: usize) -> Trajectory {
        let d = self.dim;
        Trajectory {
            dim: d,
            times: self.times[start..].to_vec(),
            states: self.states[start * d..].to_vec(),
            cont: self.cont[start * 5 * d..].to_vec(),
            stats: self.stats,
        }
    }

    /// CSV with header `t,<names>`; one row per accepted step, or `dense`
    /// uniform rows when given. Values use 17 significant digits.
    pub fn write_csv<W: Write>(
        &self,
        mut w: W,
        names: &[String],
        dense: Option<usize>,
    ) -> io::Result<()> {
        writeln!(w, "t,{}", names.join(","))?;
        let mut row = |t: f64, x: &[f64]| -> io::Result<()> {
            write!(w, "{t:.16e}")?;
            for v in x {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)
        };
        match dense {
            Some(n) => {
                for (t, x) in self.resample(n) {
                    row(t, &x)?;
                }
            }
            None => {
                for (t, x) in self.samples() {
                    row(t, x)?;
                }
            }
        }
        Ok(())
    }
}
