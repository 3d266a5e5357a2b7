//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl Eigenvalue {
    pub fn norm(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

/// Eigenvalues of a general real matrix, sorted by real then imaginary part.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Eigenvalue> {
    let mut ev: Vec<Eigenvalue> = m
        .complex_eigenvalues()
        .iter()
        .map(|c| Eigenvalue { re: c.re, im: c.im })
        .collect();
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    ev
}

/// Largest real part of the spectrum.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m)
        .iter()
        .map(|e| e.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest eigenvalue of the symmetric part of `m`.
pub fn max_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    s.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    m.singular_values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Solve `a x = b` by LU; `None` when `a` is singular.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().lu().solve(b)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_spectrum() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let ev = eigenvalues(&m);
        assert!((ev[0].im + 1.0).abs() < 1e-14 && (ev[1].im - 1.0).abs() < 1e-14);
        assert!(spectral_abscissa(&m).abs() < 1e-14);
        assert!(max_symmetric_eigenvalue(&m).abs() < 1e-14);
    }

    #[test]
    fn singular_solve() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(solve(&a, &DVector::from_vec(vec![1.0, 1.0])).is_none());
        assert_eq!(smallest_singular_value(&a).abs() < 1e-12, true);
    }
}
