use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::dynsys::{BoxDomain, VectorField};
use crate::error::{Error, Result};
use crate::linalg::{self, Eigenvalue};

/// Largest accepted `‖F‖` at a reported equilibrium.
pub const EQUILIBRIUM_RESIDUAL: f64 = 1e-11;
/// Roots closer than this are the same equilibrium.
pub const DEDUP_DISTANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Equilibrium {
    pub point: Vec<f64>,
    /// Jacobian eigenvalues, sorted by real part.
    pub eigenvalues: Vec<Eigenvalue>,
    pub residual: f64,
}

impl Equilibrium {
    /// Polish `x` with Newton and attach its spectrum.
    pub fn at<F: VectorField + ?Sized>(field: &F, x: &[f64]) -> Result<Self> {
        let point = newton_root(field, x, 50)?;
        let residual = linalg::norm(&field.eval_vec(&point)?);
        if !(residual <= EQUILIBRIUM_RESIDUAL) {
            return Err(Error::NoConvergence(format!(
                "equilibrium residual {residual:e} above {EQUILIBRIUM_RESIDUAL:e}"
            )));
        }
        Ok(Self {
            eigenvalues: linalg::eigenvalues(&field.jacobian(&point)?),
            point,
            residual,
        })
    }

    pub fn is_stable(&self) -> bool {
        self.eigenvalues.iter().all(|e| e.re < 0.0)
    }
}

/// Damped Newton for `F(x) = 0` with backtracking on `‖F‖`.
pub fn newton_root<F: VectorField + ?Sized>(field: &F, x0: &[f64], max_iter: usize) -> Result<Vec<f64>> {
    let mut x = x0.to_vec();
    let mut fx = field.eval_vec(&x)?;
    let mut r = linalg::norm(&fx);
    for _ in 0..max_iter {
        if r <= 1e-14 {
            return Ok(x);
        }
        let j: DMatrix<f64> = field.jacobian(&x)?;
        let step = linalg::solve(&j, &(-DVector::from_column_slice(&fx)))
            .ok_or_else(|| Error::Singular("Jacobian at Newton iterate".into()))?;
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + alpha * d).collect();
            let ft = field.eval_vec(&trial)?;
            let rt = linalg::norm(&ft);
            if rt.is_finite() && (rt < r || alpha < 1e-3) {
                let moved = alpha * step.norm();
                x = trial;
                fx = ft;
                r = rt;
                if moved <= 1e-15 * (1.0 + linalg::norm(&x)) {
                    return Ok(x);
                }
                break;
            }
            alpha *= 0.5;
        }
    }
    if r <= EQUILIBRIUM_RESIDUAL {
        Ok(x)
    } else {
        Err(Error::NoConvergence(format!(
            "Newton stalled at residual {r:e} after {max_iter} iterations"
        )))
    }
}

/// Equilibria inside `domain` reached by Newton from a `res`-per-axis grid.
/// Non-convergent seeds are dropped; the result is sorted lexicographically.
pub fn find_equilibria<F: VectorField + ?Sized>(
    field: &F,
    domain: &BoxDomain,
    res: usize,
) -> Result<Vec<Equilibrium>> {
    if domain.is_empty() || res == 0 {
        return Err(Error::Invalid("equilibrium search needs a nonempty box".into()));
    }
    if domain.dim() != field.dim() {
        return Err(Error::Invalid("box dimension differs from the field".into()));
    }
    let roots: Vec<Option<Vec<f64>>> = domain
        .grid(res)
        .par_iter()
        .map(|seed| {
            newton_root(field, seed, 60)
                .ok()
                .filter(|x| domain.contains(x))
        })
        .collect();
    let mut unique: Vec<Vec<f64>> = Vec::new();
    for x in roots.into_iter().flatten() {
        if unique.iter().all(|u| linalg::distance(u, &x) > DEDUP_DISTANCE) {
            unique.push(x);
        }
    }
    let mut out = unique
        .iter()
        .filter_map(|x| Equilibrium::at(field, x).ok())
        .collect::<Vec<_>>();
    out.sort_by(|a, b| {
        a.point
            .iter()
            .zip(&b.point)
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{get_builtin, SystemDef};

    #[test]
    fn logistic_roots() {
        let f = SystemDef::from_sources("l", &["x"], &[], &["x*(1-x)"])
            .unwrap()
            .bind_defaults()
            .unwrap();
        let eq = find_equilibria(&f, &BoxDomain::symmetric(&[2.0]), 9).unwrap();
        let pts: Vec<f64> = eq.iter().map(|e| e.point[0]).collect();
        assert_eq!(pts.len(), 2);
        assert!(pts[0].abs() < 1e-14 && (pts[1] - 1.0).abs() < 1e-14);
        assert!(!eq[0].is_stable() && eq[1].is_stable());
    }

    #[test]
    fn limit_system_has_only_the_origin() {
        let f = get_builtin("paper-3d-limit").unwrap().system.bind_defaults().unwrap();
        let eq = find_equilibria(&f, &BoxDomain::symmetric(&[4.0; 3]), 7).unwrap();
        assert_eq!(eq.len(), 1);
        assert!(linalg::norm(&eq[0].point) < 1e-12);
        let ev = &eq[0].eigenvalues;
        assert!((ev[0].re + 1.0).abs() < 1e-12 && ev[0].im.abs() < 1e-12);
        assert!((ev[1].re - 1.0).abs() < 1e-12 && (ev[1].im + 1.0).abs() < 1e-12);
        assert!((ev[2].re - 1.0).abs() < 1e-12 && (ev[2].im - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_box_rejected() {
        let f = SystemDef::from_sources("l", &["x"], &[], &["x"]).unwrap().bind_defaults().unwrap();
        let b = BoxDomain::new(vec![1.0], vec![0.0]);
        assert!(find_equilibria(&f, &b, 3).is_err());
    }
}
