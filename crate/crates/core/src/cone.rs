//! Quadratic cones `C = {ξ : ⟨Pξ, ξ⟩ ≤ 0}` of rank k and the complementary
//! convex cone `K = {ξ : ⟨Pξ, ξ⟩ ≥ 0, ⟨ξ, v₊⟩ ≥ 0}`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

/// Default relative margin for [`QuadraticCone::contains`].
pub const DEFAULT_MARGIN: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConeError {
    #[error("cone matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("cone matrix is not symmetric (asymmetry {asymmetry:e} > {tol:e})")]
    NotSymmetric { asymmetry: f64, tol: f64 },
    #[error("cone matrix is degenerate: eigenvalue {eigenvalue:e} within {tol:e} of zero")]
    Degenerate { eigenvalue: f64, tol: f64 },
    #[error("dimension mismatch: cone is {expected}-dimensional, vector has {got} entries")]
    Dimension { expected: usize, got: usize },
    #[error("v_plus is not an eigenvector of P for a positive eigenvalue (residual {residual:e})")]
    NotPositiveEigenvector { residual: f64 },
    #[error("no {0:?} directions exist for this cone")]
    EmptyStratum(Stratum),
    #[error("requested zero directions")]
    ZeroCount,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Stratum {
    Boundary,
    Interior,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Position {
    Interior,
    Boundary,
    Exterior,
}

/// Membership classification together with the raw form value `q(ξ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConePosition {
    pub position: Position,
    pub q: f64,
}

impl ConePosition {
    /// In `C` (interior or boundary).
    pub fn in_cone(&self) -> bool {
        self.position != Position::Exterior
    }
}

#[derive(Clone, Debug)]
pub struct QuadraticCone {
    p: DMatrix<f64>,
    tol_sym: f64,
    tol_zero: f64,
    /// Ascending eigenvalues with matching eigenvector columns.
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl QuadraticCone {
    /// Validate `p` with default tolerances: symmetry `1e-12·max(1,‖P‖)` and
    /// degeneracy `1e-9·‖P‖`.
    pub fn new(p: DMatrix<f64>) -> Result<Self, ConeError> {
        let scale = p.amax().max(1.0);
        Self::with_tolerances(p, 1e-12 * scale, None)
    }

    pub fn with_tolerances(
        p: DMatrix<f64>,
        tol_sym: f64,
        tol_zero: Option<f64>,
    ) -> Result<Self, ConeError> {
        if p.nrows() != p.ncols() {
            return Err(ConeError::NotSquare {
                rows: p.nrows(),
                cols: p.ncols(),
            });
        }
        let asymmetry = (&p - p.transpose()).amax();
        if asymmetry > tol_sym {
            return Err(ConeError::NotSymmetric {
                asymmetry,
                tol: tol_sym,
            });
        }
        let sym = (&p + p.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let eigenvectors = DMatrix::from_fn(p.nrows(), p.ncols(), |r, c| {
            eig.eigenvectors[(r, order[c])]
        });
        let norm = eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol_zero = tol_zero.unwrap_or(1e-9 * norm);
        if let Some(&ev) = eigenvalues.iter().find(|v| v.abs() <= tol_zero) {
            return Err(ConeError::Degenerate {
                eigenvalue: ev,
                tol: tol_zero,
            });
        }
        Ok(Self {
            p: sym,
            tol_sym,
            tol_zero,
            eigenvalues,
            eigenvectors,
        })
    }

    /// Row-major `n²` entries, as in the config file.
    pub fn from_row_major(n: usize, entries: &[f64]) -> Result<Self, ConeError> {
        if entries.len() != n * n {
            return Err(ConeError::Dimension {
                expected: n * n,
                got: entries.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, n, entries))
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn tol_sym(&self) -> f64 {
        self.tol_sym
    }

    pub fn tol_zero(&self) -> f64 {
        self.tol_zero
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors of `P` as columns, matching [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Negative index of inertia of `P`: the dimension of the largest linear
    /// subspace contained in `C`.
    pub fn rank(&self) -> usize {
        self.eigenvalues.iter().filter(|&&v| v < 0.0).count()
    }

    /// The same cone with `P` scaled by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(&self.p * factor).expect("positive scaling preserves validity")
    }

    fn check_dim(&self, xi: &[f64]) -> Result<(), ConeError> {
        if xi.len() != self.dim() {
            return Err(ConeError::Dimension {
                expected: self.dim(),
                got: xi.len(),
            });
        }
        Ok(())
    }

    /// `ξᵀPξ`.
    pub fn quadratic_form(&self, xi: &[f64]) -> Result<f64, ConeError> {
        self.check_dim(xi)?;
        Ok(self.q_unchecked(xi))
    }

    fn q_unchecked(&self, xi: &[f64]) -> f64 {
        let n = self.dim();
        let mut q = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += self.p[(i, j)] * xi[j];
            }
            q += xi[i] * row;
        }
        q
    }

    /// Relative evaluation error bound of `q(ξ)/‖ξ‖²`.
    fn roundoff(&self) -> f64 {
        4.0 * self.dim() as f64 * f64::EPSILON * self.p.amax()
    }

    /// Interior iff `q < −margin·‖ξ‖²`, exterior iff `q > margin·‖ξ‖²`.
    /// The margin is floored at the rounding error of evaluating `q`, so a
    /// zero margin means "exact up to roundoff".
    pub fn contains(&self, xi: &[f64], margin: f64) -> Result<ConePosition, ConeError> {
        self.check_dim(xi)?;
        let q = self.q_unchecked(xi);
        let scale = margin.max(self.roundoff()) * xi.iter().map(|v| v * v).sum::<f64>();
        let position = if q < -scale {
            Position::Interior
        } else if q > scale {
            Position::Exterior
        } else {
            Position::Boundary
        };
        Ok(ConePosition { position, q })
    }

    /// `q(ξ)/‖ξ‖²`, or 0 for the zero vector.
    pub fn normalized_form(&self, xi: &[f64]) -> Result<f64, ConeError> {
        let q = self.quadratic_form(xi)?;
        let nrm2: f64 = xi.iter().map(|v| v * v).sum();
        Ok(if nrm2 > 0.0 { q / nrm2 } else { 0.0 })
    }

    fn validate_v_plus(&self, v_plus: &[f64]) -> Result<(), ConeError> {
        self.check_dim(v_plus)?;
        let v = DVector::from_column_slice(v_plus);
        let vv = v.dot(&v);
        if vv == 0.0 {
            return Err(ConeError::NotPositiveEigenvector {
                residual: f64::INFINITY,
            });
        }
        let pv = &self.p * &v;
        let lambda = v.dot(&pv) / vv;
        let residual = (&pv - &v * lambda).norm();
        let tol = 1e-8 * self.p.norm().max(1.0) * vv.sqrt();
        if lambda <= 0.0 || residual > tol {
            return Err(ConeError::NotPositiveEigenvector { residual });
        }
        Ok(())
    }

    /// Membership in `K = {ξ : q(ξ) ≥ 0, ⟨ξ, v₊⟩ ≥ 0}`.
    pub fn competitive_cone_contains(&self, v_plus: &[f64], xi: &[f64]) -> Result<bool, ConeError> {
        self.validate_v_plus(v_plus)?;
        self.check_dim(xi)?;
        let dot: f64 = xi.iter().zip(v_plus).map(|(a, b)| a * b).sum();
        Ok(self.q_unchecked(xi) >= 0.0 && dot >= 0.0)
    }

    /// Seeded unit directions on the boundary (`|q| ≤ 1e-12`) or strictly
    /// inside the cone.
    pub fn sample_directions(
        &self,
        count: usize,
        stratum: Stratum,
        seed: u64,
    ) -> Result<Vec<Vec<f64>>, ConeError> {
        if count == 0 {
            return Err(ConeError::ZeroCount);
        }
        let k = self.rank();
        let n = self.dim();
        let empty = match stratum {
            Stratum::Interior => k == 0,
            Stratum::Boundary => k == 0 || k == n,
        };
        if empty {
            return Err(ConeError::EmptyStratum(stratum));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let candidate = match stratum {
                Stratum::Boundary => self.project_to_boundary(&g),
                Stratum::Interior => {
                    let shrink: f64 = rand::Rng::random(&mut rng);
                    self.shrink_to_interior(&g, shrink)
                }
            };
            let Some(v) = candidate.and_then(normalize) else {
                continue;
            };
            let q = self.q_unchecked(&v);
            let ok = match stratum {
                Stratum::Boundary => q.abs() <= 1e-12,
                Stratum::Interior => q < -DEFAULT_MARGIN,
            };
            if ok {
                out.push(v);
            }
        }
        Ok(out)
    }

    /// Newton along the `P`-gradient: solve `q(ξ + αPξ) = 0` for `α`.
    fn project_to_boundary(&self, start: &[f64]) -> Option<Vec<f64>> {
        let xi = DVector::from_column_slice(&normalize(start.to_vec())?);
        let dir = &self.p * &xi;
        let mut alpha = 0.0;
        for _ in 0..60 {
            let x = &xi + &dir * alpha;
            let px = &self.p * &x;
            let q = x.dot(&px);
            if q.abs() <= 1e-15 * x.norm_squared() {
                return Some(x.iter().copied().collect());
            }
            let dq = 2.0 * px.dot(&dir);
            if dq == 0.0 || !dq.is_finite() {
                return None;
            }
            alpha -= q / dq;
        }
        let x = &xi + &dir * alpha;
        Some(x.iter().copied().collect())
    }

    /// Scale the positive-eigenspace part of `g` so that `q` is negative:
    /// `q(t) = N + t²·Pos` with `t = shrink·sqrt(−N/Pos)`.
    fn shrink_to_interior(&self, g: &[f64], shrink: f64) -> Option<Vec<f64>> {
        let g = DVector::from_column_slice(g);
        let coords = self.eigenvectors.transpose() * g;
        let (mut neg, mut pos) = (0.0, 0.0);
        for (c, l) in coords.iter().zip(&self.eigenvalues) {
            if *l < 0.0 {
                neg += l * c * c;
            } else {
                pos += l * c * c;
            }
        }
        if neg >= 0.0 {
            return None;
        }
        let t = if pos > 0.0 {
            shrink * (-neg / pos).sqrt()
        } else {
            1.0
        };
        let scaled = DVector::from_iterator(
            coords.len(),
            coords
                .iter()
                .zip(&self.eigenvalues)
                .map(|(c, l)| if *l < 0.0 { *c } else { c * t }),
        );
        Some((&self.eigenvectors * scaled).iter().copied().collect())
    }
}

fn normalize(v: Vec<f64>) -> Option<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (n > 1e-12 && n.is_finite()).then(|| v.into_iter().map(|x| x / n).collect())
}
