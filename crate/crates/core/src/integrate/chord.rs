use nalgebra::DMatrix;

use super::{integrate, IntegrateError, SolverOptions, Trajectory};
use crate::dynsys::{EvalError, VectorField};
use crate::error::Error;

/// 8-point Gauss–Legendre rule mapped to `[0, 1]` as `(node, weight)`.
pub fn gauss_legendre_8() -> [(f64, f64); 8] {
    const X: [f64; 4] = [
        0.183_434_642_495_649_8,
        0.525_532_409_916_329_0,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_3,
    ];
    const W: [f64; 4] = [
        0.362_683_783_378_362_0,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_5,
        0.101_228_536_290_376_3,
    ];
    let mut out = [(0.0, 0.0); 8];
    for k in 0..4 {
        out[2 * k] = (0.5 * (1.0 - X[k]), 0.5 * W[k]);
        out[2 * k + 1] = (0.5 * (1.0 + X[k]), 0.5 * W[k]);
    }
    out
}

/// `∫₀¹ DF(s·p + (1−s)·q) ds`. Degenerates to `DF(p)` when `p == q`.
pub fn chord_matrix<F: VectorField + ?Sized>(
    field: &F,
    p: &[f64],
    q: &[f64],
) -> Result<DMatrix<f64>, EvalError> {
    let n = field.dim();
    if p.len() != n || q.len() != n {
        return Err(EvalError::Dimension {
            expected: n,
            got: if p.len() != n { p.len() } else { q.len() },
        });
    }
    if p == q {
        return field.jacobian(p);
    }
    let mut acc = DMatrix::zeros(n, n);
    let mut x = vec![0.0; n];
    for (s, w) in gauss_legendre_8() {
        for i in 0..n {
            x[i] = s * p[i] + (1.0 - s) * q[i];
        }
        acc += field.jacobian(&x)? * w;
    }
    Ok(acc)
}

/// Joint solution of `p' = F(p)`, `q' = F(q)`, `U' = A^{pq}(t) U`, `U(0) = I`.
#[derive(Clone, Debug)]
pub struct ChordFlow {
    n: usize,
    traj: Trajectory,
}

impl ChordFlow {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    pub fn t_end(&self) -> f64 {
        self.traj.final_time()
    }

    pub fn p_at(&self, t: f64) -> Vec<f64> {
        self.traj.at(t)[..self.n].to_vec()
    }

    pub fn q_at(&self, t: f64) -> Vec<f64> {
        self.traj.at(t)[self.n..2 * self.n].to_vec()
    }

    pub fn u_at(&self, t: f64) -> DMatrix<f64> {
        let z = self.traj.at(t);
        DMatrix::from_column_slice(self.n, self.n, &z[2 * self.n..])
    }

    pub fn p_end(&self) -> Vec<f64> {
        self.traj.final_state()[..self.n].to_vec()
    }

    pub fn q_end(&self) -> Vec<f64> {
        self.traj.final_state()[self.n..2 * self.n].to_vec()
    }

    pub fn u_end(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.n, self.n, &self.traj.final_state()[2 * self.n..])
    }

    pub fn p0(&self) -> &[f64] {
        &self.traj.state(0)[..self.n]
    }

    pub fn q0(&self) -> &[f64] {
        &self.traj.state(0)[self.n..2 * self.n]
    }
}

/// Integrate the `(2n + n²)`-dimensional chord system over `[0, t_end]`
/// with a single adaptive stepper.
pub fn fundamental_matrix<F: VectorField + ?Sized>(
    field: &F,
    p: &[f64],
    q: &[f64],
    t_end: f64,
    opts: &SolverOptions,
) -> Result<ChordFlow, IntegrateError> {
    let n = field.dim();
    if p.len() != n || q.len() != n {
        return Err(IntegrateError::InvalidOptions(format!(
            "base points must have {n} entries"
        )));
    }
    let dim = 2 * n + n * n;
    let mut z0 = vec![0.0; dim];
    z0[..n].copy_from_slice(p);
    z0[n..2 * n].copy_from_slice(q);
    for i in 0..n {
        z0[2 * n + i * n + i] = 1.0;
    }
    let rhs = |_t: f64, z: &[f64], dz: &mut [f64]| -> Result<(), EvalError> {
        let (pq, u) = z.split_at(2 * n);
        let (pt, qt) = pq.split_at(n);
        field.eval(pt, &mut dz[..n])?;
        field.eval(qt, &mut dz[n..2 * n])?;
        let a = chord_matrix(field, pt, qt)?;
        let u = DMatrix::from_column_slice(n, n, u);
        let du = a * u;
        dz[2 * n..].copy_from_slice(du.as_slice());
        Ok(())
    };
    let traj = integrate(rhs, 0.0, &z0, t_end, &opts.extended(dim))?;
    Ok(ChordFlow { n, traj })
}

/// `Dφ_t(x)`: the fundamental matrix with coincident base points.
pub fn variational_flow<F: VectorField + ?Sized>(
    field: &F,
    x: &[f64],
    t_end: f64,
    opts: &SolverOptions,
) -> Result<ChordFlow, IntegrateError> {
    fundamental_matrix(field, x, x, t_end, opts)
}

/// `U₂(t)·U₁(s)` where `second` starts from the endpoints of `first`.
pub fn cocycle_compose(first: &ChordFlow, second: &ChordFlow, tol: f64) -> Result<DMatrix<f64>, Error> {
    if first.dim() != second.dim() {
        return Err(Error::Invalid("chord flows have different dimensions".into()));
    }
    let gap = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let dp = gap(&first.p_end(), second.p0());
    let dq = gap(&first.q_end(), second.q0());
    if dp > tol || dq > tol {
        return Err(Error::Precondition(format!(
            "base points of the second flow differ from the first flow's endpoints by {:e}",
            dp.max(dq)
        )));
    }
    Ok(second.u_end() * first.u_end())
}
