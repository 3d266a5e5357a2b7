use nalgebra::DMatrix;

use super::scalar::Dual;
use super::{EvalError, SystemDef};

/// An autonomous vector field `x' = F(x)` on `R^n`.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError>;

    /// `DF(x)`. The default is a central difference; fields that can do
    /// better override it.
    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        central_difference_jacobian(self, x)
    }

    fn eval_vec(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut out = vec![0.0; self.dim()];
        self.eval(x, &mut out)?;
        Ok(out)
    }
}

pub fn central_difference_jacobian<F: VectorField + ?Sized>(
    field: &F,
    x: &[f64],
) -> Result<DMatrix<f64>, EvalError> {
    let n = field.dim();
    let mut jac = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for j in 0..n {
        let h = 1e-6 * (1.0 + x[j].abs());
        xp[j] = x[j] + h;
        field.eval(&xp, &mut fp)?;
        xp[j] = x[j] - h;
        field.eval(&xp, &mut fm)?;
        xp[j] = x[j];
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// A [`SystemDef`] with every parameter bound to a value.
#[derive(Clone, Debug)]
pub struct BoundSystem {
    pub def: SystemDef,
    pub params: Vec<f64>,
}

impl BoundSystem {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.def
            .param_names
            .iter()
            .position(|p| p == name)
            .map(|i| self.params[i])
    }

    pub fn eval_component(&self, i: usize, x: &[f64]) -> Result<f64, EvalError> {
        self.def.components[i].eval(x, &self.params)
    }

    /// Derivative of `F(x)` with respect to parameter `k`.
    pub fn param_derivative(&self, x: &[f64], k: usize) -> Result<Vec<f64>, EvalError> {
        let states: Vec<Dual> = x.iter().map(|&v| Dual::new(v, 0.0)).collect();
        let params: Vec<Dual> = self
            .params
            .iter()
            .enumerate()
            .map(|(i, &v)| Dual::new(v, if i == k { 1.0 } else { 0.0 }))
            .collect();
        self.def
            .components
            .iter()
            .map(|c| c.eval(&states, &params).map(|d| d.du))
            .collect()
    }
}

impl VectorField for BoundSystem {
    fn dim(&self) -> usize {
        self.def.components.len()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        if x.len() != self.dim() {
            return Err(EvalError::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        for (o, c) in out.iter_mut().zip(&self.def.components) {
            let v = c.eval(x, &self.params)?;
            if !v.is_finite() {
                return Err(EvalError::NonFinite);
            }
            *o = v;
        }
        Ok(())
    }

    /// Exact forward-mode Jacobian: one dual-number sweep per column.
    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let n = self.dim();
        if x.len() != n {
            return Err(EvalError::Dimension {
                expected: n,
                got: x.len(),
            });
        }
        let params: Vec<Dual> = self.params.iter().map(|&p| Dual::new(p, 0.0)).collect();
        let mut states: Vec<Dual> = x.iter().map(|&v| Dual::new(v, 0.0)).collect();
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            states[j].du = 1.0;
            for (i, c) in self.def.components.iter().enumerate() {
                let d = c.eval(&states, &params)?;
                if !d.du.is_finite() {
                    return Err(EvalError::NonFinite);
                }
                jac[(i, j)] = d.du;
            }
            states[j].du = 0.0;
        }
        Ok(jac)
    }
}

impl<T: VectorField + ?Sized> VectorField for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        (**self).eval(x, out)
    }
    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        (**self).jacobian(x)
    }
}

impl<T: VectorField + ?Sized> VectorField for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        (**self).eval(x, out)
    }
    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        (**self).jacobian(x)
    }
}
