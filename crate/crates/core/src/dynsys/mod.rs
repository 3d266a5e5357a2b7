//! Vector-field representation: expressions, parsing, evaluation with exact
//! forward-mode Jacobians, the TOML config format, and the built-in systems.

mod builtin;
mod config;
mod expr;
mod field;
mod parse;
mod scalar;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

pub use builtin::{builtin_names, get_builtin, Builtin};
pub use config::{parse_config, parse_system, ConeSection, Config, SolverSection, SweepSection};
pub use expr::{BinOp, Expr, ExprDisplay, Func, Scope};
pub use field::{central_difference_jacobian, BoundSystem, VectorField};
pub use parse::parse_expr;
pub use scalar::{Dual, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-integer power {exponent} of non-positive base {base}")]
    NegativeBase { base: f64, exponent: f64 },
    #[error("non-finite value encountered")]
    NonFinite,
    #[error("parameter `{0}` is not bound")]
    UnboundParameter(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub fn at(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            column,
            message: message.into(),
        }
    }
}

/// A named autonomous system `x' = F(x; params)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemDef {
    pub name: String,
    pub state_names: Vec<String>,
    pub param_names: Vec<String>,
    pub param_defaults: Vec<Option<f64>>,
    pub components: Vec<Expr>,
}

impl SystemDef {
    /// Build a system from expression sources, one per state.
    pub fn from_sources(
        name: &str,
        states: &[&str],
        params: &[(&str, Option<f64>)],
        sources: &[&str],
    ) -> Result<Self, ParseError> {
        if sources.len() != states.len() {
            return Err(ParseError::at(
                1,
                1,
                format!(
                    "arity mismatch: {} states but {} component expressions",
                    states.len(),
                    sources.len()
                ),
            ));
        }
        let scope = Scope::new(
            states.iter().map(|s| s.to_string()).collect(),
            params.iter().map(|(p, _)| p.to_string()).collect(),
        );
        let components = sources
            .iter()
            .map(|src| parse_expr(src, &scope))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            name: name.to_string(),
            state_names: scope.states,
            param_names: scope.params,
            param_defaults: params.iter().map(|(_, v)| *v).collect(),
            components,
        })
    }

    pub fn dim(&self) -> usize {
        self.state_names.len()
    }

    pub fn scope(&self) -> Scope {
        Scope::new(self.state_names.clone(), self.param_names.clone())
    }

    /// Bind parameters: explicit `values` override the declared defaults.
    pub fn bind(&self, values: &BTreeMap<String, f64>) -> Result<BoundSystem, EvalError> {
        for k in values.keys() {
            if !self.param_names.contains(k) {
                return Err(EvalError::UnknownParameter(k.clone()));
            }
        }
        let params = self
            .param_names
            .iter()
            .zip(&self.param_defaults)
            .map(|(name, default)| {
                values
                    .get(name)
                    .copied()
                    .or(*default)
                    .ok_or_else(|| EvalError::UnboundParameter(name.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BoundSystem {
            def: self.clone(),
            params,
        })
    }

    pub fn bind_defaults(&self) -> Result<BoundSystem, EvalError> {
        self.bind(&BTreeMap::new())
    }

    pub fn eval_field(
        &self,
        state: &[f64],
        params: &BTreeMap<String, f64>,
    ) -> Result<Vec<f64>, EvalError> {
        self.bind(params)?.eval_vec(state)
    }

    pub fn jacobian(
        &self,
        state: &[f64],
        params: &BTreeMap<String, f64>,
    ) -> Result<DMatrix<f64>, EvalError> {
        self.bind(params)?.jacobian(state)
    }

    /// Render as a `[system]` config section that [`parse_system`] reads back
    /// to an identical definition.
    pub fn to_config_text(&self) -> String {
        let scope = self.scope();
        let quote = |s: &str| format!("\"{s}\"");
        let mut out = String::from("[system]\n");
        out.push_str(&format!("name = {}\n", quote(&self.name)));
        let states: Vec<String> = self.state_names.iter().map(|s| quote(s)).collect();
        out.push_str(&format!("states = [{}]\n", states.join(", ")));
        let declared: Vec<String> = self.param_names.iter().map(|s| quote(s)).collect();
        out.push_str(&format!("params = [{}]\n", declared.join(", ")));
        out.push_str("\n[system.defaults]\n");
        for (p, v) in self.param_names.iter().zip(&self.param_defaults) {
            if let Some(v) = v {
                out.push_str(&format!("{p} = {v:?}\n"));
            }
        }
        out.push_str("\n[system.equations]\n");
        for (name, c) in self.state_names.iter().zip(&self.components) {
            out.push_str(&format!("{name} = \"{}\"\n", c.display(&scope)));
        }
        out
    }
}

impl fmt::Display for SystemDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let scope = self.scope();
        for (name, c) in self.state_names.iter().zip(&self.components) {
            writeln!(f, "{name}' = {}", c.display(&scope))?;
        }
        Ok(())
    }
}

/// Axis-aligned box `lower ≤ x ≤ upper`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len(), "box bounds must have equal length");
        Self { lower, upper }
    }

    /// `|x_i| ≤ b_i` for every component.
    pub fn symmetric(bounds: &[f64]) -> Self {
        Self::new(bounds.iter().map(|b| -b).collect(), bounds.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.iter().zip(&self.upper).any(|(l, u)| l > u)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    /// The first `k` coordinates of the box.
    pub fn head(&self, k: usize) -> BoxDomain {
        BoxDomain::new(self.lower[..k].to_vec(), self.upper[..k].to_vec())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| l + (u - l) * rng.random::<f64>())
            .collect()
    }

    /// Tensor grid with `res` points per axis including both endpoints,
    /// ordered with the last coordinate varying fastest.
    pub fn grid(&self, res: usize) -> Vec<Vec<f64>> {
        let n = self.dim();
        if res == 0 || n == 0 {
            return Vec::new();
        }
        let axis = |i: usize, k: usize| -> f64 {
            if res == 1 {
                0.5 * (self.lower[i] + self.upper[i])
            } else {
                self.lower[i] + (self.upper[i] - self.lower[i]) * k as f64 / (res - 1) as f64
            }
        };
        let total = res.pow(n as u32);
        (0..total)
            .map(|mut idx| {
                let mut p = vec![0.0; n];
                for i in (0..n).rev() {
                    p[i] = axis(i, idx % res);
                    idx /= res;
                }
                p
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_covers_endpoints() {
        let b = BoxDomain::symmetric(&[4.0, 4.0, 4.0]);
        let g = b.grid(9);
        assert_eq!(g.len(), 729);
        assert_eq!(g[0], vec![-4.0, -4.0, -4.0]);
        assert_eq!(g[728], vec![4.0, 4.0, 4.0]);
        assert_eq!(g[1], vec![-4.0, -4.0, -3.0]);
    }

    #[test]
    fn bind_reports_unbound_and_unknown() {
        let sys = SystemDef::from_sources("t", &["x"], &[("a", None)], &["a*x"]).unwrap();
        assert_eq!(
            sys.bind_defaults().unwrap_err(),
            EvalError::UnboundParameter("a".into())
        );
        let mut m = BTreeMap::new();
        m.insert("b".to_string(), 1.0);
        assert!(matches!(sys.bind(&m), Err(EvalError::UnknownParameter(_))));
        let mut m = BTreeMap::new();
        m.insert("a".to_string(), 2.0);
        assert_eq!(sys.eval_field(&[3.0], &m).unwrap(), vec![6.0]);
    }

    #[test]
    fn eval_errors_surface() {
        let sys = SystemDef::from_sources("t", &["x"], &[], &["1/x"]).unwrap();
        let none = BTreeMap::new();
        assert_eq!(sys.eval_field(&[0.0], &none), Err(EvalError::DivisionByZero));
        let sys = SystemDef::from_sources("t", &["x"], &[], &["x^0.5"]).unwrap();
        assert!(matches!(
            sys.eval_field(&[-1.0], &none),
            Err(EvalError::NegativeBase { .. })
        ));
    }

    #[test]
    fn linear_jacobian_is_constant() {
        let sys = SystemDef::from_sources("rot", &["x", "y"], &[], &["-y", "x"]).unwrap();
        let none = BTreeMap::new();
        for p in [[0.0, 0.0], [3.0, -1.0]] {
            let j = sys.jacobian(&p, &none).unwrap();
            assert_eq!(j, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
        }
    }
}
