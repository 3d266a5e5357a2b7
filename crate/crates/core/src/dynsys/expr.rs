use std::fmt;

use super::scalar::Scalar;
use super::EvalError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            _ => None,
        }
    }
}

/// Expression tree over state variables and parameters.
///
/// States and parameters are referenced by index into the owning
/// [`Scope`]; literals are always non-negative (a leading minus is a
/// [`Expr::Neg`] node).
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    State(usize),
    Param(usize),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Names visible to an expression.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Scope {
    pub states: Vec<String>,
    pub params: Vec<String>,
}

impl Scope {
    pub fn new(states: Vec<String>, params: Vec<String>) -> Self {
        Self { states, params }
    }

    pub fn lookup(&self, name: &str) -> Option<Expr> {
        if let Some(i) = self.states.iter().position(|s| s == name) {
            return Some(Expr::State(i));
        }
        self.params.iter().position(|s| s == name).map(Expr::Param)
    }
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn add(lhs: Expr, rhs: Expr) -> Expr {
        Expr::binary(BinOp::Add, lhs, rhs)
    }

    pub fn sub(lhs: Expr, rhs: Expr) -> Expr {
        Expr::binary(BinOp::Sub, lhs, rhs)
    }

    pub fn mul(lhs: Expr, rhs: Expr) -> Expr {
        Expr::binary(BinOp::Mul, lhs, rhs)
    }

    pub fn div(lhs: Expr, rhs: Expr) -> Expr {
        Expr::binary(BinOp::Div, lhs, rhs)
    }

    /// Integer value if `self` is free of states and parameters and
    /// evaluates to an integer of modest size (e.g. `3`, `-2`, `3^2`).
    fn integer_literal(&self) -> Option<i32> {
        if !self.is_constant() {
            return None;
        }
        let v: f64 = self.eval(&[], &[]).ok()?;
        if v.fract() == 0.0 && v.abs() <= 1024.0 {
            Some(v as i32)
        } else {
            None
        }
    }

    fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::State(_) | Expr::Param(_) => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.is_constant(),
            Expr::Binary(_, l, r) => l.is_constant() && r.is_constant(),
        }
    }

    pub fn eval<S: Scalar>(&self, states: &[S], params: &[S]) -> Result<S, EvalError> {
        let v = match self {
            Expr::Num(v) => S::constant(*v),
            Expr::State(i) => states[*i],
            Expr::Param(i) => params[*i],
            Expr::Neg(a) => -a.eval(states, params)?,
            Expr::Call(f, a) => {
                let a = a.eval(states, params)?;
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                }
            }
            Expr::Binary(op, l, r) => {
                if *op == BinOp::Pow {
                    let base = l.eval(states, params)?;
                    return match r.integer_literal() {
                        Some(n) => powi(base, n),
                        None => {
                            let e = r.eval(states, params)?;
                            if base.re() <= 0.0 {
                                return Err(EvalError::NegativeBase {
                                    base: base.re(),
                                    exponent: e.re(),
                                });
                            }
                            Ok((e * base.ln()).exp())
                        }
                    };
                }
                let a = l.eval(states, params)?;
                let b = r.eval(states, params)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b.re() == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        a / b
                    }
                    BinOp::Pow => unreachable!(),
                }
            }
        };
        Ok(v)
    }

    /// Polynomial degree in the given state indices, or `None` when the
    /// expression is not polynomial in them (division by or function of
    /// such a variable, non-integer power).
    pub fn degree_in(&self, vars: &[usize]) -> Option<u32> {
        match self {
            Expr::Num(_) | Expr::Param(_) => Some(0),
            Expr::State(i) => Some(u32::from(vars.contains(i))),
            Expr::Neg(a) => a.degree_in(vars),
            Expr::Call(_, a) => (a.degree_in(vars)? == 0).then_some(0),
            Expr::Binary(op, l, r) => {
                let dl = l.degree_in(vars)?;
                match op {
                    BinOp::Add | BinOp::Sub => Some(dl.max(r.degree_in(vars)?)),
                    BinOp::Mul => Some(dl + r.degree_in(vars)?),
                    BinOp::Div => (r.degree_in(vars)? == 0).then_some(dl),
                    BinOp::Pow => match r.integer_literal() {
                        Some(n) if n >= 0 => Some(dl * n as u32),
                        Some(_) => (dl == 0).then_some(0),
                        None => (dl == 0 && r.degree_in(vars)? == 0).then_some(0),
                    },
                }
            }
        }
    }

    /// Replace each state reference `i` by `subst(i)` when it returns `Some`.
    pub fn substitute_states(&self, subst: &dyn Fn(usize) -> Option<Expr>) -> Expr {
        match self {
            Expr::State(i) => subst(*i).unwrap_or(Expr::State(*i)),
            Expr::Num(_) | Expr::Param(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute_states(subst))),
            Expr::Call(f, a) => Expr::Call(*f, Box::new(a.substitute_states(subst))),
            Expr::Binary(op, l, r) => Expr::binary(
                *op,
                l.substitute_states(subst),
                r.substitute_states(subst),
            ),
        }
    }

    /// Replace each parameter reference `i` by `subst(i)` when it returns `Some`.
    pub fn substitute_params(&self, subst: &dyn Fn(usize) -> Option<Expr>) -> Expr {
        match self {
            Expr::Param(i) => subst(*i).unwrap_or(Expr::Param(*i)),
            Expr::Num(_) | Expr::State(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute_params(subst))),
            Expr::Call(f, a) => Expr::Call(*f, Box::new(a.substitute_params(subst))),
            Expr::Binary(op, l, r) => Expr::binary(
                *op,
                l.substitute_params(subst),
                r.substitute_params(subst),
            ),
        }
    }

    /// Renumber state indices through `map` (old index -> new index).
    pub fn remap_states(&self, map: &[usize]) -> Expr {
        self.substitute_states(&|i| Some(Expr::State(map[i])))
    }

    pub fn max_state_index(&self) -> Option<usize> {
        match self {
            Expr::State(i) => Some(*i),
            Expr::Num(_) | Expr::Param(_) => None,
            Expr::Neg(a) | Expr::Call(_, a) => a.max_state_index(),
            Expr::Binary(_, l, r) => match (l.max_state_index(), r.max_state_index()) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            },
        }
    }

    pub fn display<'a>(&'a self, scope: &'a Scope) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, scope }
    }

    fn literal(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            Expr::Neg(a) => a.literal().map(|v| -v),
            _ => None,
        }
    }

    fn from_value(v: f64) -> Expr {
        if v < 0.0 {
            Expr::Neg(Box::new(Expr::Num(-v)))
        } else {
            Expr::Num(v + 0.0)
        }
    }

    /// Constant folding plus the identities `0 + e`, `e − 0`, `1·e`, `0·e`,
    /// `e / 1` and `−(−e)`. Evaluation results are unchanged wherever the
    /// original is finite.
    pub fn simplify(&self) -> Expr {
        match self {
            Expr::Num(_) | Expr::State(_) | Expr::Param(_) => self.clone(),
            Expr::Neg(a) => {
                let a = a.simplify();
                match a {
                    Expr::Neg(inner) => *inner,
                    Expr::Num(v) if v == 0.0 => Expr::Num(0.0),
                    other => Expr::Neg(Box::new(other)),
                }
            }
            Expr::Call(f, a) => Expr::Call(*f, Box::new(a.simplify())),
            Expr::Binary(op, l, r) => {
                let (l, r) = (l.simplify(), r.simplify());
                let (lv, rv) = (l.literal(), r.literal());
                if let (Some(a), Some(b), true) = (lv, rv, *op != BinOp::Pow) {
                    let v = match op {
                        BinOp::Add => a + b,
                        BinOp::Sub => a - b,
                        BinOp::Mul => a * b,
                        _ if b != 0.0 => a / b,
                        _ => return Expr::binary(*op, l, r),
                    };
                    return Expr::from_value(v);
                }
                match (op, lv, rv) {
                    (BinOp::Add, Some(z), _) if z == 0.0 => r,
                    (BinOp::Add | BinOp::Sub, _, Some(z)) if z == 0.0 => l,
                    (BinOp::Sub, Some(z), _) if z == 0.0 => Expr::Neg(Box::new(r)).simplify(),
                    (BinOp::Mul, Some(z), _) | (BinOp::Mul, _, Some(z)) if z == 0.0 => {
                        Expr::Num(0.0)
                    }
                    (BinOp::Mul, Some(o), _) if o == 1.0 => r,
                    (BinOp::Mul | BinOp::Div, _, Some(o)) if o == 1.0 => l,
                    (BinOp::Mul, Some(o), _) if o == -1.0 => Expr::Neg(Box::new(r)).simplify(),
                    (BinOp::Mul | BinOp::Div, _, Some(o)) if o == -1.0 => {
                        Expr::Neg(Box::new(l)).simplify()
                    }
                    _ => Expr::binary(*op, l, r),
                }
            }
        }
    }

    /// Write `self = coef·x_var + rest` with `coef`, `rest` free of `x_var`.
    /// `None` when the expression is not affine in that state.
    pub fn affine_split(&self, var: usize) -> Option<(Expr, Expr)> {
        if self.degree_in(&[var])? == 0 {
            return Some((Expr::Num(0.0), self.clone()));
        }
        let (c, r) = match self {
            Expr::State(i) if *i == var => (Expr::Num(1.0), Expr::Num(0.0)),
            Expr::Neg(a) => {
                let (c, r) = a.affine_split(var)?;
                (Expr::Neg(Box::new(c)), Expr::Neg(Box::new(r)))
            }
            Expr::Binary(op @ (BinOp::Add | BinOp::Sub), l, rr) => {
                let (cl, rl) = l.affine_split(var)?;
                let (cr, rr) = rr.affine_split(var)?;
                (Expr::binary(*op, cl, cr), Expr::binary(*op, rl, rr))
            }
            Expr::Binary(BinOp::Mul, l, rr) => {
                // exactly one factor depends on the variable (degree ≤ 1)
                if l.degree_in(&[var])? == 0 {
                    let (c, r) = rr.affine_split(var)?;
                    (Expr::mul((**l).clone(), c), Expr::mul((**l).clone(), r))
                } else {
                    let (c, r) = l.affine_split(var)?;
                    (Expr::mul(c, (**rr).clone()), Expr::mul(r, (**rr).clone()))
                }
            }
            Expr::Binary(BinOp::Div, l, rr) => {
                let (c, r) = l.affine_split(var)?;
                (Expr::div(c, (**rr).clone()), Expr::div(r, (**rr).clone()))
            }
            Expr::Binary(BinOp::Pow, l, rr) if rr.integer_literal() == Some(1) => {
                l.affine_split(var)?
            }
            _ => return None,
        };
        Some((c.simplify(), r.simplify()))
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Binary(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }
}

/// Exponentiation by repeated squaring; negative powers invert the result.
fn powi<S: Scalar>(base: S, n: i32) -> Result<S, EvalError> {
    let mut acc = S::constant(1.0);
    let mut sq = base;
    let mut k = n.unsigned_abs();
    while k > 0 {
        if k & 1 == 1 {
            acc = acc * sq;
        }
        k >>= 1;
        if k > 0 {
            sq = sq * sq;
        }
    }
    if n < 0 {
        if acc.re() == 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        acc = S::constant(1.0) / acc;
    }
    Ok(acc)
}

/// Minimal-parenthesis printer whose output re-parses to the same tree.
pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    scope: &'a Scope,
}

impl ExprDisplay<'_> {
    fn child<'b>(&'b self, e: &'b Expr, paren: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = ExprDisplay {
            expr: e,
            scope: self.scope,
        };
        if paren {
            write!(f, "({d})")
        } else {
            write!(f, "{d}")
        }
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.expr {
            Expr::Num(v) if v.fract() == 0.0 && v.abs() < 1e15 => write!(f, "{}", *v as i64),
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::State(i) => f.write_str(&self.scope.states[*i]),
            Expr::Param(i) => f.write_str(&self.scope.params[*i]),
            Expr::Neg(a) => {
                f.write_str("-")?;
                self.child(a, a.precedence() < 3, f)
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                self.child(a, false, f)?;
                f.write_str(")")
            }
            Expr::Binary(op, l, r) => {
                let (sym, lp, rp) = match op {
                    BinOp::Add => (" + ", l.precedence() < 1, r.precedence() <= 1),
                    BinOp::Sub => (" - ", l.precedence() < 1, r.precedence() <= 1),
                    BinOp::Mul => ("*", l.precedence() < 2, r.precedence() <= 2),
                    BinOp::Div => ("/", l.precedence() < 2, r.precedence() <= 2),
                    BinOp::Pow => ("^", l.precedence() <= 4, r.precedence() < 3),
                };
                self.child(l, lp, f)?;
                f.write_str(sym)?;
                self.child(r, rp, f)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::scalar::Dual;

    #[test]
    fn integer_powers_use_multiplication() {
        let e = Expr::binary(BinOp::Pow, Expr::State(0), Expr::Num(3.0));
        assert_eq!(e.eval(&[-2.0], &[]).unwrap(), -8.0);
        let inv = Expr::binary(
            BinOp::Pow,
            Expr::State(0),
            Expr::Neg(Box::new(Expr::Num(2.0))),
        );
        assert_eq!(inv.eval(&[2.0], &[]).unwrap(), 0.25);
        assert!(matches!(
            inv.eval(&[0.0], &[]),
            Err(EvalError::DivisionByZero)
        ));
    }

    #[test]
    fn real_power_rejects_non_positive_base() {
        let e = Expr::binary(BinOp::Pow, Expr::State(0), Expr::Num(0.5));
        assert!((e.eval(&[4.0], &[]).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(
            e.eval(&[-4.0], &[]),
            Err(EvalError::NegativeBase { .. })
        ));
    }

    #[test]
    fn dual_power_derivative() {
        let e = Expr::binary(BinOp::Pow, Expr::State(0), Expr::Num(2.5));
        let d = e.eval(&[Dual::variable(4.0)], &[]).unwrap();
        assert!((d.du - 2.5 * 4f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn degree_detects_affine_dependence() {
        // -w + x*w^0 ... built by hand: -w + x + y*x^2
        let w = 3;
        let e = Expr::add(
            Expr::Neg(Box::new(Expr::State(w))),
            Expr::mul(Expr::State(1), Expr::binary(BinOp::Pow, Expr::State(0), Expr::Num(2.0))),
        );
        assert_eq!(e.degree_in(&[w]), Some(1));
        let sq = Expr::binary(BinOp::Pow, Expr::State(w), Expr::Num(2.0));
        assert_eq!(sq.degree_in(&[w]), Some(2));
        let quot = Expr::div(Expr::Num(1.0), Expr::State(w));
        assert_eq!(quot.degree_in(&[w]), None);
    }
}
