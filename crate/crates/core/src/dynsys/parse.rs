//! Recursive-descent parser for field expressions.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := NUMBER | IDENT | FUNC '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus, so `-x^2` is `-(x^2)`, and is
//! right-associative through the `unary` operand.

use super::expr::{BinOp, Expr, Func, Scope};
use super::ParseError;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

struct Lexed {
    tok: Tok,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Lexed>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let col = i + 1;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let v: f64 = text
                .parse()
                .map_err(|_| ParseError::at(1, col, format!("malformed number `{text}`")))?;
            out.push(Lexed {
                tok: Tok::Num(v),
                col,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Lexed {
                tok: Tok::Ident(src[start..i].to_string()),
                col,
            });
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => return Err(ParseError::at(1, col, format!("unexpected character `{c}`"))),
            };
            out.push(Lexed { tok, col });
            i += 1;
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Lexed>,
    pos: usize,
    end_col: usize,
    scope: &'a Scope,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|l| &l.tok)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |l| l.col)
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::at(1, self.col(), msg)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::binary(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn expect_rparen(&mut self, open_col: usize) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::RParen) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(format!(
                "unbalanced parenthesis: `(` at column {open_col} is never closed"
            ))),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let col = self.col();
        let tok = match self.toks.get(self.pos) {
            Some(l) => l.tok.clone(),
            None => return Err(self.err("unexpected end of expression")),
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect_rparen(col)?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    if self.peek() != Some(&Tok::LParen) {
                        return Err(ParseError::at(
                            1,
                            col,
                            format!("function `{name}` must be followed by `(`"),
                        ));
                    }
                    let open = self.col();
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_rparen(open)?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                self.scope.lookup(&name).ok_or_else(|| {
                    ParseError::at(1, col, format!("undeclared identifier `{name}`"))
                })
            }
            Tok::RParen => Err(ParseError::at(1, col, "unbalanced parenthesis: unexpected `)`")),
            Tok::Op(c) => Err(ParseError::at(1, col, format!("unexpected operator `{c}`"))),
        }
    }
}

/// Parse a single expression against `scope`. Columns in errors are
/// 1-based byte offsets into `src`; the line is always 1.
pub fn parse_expr(src: &str, scope: &Scope) -> Result<Expr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end_col: src.len() + 1,
        scope,
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        let msg = match p.peek() {
            Some(Tok::RParen) => "unbalanced parenthesis: unexpected `)`".to_string(),
            _ => "unexpected trailing input".to_string(),
        };
        return Err(p.err(msg));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xyz() -> Scope {
        Scope::new(
            vec!["x".into(), "y".into(), "z".into(), "w".into()],
            vec!["eps".into()],
        )
    }

    #[test]
    fn evaluates_first_component_without_eps_term() {
        let e = parse_expr("x - y - 1.5*x*z^2", &xyz()).unwrap();
        let v = e.eval(&[1.0, 1.0, 1.0, 0.0], &[0.0]).unwrap();
        assert_eq!(v, -1.5);
    }

    #[test]
    fn full_first_component_at_fig1_point() {
        let e = parse_expr(
            "x - y - 1.5*x*z^2 - 0.5*x*(x^2+y^2) + eps*x*w",
            &xyz(),
        )
        .unwrap();
        // 2 - 2 - 27 - 8 + 1.2, evaluated by hand
        let v = e.eval(&[2.0, 2.0, 3.0, 12.0], &[0.05]).unwrap();
        assert!((v - (-33.8)).abs() < 1e-12, "{v}");
    }

    #[test]
    fn unbalanced_parenthesis_reports_position() {
        let err = parse_expr("x + (y", &xyz()).unwrap_err();
        assert!(err.message.contains("unbalanced"), "{err}");
        assert_eq!(err.line, 1);
        assert_eq!(err.column, 7);
        let err = parse_expr("x + y)", &xyz()).unwrap_err();
        assert!(err.message.contains("unbalanced"));
        assert_eq!(err.column, 6);
    }

    #[test]
    fn undeclared_identifier() {
        let err = parse_expr("x + q", &xyz()).unwrap_err();
        assert!(err.message.contains("undeclared identifier `q`"));
        assert_eq!(err.column, 5);
    }

    #[test]
    fn precedence_and_associativity() {
        let s = xyz();
        let at = |src: &str| parse_expr(src, &s).unwrap().eval(&[2.0, 3.0, 4.0, 0.0], &[0.0]).unwrap();
        assert_eq!(at("-x^2"), -4.0);
        assert_eq!(at("x^-1"), 0.5);
        assert_eq!(at("2^3^2"), 512.0);
        assert_eq!(at("z/x/x"), 1.0);
        assert_eq!(at("z - y - x"), -1.0);
        assert_eq!(at("x*-y"), -6.0);
        assert_eq!(at("2*x + y*z"), 16.0);
        assert_eq!(at("(-x)^2"), 4.0);
        assert!((at("exp(0) + sin(0)*cos(x)") - 1.0).abs() < 1e-15);
        assert_eq!(at("1.5e1 + 2E-1"), 15.2);
    }

    #[test]
    fn printer_round_trips_tricky_shapes() {
        let s = xyz();
        for src in [
            "-x^2",
            "(-x)^2",
            "x^-y^2",
            "(x^y)^z",
            "x - (y - z)",
            "x/(y*z)",
            "--x",
            "x - -y",
            "-(x + y)*z",
            "sin(x + 1e-300)*1e300",
        ] {
            let e = parse_expr(src, &s).unwrap();
            let printed = e.display(&s).to_string();
            let back = parse_expr(&printed, &s).unwrap();
            assert_eq!(e, back, "{src} -> {printed}");
        }
    }
}
