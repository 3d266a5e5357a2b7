//! TOML run configuration.
//!
//! ```toml
//! [system]
//! name = "paper-4d"
//! states = ["x", "y", "z", "w"]
//! params = ["eps"]
//! fast = ["w"]                 # optional; trailing states that are fast
//!
//! [system.defaults]
//! eps = 0.05
//!
//! [system.equations]           # for fast states: g in  eps*w' = g
//! x = "x - y - 1.5*x*z^2 - 0.5*x*(x^2 + y^2) + eps*x*w"
//! y = "x + y - 1.5*y*z^2 - 0.5*y*(x^2 + y^2) + eps*y*w"
//! z = "-z - 0.5*z^3 - 1.5*z*(x^2 + y^2) + eps*z*w"
//! w = "-w + x + y + z"
//!
//! [cone]
//! matrix = [-1, 0, 0,  0, -1, 0,  0, 0, 1]   # row-major, n*n entries
//! v_plus = [0, 0, 1]
//!
//! [domain]
//! bounds = [4, 4, 4, 16]       # |x_i| <= b_i, or give lower/upper
//!
//! [solver]
//! rel_tol = 1e-9
//! abs_tol = 1e-12
//!
//! [sweep]
//! n = 200
//! seed = 42
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use super::expr::{Func, Scope};
use super::parse::parse_expr;
use super::{BoxDomain, ParseError, SystemDef};
use crate::slowfast::SlowFastSystem;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: RawSystem,
    cone: Option<ConeSection>,
    domain: Option<RawDomain>,
    #[serde(default)]
    solver: SolverSection,
    #[serde(default)]
    sweep: SweepSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    name: Option<String>,
    states: Vec<String>,
    #[serde(default)]
    params: Vec<String>,
    #[serde(default)]
    fast: Vec<String>,
    #[serde(default)]
    defaults: BTreeMap<String, f64>,
    equations: BTreeMap<String, Spanned<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    bounds: Option<Vec<f64>>,
    lower: Option<Vec<f64>>,
    upper: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConeSection {
    pub matrix: Vec<f64>,
    pub v_plus: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub n: usize,
    pub seed: u64,
    pub transient: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            n: 200,
            seed: 42,
            transient: 50.0,
        }
    }
}

/// Parsed configuration file.
#[derive(Clone, Debug)]
pub struct Config {
    /// The full field in slow time (fast components divided by `eps`).
    pub system: SystemDef,
    pub slow_fast: Option<SlowFastSystem>,
    pub cone: Option<ConeSection>,
    pub domain: Option<BoxDomain>,
    pub solver: SolverSection,
    pub sweep: SweepSection,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |nl| before.len() - nl - 1) + 1;
    (line, col)
}

fn toml_error(text: &str, err: toml::de::Error) -> ParseError {
    let (line, column) = err
        .span()
        .map_or((1, 1), |span| line_col(text, span.start));
    ParseError::at(line, column, err.message().to_string())
}

fn check_identifier(name: &str) -> Result<(), String> {
    let mut chars = name.chars();
    let ok = matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
    if !ok {
        return Err(format!("`{name}` is not a valid identifier"));
    }
    if Func::from_name(name).is_some() {
        return Err(format!("`{name}` is a reserved function name"));
    }
    Ok(())
}

/// Parse the `[system]` section of `text` (other sections are ignored).
/// Fast states are converted to slow time.
pub fn parse_system(text: &str) -> Result<SystemDef, ParseError> {
    #[derive(Deserialize)]
    struct Loose {
        system: RawSystem,
    }
    let loose: Loose = toml::from_str(text).map_err(|e| toml_error(text, e))?;
    let (def, n_fast) = build_system(text, loose.system)?;
    if n_fast == 0 {
        return Ok(def);
    }
    SlowFastSystem::new(def, n_fast, "eps")
        .map(|sf| sf.full_system())
        .map_err(|e| ParseError::at(1, 1, e.to_string()))
}

fn build_system(text: &str, raw: RawSystem) -> Result<(SystemDef, usize), ParseError> {
    let at_start = |msg: String| ParseError::at(1, 1, msg);
    for name in raw.states.iter().chain(&raw.params) {
        check_identifier(name).map_err(at_start)?;
    }
    let mut all: Vec<&String> = raw.states.iter().chain(&raw.params).collect();
    all.sort();
    if let Some(w) = all.windows(2).find(|w| w[0] == w[1]) {
        return Err(at_start(format!("`{}` declared twice", w[0])));
    }
    for k in raw.defaults.keys() {
        if !raw.params.contains(k) {
            return Err(at_start(format!("default given for undeclared parameter `{k}`")));
        }
    }
    if raw.equations.len() != raw.states.len() {
        return Err(at_start(format!(
            "arity mismatch: {} states but {} equations",
            raw.states.len(),
            raw.equations.len()
        )));
    }
    let scope = Scope::new(raw.states.clone(), raw.params.clone());
    let mut components = Vec::with_capacity(raw.states.len());
    for s in &raw.states {
        let src = raw
            .equations
            .get(s)
            .ok_or_else(|| at_start(format!("missing equation for state `{s}`")))?;
        let expr = parse_expr(src.get_ref(), &scope).map_err(|e| {
            // Map the expression column back into the file; +1 skips the quote.
            let (line, column) = line_col(text, src.span().start + e.column);
            ParseError::at(line, column, format!("in equation for `{s}`: {}", e.message))
        })?;
        components.push(expr);
    }
    let n_fast = raw.fast.len();
    let trailing = &raw.states[raw.states.len().saturating_sub(n_fast)..];
    if n_fast > 0 && trailing != raw.fast.as_slice() {
        return Err(at_start(
            "fast states must be the trailing entries of `states`, in order".to_string(),
        ));
    }
    let param_defaults = raw
        .params
        .iter()
        .map(|p| raw.defaults.get(p).copied())
        .collect();
    let def = SystemDef {
        name: raw.name.unwrap_or_else(|| "custom".to_string()),
        state_names: raw.states,
        param_names: raw.params,
        param_defaults,
        components,
    };
    Ok((def, n_fast))
}

/// Parse a complete configuration file.
pub fn parse_config(text: &str) -> Result<Config, ParseError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| toml_error(text, e))?;
    let (def, n_fast) = build_system(text, raw.system)?;
    let invalid = |msg: String| ParseError::at(1, 1, msg);
    let n = def.dim();

    let (system, slow_fast) = if n_fast > 0 {
        let sf = SlowFastSystem::new(def, n_fast, "eps").map_err(|e| invalid(e.to_string()))?;
        (sf.full_system(), Some(sf))
    } else {
        (def, None)
    };

    // the cone orders the slow (reduced) variables of a slow-fast system
    let n = n - n_fast;
    if let Some(c) = &raw.cone {
        if c.matrix.len() != n * n {
            return Err(invalid(format!(
                "cone matrix has {} entries, expected {}",
                c.matrix.len(),
                n * n
            )));
        }
        if let Some(v) = &c.v_plus {
            if v.len() != n {
                return Err(invalid(format!("v_plus has {} entries, expected {n}", v.len())));
            }
        }
    }

    let domain = match raw.domain {
        None => None,
        Some(RawDomain {
            bounds: Some(b),
            lower: None,
            upper: None,
        }) => Some(BoxDomain::symmetric(&b)),
        Some(RawDomain {
            bounds: None,
            lower: Some(l),
            upper: Some(u),
        }) => {
            if l.len() != u.len() {
                return Err(invalid("domain lower/upper lengths differ".into()));
            }
            Some(BoxDomain::new(l, u))
        }
        Some(_) => {
            return Err(invalid(
                "domain needs either `bounds` or both `lower` and `upper`".into(),
            ))
        }
    };
    if let Some(d) = &domain {
        if d.dim() != n + n_fast {
            return Err(invalid(format!("domain has dimension {}, expected {}", d.dim(), n + n_fast)));
        }
    }
    if !(raw.solver.rel_tol > 0.0 && raw.solver.abs_tol > 0.0) {
        return Err(invalid("solver tolerances must be positive".into()));
    }

    Ok(Config {
        system,
        slow_fast,
        cone: raw.cone,
        domain,
        solver: raw.solver,
        sweep: raw.sweep,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FOUR_D: &str = r#"
[system]
name = "paper-4d"
states = ["x", "y", "z", "w"]
params = ["eps"]
fast = ["w"]

[system.defaults]
eps = 0.05

[system.equations]
x = "x - y - 1.5*x*z^2 - 0.5*x*(x^2+y^2) + eps*x*w"
y = "x + y - 1.5*y*z^2 - 0.5*y*(x^2+y^2) + eps*y*w"
z = "-z - 0.5*z^3 - 1.5*z*(x^2+y^2) + eps*z*w"
w = "-w + x + y + z"

[cone]
matrix = [-1, 0, 0, 0, -1, 0, 0, 0, 1]
v_plus = [0, 0, 1]

[domain]
bounds = [4, 4, 4, 16]

[sweep]
n = 10
seed = 3
"#;

    #[test]
    fn parses_full_config() {
        let cfg = parse_config(FOUR_D).unwrap();
        assert_eq!(cfg.system.dim(), 4);
        assert!(cfg.slow_fast.is_some());
        assert_eq!(cfg.domain.unwrap().upper, vec![4.0, 4.0, 4.0, 16.0]);
        assert_eq!(cfg.sweep.n, 10);
        assert_eq!(cfg.solver, SolverSection::default());
        let bound = cfg.system.bind_defaults().unwrap();
        // w' = (-w + x + y + z)/eps in slow time
        let f = crate::dynsys::VectorField::eval_vec(&bound, &[2.0, 2.0, 3.0, 12.0]).unwrap();
        assert!((f[0] + 33.8).abs() < 1e-12);
        assert!((f[3] - (-5.0 / 0.05)).abs() < 1e-9);
    }

    #[test]
    fn expression_errors_point_into_the_file() {
        let bad = FOUR_D.replace("w = \"-w + x + y + z\"", "w = \"-w + (x + y + z\"");
        let err = parse_config(&bad).unwrap_err();
        let line_no = bad.lines().position(|l| l.starts_with("w = ")).unwrap() + 1;
        assert_eq!(err.line, line_no);
        assert!(err.message.contains("unbalanced"), "{err}");
        assert!(err.column > 5);
    }

    #[test]
    fn arity_mismatch_and_undeclared_names() {
        let missing = FOUR_D.replace("w = \"-w + x + y + z\"\n", "");
        assert!(parse_config(&missing).unwrap_err().message.contains("arity"));
        let undeclared = FOUR_D.replace("-w + x + y + z", "-w + x + y + q");
        assert!(parse_config(&undeclared)
            .unwrap_err()
            .message
            .contains("undeclared identifier `q`"));
    }

    #[test]
    fn toml_syntax_error_has_position() {
        let err = parse_system("[system\nstates = 1").unwrap_err();
        assert_eq!(err.line, 1);
    }

    #[test]
    fn reserved_names_rejected() {
        let src = "[system]\nstates = [\"sin\"]\n[system.equations]\nsin = \"1\"\n";
        assert!(parse_system(src).unwrap_err().message.contains("reserved"));
    }
}
