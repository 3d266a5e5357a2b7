use nalgebra::DMatrix;

use super::{BoxDomain, SystemDef};
use crate::cone::QuadraticCone;
use crate::error::Error;
use crate::slowfast::SlowFastSystem;

const SLOW_FIELD: [&str; 3] = [
    "x - y - 1.5*x*z^2 - 0.5*x*(x^2 + y^2) + eps*x*w",
    "x + y - 1.5*y*z^2 - 0.5*y*(x^2 + y^2) + eps*y*w",
    "-z - 0.5*z^3 - 1.5*z*(x^2 + y^2) + eps*z*w",
];
const FAST_FIELD: &str = "-w + x + y + z";

const LIMIT: [&str; 3] = [
    "x - y - 1.5*x*z^2 - 0.5*x*(x^2 + y^2)",
    "x + y - 1.5*y*z^2 - 0.5*y*(x^2 + y^2)",
    "-z - 0.5*z^3 - 1.5*z*(x^2 + y^2)",
];

/// A registered system with its cone and domain data.
#[derive(Clone, Debug)]
pub struct Builtin {
    /// Full field in slow time.
    pub system: SystemDef,
    pub slow_fast: Option<SlowFastSystem>,
    pub cone: Option<QuadraticCone>,
    /// Eigenvector of the cone matrix for its positive eigenvalue.
    pub v_plus: Option<Vec<f64>>,
    pub domain: Option<BoxDomain>,
}

pub fn builtin_names() -> &'static [&'static str] {
    &["paper-4d", "paper-3d-limit", "circle"]
}

fn example_cone() -> QuadraticCone {
    QuadraticCone::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        -1.0, -1.0, 1.0,
    ])))
    .expect("diag(-1,-1,1) is a valid cone")
}

pub fn get_builtin(name: &str) -> Result<Builtin, Error> {
    let parse_err = |e: super::ParseError| Error::Invalid(format!("builtin `{name}`: {e}"));
    match name {
        "paper-4d" => {
            let mut sources = SLOW_FIELD.to_vec();
            sources.push(FAST_FIELD);
            let raw = SystemDef::from_sources(
                name,
                &["x", "y", "z", "w"],
                &[("eps", Some(0.05))],
                &sources,
            )
            .map_err(parse_err)?;
            let sf = SlowFastSystem::new(raw, 1, "eps")?;
            Ok(Builtin {
                system: sf.full_system(),
                slow_fast: Some(sf),
                cone: Some(example_cone()),
                v_plus: Some(vec![0.0, 0.0, 1.0]),
                domain: Some(BoxDomain::symmetric(&[4.0, 4.0, 4.0, 16.0])),
            })
        }
        "paper-3d-limit" => Ok(Builtin {
            system: SystemDef::from_sources(name, &["x", "y", "z"], &[], &LIMIT)
                .map_err(parse_err)?,
            slow_fast: None,
            cone: Some(example_cone()),
            v_plus: Some(vec![0.0, 0.0, 1.0]),
            domain: Some(BoxDomain::symmetric(&[4.0, 4.0, 4.0])),
        }),
        "circle" => Ok(Builtin {
            system: SystemDef::from_sources(name, &["x", "y"], &[], &["-y", "x"])
                .map_err(parse_err)?,
            slow_fast: None,
            cone: None,
            v_plus: None,
            domain: Some(BoxDomain::symmetric(&[2.0, 2.0])),
        }),
        _ => Err(Error::UnknownBuiltin(name.to_string())),
    }
}
