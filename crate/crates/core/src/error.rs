use thiserror::Error;

use crate::cone::ConeError;
use crate::dynsys::{EvalError, ParseError};
use crate::integrate::IntegrateError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error("unknown builtin system `{0}`")]
    UnknownBuiltin(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("iteration did not converge: {0}")]
    NoConvergence(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("no section crossing within t = {t_max}")]
    NoCrossing { t_max: f64 },
    #[error("tangential section crossing at t = {t} (section derivative {rate:e})")]
    TangentialCrossing { t: f64, rate: f64 },
    #[error("initial condition already on the slow manifold (distance {distance:e})")]
    AlreadyOnManifold { distance: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
