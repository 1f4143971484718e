use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside the domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("{name} = {value} is beyond the supported range (limit {limit})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        limit: f64,
    },

    #[error("invalid coefficient model: {0}")]
    ModelInvalid(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("Poincaré constant not mesh-converged at kappa = {kappa}: relative change {change:.3e} under mesh doubling")]
    MeshUnresolved { kappa: f64, change: f64 },

    #[error("solver failure at t = {t}: {reason}")]
    Solver { t: f64, reason: String },

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Error {
    Error::Domain {
        name,
        value,
        expected,
    }
}
