use thiserror::Error;

/// Errors raised by the map, metric and flow constructions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A Finsler quantity was requested at the zero section.
    #[error("{0} is undefined for the zero vector")]
    ZeroVector(&'static str),

    /// A point outside the domain of an operation (e.g. `v1 <= 0` on the section).
    #[error("domain error in {operation}: {detail}")]
    Domain {
        operation: &'static str,
        detail: String,
    },

    #[error("Hamiltonian is not strictly convex in the momentum: min d²H/dy² = {min_hessian:.6} (need > {required})")]
    NotConvex { min_hessian: f64, required: f64 },

    #[error("inadmissible profile constants: {0}")]
    Inadmissible(String),

    #[error("{operation} failed at {point}: achieved residual {residual:.3e} (tolerance {tolerance:.3e})")]
    Numerical {
        operation: &'static str,
        point: String,
        residual: f64,
        tolerance: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
