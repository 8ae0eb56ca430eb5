use thiserror::Error;

use crate::params::TimescaleMargins;

/// Errors produced by the model, energy and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("inductance array for the {axis}-axis is not positive definite")]
    SingularInductance { axis: char },

    #[error("grid is not connected")]
    Disconnected,

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("modelling assumption violated: {0}")]
    Assumption(String),

    #[error("dissipation matrix is not PSD: {}", format_margins(.0))]
    DissipationNotPsd(Vec<(usize, TimescaleMargins)>),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("no equilibrium: {0}")]
    NoEquilibrium(String),

    #[error("state is not an equilibrium (residual {0:e})")]
    NotEquilibrium(f64),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("non-finite state at t = {0}")]
    NonFinite(f64),

    #[error("{0}")]
    Numerical(String),
}

fn format_margins(nodes: &[(usize, TimescaleMargins)]) -> String {
    nodes
        .iter()
        .map(|(i, m)| format!("node {i}: d-margin {:e}, q-margin {:e}", m.d, m.q))
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
