use thiserror::Error;

use crate::dual::SolveReport;

/// Errors produced by the kinetic model, the target solvers and the time stepper.
#[derive(Debug, Clone, Error)]
pub enum BgkError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected} nodes, got {found}")]
    Shape { expected: usize, found: usize },

    #[error("outside multiplier domain: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("exponential overflow while evaluating {0}")]
    Overflow(&'static str),

    #[error("target solve failed{context}: {reason} after {} iterations (relative gradient {:.3e})", report.iterations, report.final_grad_norm)]
    SolverFailure {
        reason: String,
        context: String,
        report: Box<SolveReport>,
    },

    #[error("step size too large at t = {t}: dt * sum_j nu_ij = {factor} > 1 for species {species} at node {node}")]
    StepSize {
        t: f64,
        species: usize,
        node: usize,
        factor: f64,
    },
}

impl BgkError {
    /// Attach a location (pair, time) to a solver failure; other variants pass through.
    pub fn with_context(self, ctx: impl Into<String>) -> Self {
        match self {
            BgkError::SolverFailure {
                reason,
                context,
                report,
            } => BgkError::SolverFailure {
                reason,
                context: format!("{}{}", ctx.into(), context),
                report,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, BgkError>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(BgkError::Shape { expected, found })
    }
}
