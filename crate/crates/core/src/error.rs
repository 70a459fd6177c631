use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("agent index {index} out of range for a network of {agents} agents")]
    AgentOutOfRange { index: usize, agents: usize },

    #[error("self-loop at agent {0}")]
    SelfLoop(usize),

    #[error("duplicate edge {from} -> {to}")]
    DuplicateEdge { from: usize, to: usize },

    #[error("walk count overflow while building the connectivity matrix")]
    WalkCountOverflow,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("iteration mismatch: state is at k={state}, measurements are for k={round}")]
    IterationMismatch { state: usize, round: usize },

    #[error("innovation covariance of agent {agent} is not positive definite after regularization")]
    SingularInnovationCovariance { agent: usize },

    #[error("error covariance grid is no longer finite at k={k}")]
    NonFiniteCovariance { k: usize },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("{0} did not converge")]
    Decomposition(&'static str),

    #[error(transparent)]
    Validation(#[from] ValidationErrors),
}

/// A single scenario validation failure, addressed by field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// All validation failures of a scenario, in field order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationErrors(pub Vec<ValidationIssue>);

impl ValidationErrors {
    pub fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.0.push(ValidationIssue {
            field: field.into(),
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn issues(&self) -> &[ValidationIssue] {
        &self.0
    }

    pub fn contains(&self, needle: &str) -> bool {
        self.0.iter().any(|i| i.message.contains(needle))
    }
}

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, issue) in self.0.iter().enumerate() {
            if n > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

impl core::error::Error for ValidationErrors {}
