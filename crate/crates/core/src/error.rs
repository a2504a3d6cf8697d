use thiserror::Error;

use crate::markov::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("chain `{label}` is invalid: {}", join_violations(.violations))]
    InvalidChain {
        label: String,
        violations: Vec<Violation>,
    },
    #[error("singular or ill-conditioned linear system: {0}")]
    Singular(String),
    #[error("symmetric eigensolver did not converge for chain `{0}`")]
    NoConvergence(String),
    #[error("product chain would have {states} states, cap is {cap}")]
    ProductTooLarge { states: usize, cap: usize },
    #[error("no source-sink path exists")]
    NoPath,
    #[error("matching needs users <= channels, got {users} users and {channels} channels")]
    TooManyUsers { users: usize, channels: usize },
    #[error("action set has no arms")]
    EmptyActionSet,
    #[error("arm enumeration exceeds cap of {0} arms")]
    CapExceeded(usize),
    #[error("chain {0} is not covered by any arm")]
    UncoveredChain(usize),
    #[error("observation does not match the played arm: {0}")]
    ObservationMismatch(String),
    #[error("policy used before a block was selected")]
    NoActiveArm,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("event log is not contiguous from slot 1: {0}")]
    LogGap(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error stems from rejected input rather than a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidChain { .. }
                | Error::TooManyUsers { .. }
                | Error::EmptyActionSet
                | Error::UncoveredChain(_)
                | Error::InvalidArgument(_)
                | Error::Scenario(_)
                | Error::Json(_)
        )
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
