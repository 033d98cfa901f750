//! Random assignment of indivisible objects under arbitrary linear
//! feasibility constraints, computed with exact rational arithmetic.
//!
//! The centerpiece is the *constrained serial rule* ([`mechanism`]), a
//! generalization of the probabilistic serial mechanism that supports weak
//! (indifference-allowing) preferences and an arbitrary system of linear
//! constraints on the assignment matrix. Around it:
//!
//! * [`model`]: instances, weak orders, assignments, constraint systems,
//!   stochastic-dominance utilities;
//! * [`ratlp`]: an exact rational simplex kernel used by every linear
//!   program in the crate;
//! * [`audit`]: certificates for constrained ordinal efficiency,
//!   envy-freeness among same-type agents, and promise satisfaction;
//! * [`oracles`]: independent reference implementations (eating-based)
//!   for the unconstrained domain;
//! * [`encoders`]: constraint-system builders for quota hierarchies,
//!   type-dependent distributional quotas, and combinatorial bundles;
//! * [`lottery`]: decomposition of a random assignment into a lottery
//!   over deterministic assignments;
//! * [`cli`]: the JSON instance/result file formats and the `csr`
//!   command-line driver.
//!
//! Every quantity in the system is an exact rational; there is no epsilon
//! anywhere.

pub mod audit;
pub mod cli;
pub mod encoders;
#[cfg(test)]
pub(crate) mod fixtures;
pub mod lottery;
pub mod mechanism;
pub mod model;
pub mod oracles;
pub mod ratlp;

use model::Violation;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown agent id `{0}`")]
    UnknownAgent(String),
    #[error("unknown object id `{0}`")]
    UnknownObject(String),
    #[error("agent index {0} out of range")]
    AgentOutOfRange(usize),
    #[error("object index {0} out of range")]
    ObjectOutOfRange(usize),
    #[error("indifference level {level} out of range 1..={max}")]
    LevelOutOfRange { level: usize, max: usize },
    #[error("invalid rational literal `{0}`")]
    InvalidRational(String),
    #[error("linear program references undeclared variable {0}")]
    UndeclaredVariable(usize),
    #[error("preferences must be strict (singleton indifference classes)")]
    NonStrictPreferences,
    #[error("problem too large to enumerate (limit {limit}, needed {needed})")]
    EnumerationGuard { limit: usize, needed: usize },
    #[error("the constraint polytope is empty")]
    EmptyPolytope,
    #[error("assignment is infeasible: {0}")]
    InfeasibleAssignment(String),
    #[error("inconsistent round snapshot: {0}")]
    InconsistentSnapshot(String),
    #[error("invalid instance: {0:?}")]
    InvalidInstance(Vec<Violation>),
    #[error("unknown type label `{0}`")]
    UnknownTypeLabel(String),
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
