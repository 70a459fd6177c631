//! Distributed estimation of a stochastic Gaussian parameter over a directed
//! multi-agent network.
//!
//! Every agent runs a consensus+innovations filter in which the differences to
//! its in-neighbours' estimates are stacked into the innovation vector next to
//! the measurement residuals of its closed neighbourhood. Gains are the optimal
//! linear (Gauss-Markov) gains computed from the analytically propagated grid
//! of error covariances and cross-covariances. A centralized fusion-center
//! filter and a closed-form batch posterior act as benchmarks.
//!
//! The crate is `no_std` and needs only `alloc`.
//!
//! Agent indices are zero-based throughout the API.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod centralized;
pub mod distributed;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod model;
pub mod observability;

pub use centralized::{batch_posterior, CentralizedState, Initialization};
pub use distributed::{
    CovarianceGrid, CovarianceMode, DistributedConfig, FixupGate, GainSchedule, InnovationGeometry,
    NetworkState,
};
pub use error::{Error, ValidationErrors, ValidationIssue};
pub use graph::{ConnectivityMatrix, DirectedGraph};
pub use linalg::{Matrix, Vector};
pub use model::{AgentModel, MeasurementRound, Scenario};
pub use observability::{ObservabilityReport, RankTolerance};
