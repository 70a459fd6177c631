//! Consensus+innovations estimator with optimal gains computed from the
//! propagated grid of error covariances and cross-covariances.

mod covariance;
mod gain;
mod geometry;
mod grid;
mod partition;
mod schedule;
mod stability;

use alloc::vec;
use alloc::vec::Vec;

pub use covariance::{clamp_diagonals, update_covariances, update_covariances_expanded};
pub use gain::{
    agent_gain, all_gains, delta_covariance, error_innovation_covariance, innovation_covariance, sigma_eps_delta,
    AgentGain,
};
pub use geometry::{stack_innovation, AgentGeometry, InnovationGeometry};
pub use grid::{CovarianceGrid, CovarianceMode};
pub use partition::{update_estimates, update_estimates_compact, AgentWeights, GainPartition};
pub use schedule::{
    plan_round, propagate, step_network, AgentDiagnostics, DistributedConfig, FixupGate, GainSchedule, PartialSchedule,
    RoundPlan, ScheduledRound,
};
pub use stability::{effective_spectral_radius, gain_fixup, plain_spectral_radius, EffectiveRadius, FixupReport};

use crate::centralized::Initialization;
use crate::linalg::Vector;
use crate::model::Scenario;

/// Estimates and error covariance grid of every agent at iteration `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub estimates: Vec<Vector>,
    pub cov: CovarianceGrid,
    pub k: usize,
    pub mode: CovarianceMode,
}

impl NetworkState {
    /// All agents start from the same estimate, so every block of the grid
    /// equals the initial covariance (untracked blocks are zeroed in sparse mode).
    pub fn init(scenario: &Scenario, init: Initialization, mode: CovarianceMode) -> Self {
        let m = scenario.agent_count();
        let mut cov = CovarianceGrid::uniform(m, &init.initial_covariance(scenario));
        cov.restrict(mode, scenario.graph());
        Self {
            estimates: vec![init.initial_mean(scenario); m],
            cov,
            k: 0,
            mode,
        }
    }

    /// `max_{i,j} ‖xᵢ − xⱼ‖`.
    pub fn max_disagreement(&self) -> f64 {
        max_disagreement(&self.estimates)
    }
}

pub fn max_disagreement(estimates: &[Vector]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in estimates.iter().enumerate() {
        for b in &estimates[i + 1..] {
            worst = worst.max((a - b).norm());
        }
    }
    worst
}
