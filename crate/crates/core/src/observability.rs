//! Centralized and distributed parameter observability.
//!
//! Centralized: `rank(Σ HᵢᵀHᵢ) = n`. Distributed at agent `i`: the stack
//! `𝒪ᵢ = [ã_{i,1}H₁; …; ã_{i,m}H_m]` has rank `n`, equivalently
//! `rank(Σⱼ ã²_{i,j} HⱼᵀHⱼ) = n`. The distributed test does not require the
//! graph to be connected.

use alloc::vec::Vec;

use crate::error::Error;
use crate::graph::ConnectivityMatrix;
use crate::linalg::{self, Matrix};
use crate::model::Scenario;

/// Relative singular-value cutoff used for numerical rank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankTolerance(pub f64);

impl Default for RankTolerance {
    fn default() -> Self {
        Self(1e-10)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservabilityReport {
    pub grammian: Matrix,
    pub grammian_rank: usize,
    pub required_rank: usize,
    pub observable: bool,
    /// Singular values of the grammian, descending.
    pub singular_values: Vec<f64>,
}

impl ObservabilityReport {
    fn from_grammian(grammian: Matrix, tol: RankTolerance) -> Result<Self, Error> {
        let required_rank = grammian.nrows();
        let sv = linalg::singular_values(&grammian)?;
        let grammian_rank = linalg::numerical_rank(&sv, tol.0);
        let mut singular_values: Vec<f64> = sv.iter().copied().collect();
        singular_values.sort_by(|a, b| b.total_cmp(a));
        Ok(Self {
            grammian,
            grammian_rank,
            required_rank,
            observable: grammian_rank == required_rank,
            singular_values,
        })
    }

    /// Smallest singular value counted as nonzero; a small value means the
    /// scenario is close to losing observability.
    pub fn smallest_nonzero_singular_value(&self) -> Option<f64> {
        self.singular_values.get(self.grammian_rank.checked_sub(1)?).copied()
    }
}

pub fn centralized_observability(scenario: &Scenario, tol: RankTolerance) -> Result<ObservabilityReport, Error> {
    let n = scenario.dim();
    let grammian = scenario
        .agents()
        .iter()
        .fold(Matrix::zeros(n, n), |acc, a| acc + a.h.transpose() * &a.h);
    ObservabilityReport::from_grammian(linalg::symmetrized(grammian), tol)
}

fn check_agent(scenario: &Scenario, connectivity: &ConnectivityMatrix, i: usize) -> Result<(), Error> {
    let agents = scenario.agent_count();
    if connectivity.agents() != agents {
        return Err(Error::DimensionMismatch(alloc::format!(
            "connectivity matrix is for {} agents, scenario has {agents}",
            connectivity.agents()
        )));
    }
    if i >= agents {
        return Err(Error::AgentOutOfRange { index: i, agents });
    }
    Ok(())
}

/// `𝒪ᵢ = Ãᵢ • H`, the row-scaled stack of all measurement matrices.
pub fn distributed_observability_matrix(
    scenario: &Scenario,
    connectivity: &ConnectivityMatrix,
    i: usize,
) -> Result<Matrix, Error> {
    check_agent(scenario, connectivity, i)?;
    let scaled: Vec<Matrix> = scenario
        .agents()
        .iter()
        .zip(connectivity.row(i))
        .map(|(a, &w)| &a.h * w as f64)
        .collect();
    Ok(linalg::vstack(scenario.dim(), scaled.iter()))
}

pub fn distributed_observability(
    scenario: &Scenario,
    connectivity: &ConnectivityMatrix,
    i: usize,
    tol: RankTolerance,
) -> Result<ObservabilityReport, Error> {
    check_agent(scenario, connectivity, i)?;
    let n = scenario.dim();
    let grammian = scenario
        .agents()
        .iter()
        .zip(connectivity.row(i))
        .fold(Matrix::zeros(n, n), |acc, (a, &w)| {
            let w = w as f64;
            acc + a.h.transpose() * &a.h * (w * w)
        });
    ObservabilityReport::from_grammian(linalg::symmetrized(grammian), tol)
}

/// Observability verdicts for a whole scenario.
#[derive(Debug, Clone)]
pub struct ObservabilityAnalysis {
    pub connectivity: ConnectivityMatrix,
    pub connected: bool,
    pub centralized: ObservabilityReport,
    pub per_agent: Vec<ObservabilityReport>,
}

impl ObservabilityAnalysis {
    pub fn new(scenario: &Scenario, tol: RankTolerance) -> Result<Self, Error> {
        let connectivity = scenario.graph().connectivity_matrix()?;
        let per_agent = (0..scenario.agent_count())
            .map(|i| distributed_observability(scenario, &connectivity, i, tol))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            connected: scenario.graph().is_connected(),
            centralized: centralized_observability(scenario, tol)?,
            connectivity,
            per_agent,
        })
    }

    pub fn all_observable(&self) -> bool {
        self.per_agent.iter().all(|r| r.observable)
    }

    pub fn unobservable_agents(&self) -> impl Iterator<Item = usize> + '_ {
        self.per_agent
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.observable)
            .map(|(i, _)| i)
    }
}
