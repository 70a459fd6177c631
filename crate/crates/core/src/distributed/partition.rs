use alloc::vec::Vec;

use super::geometry::{stack_innovation, AgentGeometry, InnovationGeometry};
use crate::error::Error;
use crate::linalg::{self, Matrix, Vector};
use crate::model::{MeasurementRound, Scenario};

/// A gain split into per-neighbour weights: `Mᵢⱼ` (`n × pⱼ`) for the
/// innovation from `j ∈ Ω̄ᵢ` and `Bᵢⱼ` (`n × n`) for the consensus with
/// `j ∈ Ωᵢ`. Both lists are in ascending neighbour order.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentWeights {
    pub agent: usize,
    pub innovation: Vec<(usize, Matrix)>,
    pub consensus: Vec<(usize, Matrix)>,
}

impl AgentWeights {
    /// Splits `𝒦ᵢ` column-wise along the innovation layout.
    pub fn from_gain(gain: &Matrix, geometry: &AgentGeometry) -> Self {
        let innovation = geometry
            .closed()
            .iter()
            .enumerate()
            .map(|(idx, &j)| {
                let rows = geometry.measurement_block(idx);
                (j, gain.columns(rows.start, rows.len()).into_owned())
            })
            .collect();
        let consensus = geometry
            .open()
            .iter()
            .enumerate()
            .map(|(idx, &j)| {
                let rows = geometry.consensus_block(idx);
                (j, gain.columns(rows.start, rows.len()).into_owned())
            })
            .collect();
        Self {
            agent: geometry.agent(),
            innovation,
            consensus,
        }
    }

    /// Reassembles `𝒦ᵢ = [Mᵢⱼ … | Bᵢⱼ …]`.
    pub fn gain(&self, dim: usize) -> Matrix {
        linalg::hstack(
            dim,
            self.innovation
                .iter()
                .map(|(_, m)| m)
                .chain(self.consensus.iter().map(|(_, b)| b)),
        )
    }

    pub fn innovation_weight(&self, j: usize) -> Option<&Matrix> {
        self.innovation.iter().find(|(l, _)| *l == j).map(|(_, m)| m)
    }

    pub fn consensus_weight(&self, j: usize) -> Option<&Matrix> {
        self.consensus.iter().find(|(l, _)| *l == j).map(|(_, b)| b)
    }

    /// `Fᵢᵢ = I − Σⱼ MᵢⱼHⱼ − Σⱼ Bᵢⱼ`, the coefficient of `εᵢ` in `εᵢ'`.
    pub fn self_transition(&self, scenario: &Scenario) -> Matrix {
        let n = scenario.dim();
        let mut f = Matrix::identity(n, n);
        for (j, m) in &self.innovation {
            f -= m * &scenario.agent(*j).h;
        }
        for (_, b) in &self.consensus {
            f -= b;
        }
        f
    }

    /// `(c, F_ic)` over the closed neighbourhood: `F_ii` for `c = i`, `B_ic` otherwise.
    pub fn error_transition(&self, scenario: &Scenario) -> Vec<(usize, Matrix)> {
        let mut out: Vec<(usize, Matrix)> = self.consensus.clone();
        let pos = out.partition_point(|(c, _)| *c < self.agent);
        out.insert(pos, (self.agent, self.self_transition(scenario)));
        out
    }
}

/// Weights for every agent, indexed by agent.
#[derive(Debug, Clone, PartialEq)]
pub struct GainPartition {
    pub agents: Vec<AgentWeights>,
}

impl GainPartition {
    pub fn from_gains<'a>(gains: impl IntoIterator<Item = &'a Matrix>, geometry: &InnovationGeometry) -> Self {
        Self {
            agents: gains
                .into_iter()
                .zip(geometry.agents())
                .map(|(g, geo)| AgentWeights::from_gain(g, geo))
                .collect(),
        }
    }

    pub fn agent(&self, i: usize) -> &AgentWeights {
        &self.agents[i]
    }

    pub fn gains(&self, dim: usize) -> Vec<Matrix> {
        self.agents.iter().map(|w| w.gain(dim)).collect()
    }
}

fn check_inputs(estimates: &[Vector], round: &MeasurementRound, scenario: &Scenario) -> Result<(), Error> {
    if estimates.len() != scenario.agent_count() || estimates.iter().any(|x| x.len() != scenario.dim()) {
        return Err(Error::DimensionMismatch("estimates do not match scenario".into()));
    }
    if !round.matches(scenario) {
        return Err(Error::DimensionMismatch("measurement round does not match scenario".into()));
    }
    Ok(())
}

/// Neighbour-weight form of the estimate update:
/// `xᵢ' = xᵢ + Σⱼ Bᵢⱼ(xⱼ − xᵢ) + Σⱼ Mᵢⱼ(zⱼ − Hⱼxᵢ)`.
pub fn update_estimates(
    estimates: &[Vector],
    round: &MeasurementRound,
    partition: &GainPartition,
    scenario: &Scenario,
) -> Result<Vec<Vector>, Error> {
    check_inputs(estimates, round, scenario)?;
    Ok(partition
        .agents
        .iter()
        .map(|w| {
            let xi = &estimates[w.agent];
            let mut next = xi.clone();
            for (j, b) in &w.consensus {
                next += b * (&estimates[*j] - xi);
            }
            for (j, m) in &w.innovation {
                next += m * (&round.z[*j] - &scenario.agent(*j).h * xi);
            }
            next
        })
        .collect())
}

/// Stacked form of the same update: `xᵢ' = xᵢ + 𝒦ᵢyᵢ`.
pub fn update_estimates_compact(
    estimates: &[Vector],
    round: &MeasurementRound,
    gains: &[Matrix],
    scenario: &Scenario,
    geometry: &InnovationGeometry,
) -> Result<Vec<Vector>, Error> {
    check_inputs(estimates, round, scenario)?;
    (0..scenario.agent_count())
        .map(|i| {
            let y = stack_innovation(estimates, round, scenario, geometry, i)?;
            Ok(&estimates[i] + &gains[i] * y)
        })
        .collect()
}
