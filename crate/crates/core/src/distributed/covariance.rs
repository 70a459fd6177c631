use alloc::vec::Vec;

use super::gain::{error_innovation_covariance, innovation_covariance, AgentGain};
use super::geometry::InnovationGeometry;
use super::grid::{CovarianceGrid, CovarianceMode};
use super::partition::GainPartition;
use crate::error::Error;
use crate::linalg::{self, Matrix};
use crate::model::Scenario;

/// Propagates the error covariance grid through one update with the given
/// weights.
///
/// Uses the error recursion `εₐ' = Σ_c F_ac ε_c − Σ_q M_aq v_q`, so
/// `P'_ab = Σ_{c,d} F_ac P_cd F_bdᵀ + Σ_{q ∈ Ω̄ₐ ∩ Ω̄_b} M_aq R_q M_bqᵀ`.
/// This holds for any weights, including jittered or fixed-up ones, and keeps
/// the grid positive semidefinite by construction. Untracked blocks are
/// skipped and left at zero.
pub fn update_covariances(
    cov: &CovarianceGrid,
    partition: &GainPartition,
    scenario: &Scenario,
    mode: CovarianceMode,
) -> CovarianceGrid {
    let m = scenario.agent_count();
    let graph = scenario.graph();
    let transitions: Vec<Vec<(usize, Matrix)>> = partition
        .agents
        .iter()
        .map(|w| w.error_transition(scenario))
        .collect();
    let mut next = CovarianceGrid::zeros(m, scenario.dim());
    for a in 0..m {
        // Σ_c F_ac P_cd for every d, shared across all b.
        let left: Vec<Matrix> = (0..m)
            .map(|d| {
                transitions[a]
                    .iter()
                    .fold(Matrix::zeros(scenario.dim(), scenario.dim()), |acc, (c, f)| {
                        acc + f * cov.get(*c, d)
                    })
            })
            .collect();
        for b in a..m {
            if !mode.tracks(graph, a, b) {
                continue;
            }
            let mut block = transitions[b]
                .iter()
                .fold(Matrix::zeros(scenario.dim(), scenario.dim()), |acc, (d, f)| {
                    acc + &left[*d] * f.transpose()
                });
            let wa = partition.agent(a);
            let wb = partition.agent(b);
            for (q, ma) in &wa.innovation {
                if let Some(mb) = wb.innovation_weight(*q) {
                    block += ma * &scenario.agent(*q).r * mb.transpose();
                }
            }
            next.set(a, b, block);
        }
    }
    next
}

/// The same propagation written with the innovation statistics:
/// `Pᵢ' = Pᵢ − 𝒦ᵢΣ_{θ,yᵢ}ᵀ` on the diagonal and
/// `Pᵢⱼ' = Pᵢⱼ − 𝒦ᵢE[εⱼyᵢᵀ]ᵀ − E[εᵢyⱼᵀ]𝒦ⱼᵀ + 𝒦ᵢE[yᵢyⱼᵀ]𝒦ⱼᵀ` off it.
///
/// Exact only for unmodified optimal gains and numerically fragile over long
/// horizons (the cancellations lose positive semidefiniteness); kept as an
/// independent check on [`update_covariances`].
pub fn update_covariances_expanded(
    cov: &CovarianceGrid,
    gains: &[AgentGain],
    scenario: &Scenario,
    geometry: &InnovationGeometry,
    mode: CovarianceMode,
) -> CovarianceGrid {
    let m = scenario.agent_count();
    let mut next = CovarianceGrid::zeros(m, scenario.dim());
    for i in 0..m {
        next.set(
            i,
            i,
            cov.diagonal(i) - &gains[i].gain * gains[i].sigma_theta_y.transpose(),
        );
        for j in i + 1..m {
            if !mode.tracks(scenario.graph(), i, j) {
                continue;
            }
            let (ki, kj) = (&gains[i].gain, &gains[j].gain);
            let c_ij = error_innovation_covariance(cov, geometry, i, j);
            let c_ji = error_innovation_covariance(cov, geometry, j, i);
            let s_ij = innovation_covariance(cov, scenario, geometry, i, j);
            let block = cov.get(i, j) - ki * c_ji.transpose() - c_ij * kj.transpose() + ki * s_ij * kj.transpose();
            next.set(i, j, block);
        }
    }
    next
}

/// Projects diagonal blocks that drifted below the PSD cone back onto it.
/// Returns, per agent, whether a projection was applied.
pub fn clamp_diagonals(cov: &mut CovarianceGrid, tol: f64) -> Result<Vec<bool>, Error> {
    (0..cov.agents())
        .map(|i| {
            let block = cov.diagonal_mut(i);
            linalg::symmetrize(block);
            linalg::clamp_psd(block, tol)
        })
        .collect()
}
