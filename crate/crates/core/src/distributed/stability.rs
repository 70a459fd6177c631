use super::geometry::AgentGeometry;
use super::grid::CovarianceGrid;
use super::partition::AgentWeights;
use crate::error::Error;
use crate::linalg::{self, Matrix};
use crate::model::Scenario;

const PSEUDO_INVERSE_TOLERANCE: f64 = 1e-12;

/// `ρ(I − 𝒦ᵢH̃ᵢ)`, the spectral radius of the error map ignoring the
/// correlation between `εᵢ` and `δᵢ`.
pub fn plain_spectral_radius(gain: &Matrix, geometry: &AgentGeometry) -> Result<f64, Error> {
    let n = gain.nrows();
    linalg::spectral_radius(&(Matrix::identity(n, n) - gain * geometry.h_tilde()))
}

/// `Pᵢ⁻¹`, falling back to the pseudo-inverse when `Pᵢ` is singular.
fn local_inverse(p: &Matrix) -> Result<(Matrix, bool), Error> {
    match linalg::cholesky(p) {
        Some(chol) => Ok((chol.inverse(), false)),
        None => Ok((linalg::symmetric_pseudo_inverse(p, PSEUDO_INVERSE_TOLERANCE, false)?, true)),
    }
}

/// `I − 𝒦ᵢ(H̃ᵢ + Σ_{εᵢ,δᵢ}ᵀPᵢ⁻¹)` written with the neighbour weights:
/// `I − Σⱼ MᵢⱼHⱼ − Σⱼ Bᵢⱼ(I − PⱼᵢPᵢ⁻¹)`.
fn effective_map(weights: &AgentWeights, cov: &CovarianceGrid, scenario: &Scenario, p_inv: &Matrix) -> Matrix {
    let i = weights.agent;
    let n = scenario.dim();
    let mut map = Matrix::identity(n, n);
    for (j, m) in &weights.innovation {
        map -= m * &scenario.agent(*j).h;
    }
    for (j, b) in &weights.consensus {
        map -= b * (Matrix::identity(n, n) - cov.get(*j, i) * p_inv);
    }
    map
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveRadius {
    pub radius: f64,
    /// `Pᵢ` was singular and its pseudo-inverse was used.
    pub pseudo_inverse: bool,
}

/// `ρ(I − 𝒦ᵢ(H̃ᵢ + Σ_{εᵢ,δᵢ}ᵀPᵢ⁻¹))`, the spectral radius of the error map once
/// the part of `δᵢ` explained by `εᵢ` is folded in.
pub fn effective_spectral_radius(
    weights: &AgentWeights,
    cov: &CovarianceGrid,
    scenario: &Scenario,
) -> Result<EffectiveRadius, Error> {
    let (p_inv, pseudo_inverse) = local_inverse(cov.diagonal(weights.agent))?;
    Ok(EffectiveRadius {
        radius: linalg::spectral_radius(&effective_map(weights, cov, scenario, &p_inv))?,
        pseudo_inverse,
    })
}

/// Outcome of replacing an agent's consensus weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixupReport {
    pub agent: usize,
    pub radius_before: f64,
    pub radius_after: f64,
    pub pseudo_inverse: bool,
}

/// Keeps the innovation weights and replaces each consensus weight with
/// `B̃ᵢⱼ = Bᵢⱼ(I − PᵢⱼPᵢ⁻¹)`.
pub fn gain_fixup(
    weights: &AgentWeights,
    cov: &CovarianceGrid,
    scenario: &Scenario,
) -> Result<(AgentWeights, FixupReport), Error> {
    let i = weights.agent;
    let n = scenario.dim();
    let (p_inv, pseudo_inverse) = local_inverse(cov.diagonal(i))?;
    let radius_before = linalg::spectral_radius(&effective_map(weights, cov, scenario, &p_inv))?;
    let consensus = weights
        .consensus
        .iter()
        .map(|(j, b)| (*j, b * (Matrix::identity(n, n) - cov.get(i, *j) * &p_inv)))
        .collect();
    let fixed = AgentWeights {
        agent: i,
        innovation: weights.innovation.clone(),
        consensus,
    };
    let radius_after = linalg::spectral_radius(&effective_map(&fixed, cov, scenario, &p_inv))?;
    Ok((
        fixed,
        FixupReport {
            agent: i,
            radius_before,
            radius_after,
            pseudo_inverse,
        },
    ))
}
