use alloc::vec::Vec;

use super::geometry::InnovationGeometry;
use super::grid::CovarianceGrid;
use crate::error::Error;
use crate::linalg::{self, Matrix};
use crate::model::Scenario;

const INDEFINITE_DROP_TOLERANCE: f64 = 1e-8;

/// `Σ_{εᵢ,δⱼ} = E[εᵢδⱼᵀ]`: zero against the measurement-noise columns of `δⱼ`,
/// `−Pᵢₗ` against the consensus columns `l ∈ Ωⱼ`.
pub fn sigma_eps_delta(cov: &CovarianceGrid, geometry: &InnovationGeometry, i: usize, j: usize) -> Matrix {
    let gj = geometry.agent(j);
    let n = geometry.dim();
    let mut out = Matrix::zeros(n, gj.rows());
    for (idx, &l) in gj.open().iter().enumerate() {
        out.view_mut((0, gj.consensus_block(idx).start), (n, n))
            .copy_from(&(-cov.get(i, l)));
    }
    out
}

/// `Δᵢⱼ = E[δᵢδⱼᵀ]`. Measurement blocks carry `R_q` where both stacks hold
/// agent `q`'s noise, consensus blocks carry `P_ql`; noise and errors are
/// uncorrelated so the off super-blocks vanish.
pub fn delta_covariance(
    cov: &CovarianceGrid,
    scenario: &Scenario,
    geometry: &InnovationGeometry,
    i: usize,
    j: usize,
) -> Matrix {
    let (gi, gj) = (geometry.agent(i), geometry.agent(j));
    let mut out = Matrix::zeros(gi.rows(), gj.rows());
    for (a, &q) in gi.closed().iter().enumerate() {
        if let Some(b) = gj.closed_position(q) {
            let (ra, rb) = (gi.measurement_block(a), gj.measurement_block(b));
            out.view_mut((ra.start, rb.start), (ra.len(), rb.len()))
                .copy_from(&scenario.agent(q).r);
        }
    }
    let n = geometry.dim();
    for (a, &q) in gi.open().iter().enumerate() {
        for (b, &l) in gj.open().iter().enumerate() {
            out.view_mut((gi.consensus_block(a).start, gj.consensus_block(b).start), (n, n))
                .copy_from(cov.get(q, l));
        }
    }
    out
}

/// `E[εᵢyⱼᵀ] = PᵢⱼH̃ⱼᵀ + Σ_{εᵢ,δⱼ}`. For `i = j` this is `Σ_{θ,yᵢ}`.
pub fn error_innovation_covariance(
    cov: &CovarianceGrid,
    geometry: &InnovationGeometry,
    i: usize,
    j: usize,
) -> Matrix {
    cov.get(i, j) * geometry.agent(j).h_tilde().transpose() + sigma_eps_delta(cov, geometry, i, j)
}

/// `E[yᵢyⱼᵀ] = H̃ᵢPᵢⱼH̃ⱼᵀ + Δᵢⱼ + H̃ᵢΣ_{εᵢ,δⱼ} + Σ_{εⱼ,δᵢ}ᵀH̃ⱼᵀ`. For `i = j`
/// this is `Σ_{yᵢ}`.
pub fn innovation_covariance(
    cov: &CovarianceGrid,
    scenario: &Scenario,
    geometry: &InnovationGeometry,
    i: usize,
    j: usize,
) -> Matrix {
    let (hi, hj) = (geometry.agent(i).h_tilde(), geometry.agent(j).h_tilde());
    let out = hi * cov.get(i, j) * hj.transpose()
        + delta_covariance(cov, scenario, geometry, i, j)
        + hi * sigma_eps_delta(cov, geometry, i, j)
        + sigma_eps_delta(cov, geometry, j, i).transpose() * hj.transpose();
    if i == j {
        linalg::symmetrized(out)
    } else {
        out
    }
}

/// Optimal linear gain of one agent with the quantities it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentGain {
    /// `𝒦ᵢ = Σ_{θ,yᵢ} Σ_{yᵢ}⁻¹`, `n × rᵢ`.
    pub gain: Matrix,
    pub sigma_theta_y: Matrix,
    pub sigma_y: Matrix,
    /// Diagonal jitter added to `Σ_{yᵢ}` to factor it, if any.
    pub jitter: Option<f64>,
    /// `Σ_{yᵢ}` was indefinite and its pseudo-inverse over the positive
    /// eigenvalues was used. Only happens when pruned cross-covariances make
    /// the grid inconsistent.
    pub projected: bool,
}

/// Computes one agent's optimal gain. `Σ_{yᵢ}` is positive semidefinite but
/// can be singular (identical initial errors make the consensus blocks vanish),
/// in which case a small diagonal jitter scaled by `jitter_scale` is used.
/// An indefinite `Σ_{yᵢ}` is inverted on its well-conditioned positive
/// eigenspace only.
pub fn agent_gain(
    cov: &CovarianceGrid,
    scenario: &Scenario,
    geometry: &InnovationGeometry,
    i: usize,
    jitter_scale: f64,
) -> Result<AgentGain, Error> {
    let sigma_theta_y = error_innovation_covariance(cov, geometry, i, i);
    let sigma_y = innovation_covariance(cov, scenario, geometry, i, i);
    let rhs = sigma_theta_y.transpose();
    let (gain, jitter, projected) = match linalg::solve_spd_regularized(&sigma_y, &rhs, jitter_scale) {
        Some(solved) => (solved.solution.transpose(), solved.jitter, false),
        None => {
            if !sigma_y.iter().all(|v| v.is_finite()) {
                return Err(Error::SingularInnovationCovariance { agent: i });
            }
            let pinv = linalg::symmetric_pseudo_inverse(&sigma_y, INDEFINITE_DROP_TOLERANCE, true)?;
            (sigma_theta_y.clone() * pinv, None, true)
        }
    };
    Ok(AgentGain {
        gain,
        sigma_theta_y,
        sigma_y,
        jitter,
        projected,
    })
}

pub fn all_gains(
    cov: &CovarianceGrid,
    scenario: &Scenario,
    geometry: &InnovationGeometry,
    jitter_scale: f64,
) -> Result<Vec<AgentGain>, Error> {
    (0..scenario.agent_count())
        .map(|i| agent_gain(cov, scenario, geometry, i, jitter_scale))
        .collect()
}
