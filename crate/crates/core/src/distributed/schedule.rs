use alloc::vec::Vec;

use super::covariance::{clamp_diagonals, update_covariances};
use super::gain::{all_gains, AgentGain};
use super::geometry::InnovationGeometry;
use super::grid::{CovarianceGrid, CovarianceMode};
use super::partition::{update_estimates, GainPartition};
use super::stability::{effective_spectral_radius, gain_fixup, plain_spectral_radius, FixupReport};
use super::NetworkState;
use crate::centralized::Initialization;
use crate::error::Error;
use crate::linalg::Vector;
use crate::model::{MeasurementRound, Scenario};

/// Which spectral radius triggers the consensus-weight fixup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FixupGate {
    Disabled,
    /// `ρ(I − 𝒦ᵢ(H̃ᵢ + Σ_{εᵢ,δᵢ}ᵀPᵢ⁻¹)) ≥ 1 + margin`.
    #[default]
    Effective,
    /// `ρ(I − 𝒦ᵢH̃ᵢ) ≥ 1 + margin`.
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributedConfig {
    pub mode: CovarianceMode,
    pub fixup_gate: FixupGate,
    pub fixup_margin: f64,
    /// Relative diagonal jitter for singular innovation covariances.
    pub jitter_scale: f64,
    /// Diagonal blocks with an eigenvalue below `-tol · trace` are projected to PSD.
    pub psd_clamp_tolerance: f64,
}

impl Default for DistributedConfig {
    fn default() -> Self {
        Self {
            mode: CovarianceMode::ExactGrid,
            fixup_gate: FixupGate::Effective,
            fixup_margin: 1e-9,
            jitter_scale: 1e-12,
            psd_clamp_tolerance: 1e-8,
        }
    }
}

impl DistributedConfig {
    pub fn with_mode(mode: CovarianceMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentDiagnostics {
    /// `ρ(I − 𝒦ᵢH̃ᵢ)` of the gain actually applied.
    pub spectral_radius: f64,
    /// Effective radius of the unmodified optimal gain.
    pub effective_radius: f64,
    pub jitter: Option<f64>,
    pub fixup: Option<FixupReport>,
    /// Whether `Pᵢ` entering this round needed a PSD projection.
    pub psd_clamped: bool,
}

/// Gains and weights for one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundPlan {
    pub k: usize,
    pub gains: Vec<AgentGain>,
    /// Weights actually applied (after any fixup).
    pub weights: GainPartition,
    pub diagnostics: Vec<AgentDiagnostics>,
}

impl RoundPlan {
    pub fn fixup_count(&self) -> usize {
        self.diagnostics.iter().filter(|d| d.fixup.is_some()).count()
    }

    pub fn jitter_count(&self) -> usize {
        self.diagnostics.iter().filter(|d| d.jitter.is_some()).count()
    }
}

/// Computes every agent's gain from the covariance grid at iteration `k`,
/// partitions it and applies the fixup where the configured gate fires.
pub fn plan_round(
    cov: &CovarianceGrid,
    k: usize,
    scenario: &Scenario,
    geometry: &InnovationGeometry,
    config: &DistributedConfig,
) -> Result<RoundPlan, Error> {
    let gains = all_gains(cov, scenario, geometry, config.jitter_scale)?;
    let mut weights = GainPartition::from_gains(gains.iter().map(|g| &g.gain), geometry);
    let mut diagnostics = Vec::with_capacity(gains.len());
    for (i, g) in gains.iter().enumerate() {
        let effective = effective_spectral_radius(weights.agent(i), cov, scenario)?;
        let plain = plain_spectral_radius(&g.gain, geometry.agent(i))?;
        let threshold = 1.0 + config.fixup_margin;
        let trigger = match config.fixup_gate {
            FixupGate::Disabled => false,
            FixupGate::Effective => effective.radius >= threshold,
            FixupGate::Plain => plain >= threshold,
        };
        let (fixup, spectral_radius) = if trigger {
            let (fixed, report) = gain_fixup(weights.agent(i), cov, scenario)?;
            let radius = plain_spectral_radius(&fixed.gain(scenario.dim()), geometry.agent(i))?;
            weights.agents[i] = fixed;
            (Some(report), radius)
        } else {
            (None, plain)
        };
        diagnostics.push(AgentDiagnostics {
            spectral_radius,
            effective_radius: effective.radius,
            jitter: g.jitter,
            fixup,
            psd_clamped: false,
        });
    }
    Ok(RoundPlan {
        k,
        gains,
        weights,
        diagnostics,
    })
}

/// Propagates the grid through a planned round and repairs any diagonal
/// block that left the PSD cone. Returns the per-agent clamp flags.
pub fn propagate(
    cov: &CovarianceGrid,
    plan: &RoundPlan,
    scenario: &Scenario,
    config: &DistributedConfig,
) -> Result<(CovarianceGrid, Vec<bool>), Error> {
    let mut next = update_covariances(cov, &plan.weights, scenario, config.mode);
    if !next.is_finite() {
        return Err(Error::NonFiniteCovariance { k: plan.k + 1 });
    }
    let clamped = clamp_diagonals(&mut next, config.psd_clamp_tolerance)?;
    Ok((next, clamped))
}

/// One synchronous iteration of every agent: gains from the current grid,
/// estimate update with round `k`'s measurements, grid propagation.
pub fn step_network(
    state: &NetworkState,
    round: &MeasurementRound,
    scenario: &Scenario,
    geometry: &InnovationGeometry,
    config: &DistributedConfig,
) -> Result<(NetworkState, RoundPlan), Error> {
    if round.k != state.k {
        return Err(Error::IterationMismatch {
            state: state.k,
            round: round.k,
        });
    }
    let plan = plan_round(&state.cov, state.k, scenario, geometry, config)?;
    let estimates = update_estimates(&state.estimates, round, &plan.weights, scenario)?;
    let (cov, _) = propagate(&state.cov, &plan, scenario, config)?;
    Ok((
        NetworkState {
            estimates,
            cov,
            k: state.k + 1,
            mode: config.mode,
        },
        plan,
    ))
}

/// One entry of a precomputed schedule: the grid summary entering iteration
/// `k` and the weights applied at `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledRound {
    pub k: usize,
    pub weights: GainPartition,
    pub diagnostics: Vec<AgentDiagnostics>,
    /// `tr Pᵢ,ₖ` per agent.
    pub traces: Vec<f64>,
    /// `max_{i,j} tr(Pᵢ + Pⱼ − Pᵢⱼ − Pⱼᵢ)`, the largest expected squared disagreement.
    pub expected_disagreement: f64,
}

impl ScheduledRound {
    pub fn fixup_count(&self) -> usize {
        self.diagnostics.iter().filter(|d| d.fixup.is_some()).count()
    }

    pub fn jitter_count(&self) -> usize {
        self.diagnostics.iter().filter(|d| d.jitter.is_some()).count()
    }
}

/// A schedule that may have stopped early.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSchedule {
    /// Entries up to the breakdown; the last entry's weights are not applicable.
    pub schedule: GainSchedule,
    pub breakdown: Option<Error>,
}

/// Gains are data independent, so the whole schedule for a horizon can be
/// computed once and shared by every Monte Carlo trial.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSchedule {
    pub init: Initialization,
    pub config: DistributedConfig,
    /// Entries for `k = 0..=horizon`; the last one's weights are never applied
    /// (the last entry only summarizes the final grid).
    pub rounds: Vec<ScheduledRound>,
    /// Full grids `P₀ … P_horizon` when requested.
    pub grids: Option<Vec<CovarianceGrid>>,
}

impl GainSchedule {
    /// Computes the full schedule, failing if the recursion breaks down.
    pub fn compute(
        scenario: &Scenario,
        geometry: &InnovationGeometry,
        init: Initialization,
        config: DistributedConfig,
        horizon: usize,
        retain_grids: bool,
    ) -> Result<Self, Error> {
        let partial = Self::compute_partial(scenario, geometry, init, config, horizon, retain_grids);
        match partial.breakdown {
            Some(err) => Err(err),
            None => Ok(partial.schedule),
        }
    }

    /// Computes as much of the schedule as possible. If the recursion breaks
    /// down (which can happen with pruned cross-covariances), the schedule
    /// ends at the last complete iteration and the error is returned with it.
    pub fn compute_partial(
        scenario: &Scenario,
        geometry: &InnovationGeometry,
        init: Initialization,
        config: DistributedConfig,
        horizon: usize,
        retain_grids: bool,
    ) -> PartialSchedule {
        let mut cov = NetworkState::init(scenario, init, config.mode).cov;
        let mut rounds = Vec::with_capacity(horizon + 1);
        let mut grids = retain_grids.then(|| Vec::with_capacity(horizon + 1));
        let mut clamped = alloc::vec![false; scenario.agent_count()];
        let m = scenario.agent_count();
        let mut breakdown = None;
        for k in 0..=horizon {
            let mut plan = match plan_round(&cov, k, scenario, geometry, &config) {
                Ok(plan) => plan,
                Err(err) => {
                    breakdown = Some(err);
                    break;
                }
            };
            for (d, c) in plan.diagnostics.iter_mut().zip(&clamped) {
                d.psd_clamped = *c;
            }
            let expected_disagreement = (0..m)
                .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
                .map(|(i, j)| cov.expected_disagreement(i, j))
                .fold(0.0, f64::max);
            let next = if k < horizon {
                match propagate(&cov, &plan, scenario, &config) {
                    Ok(next) => Some(next),
                    Err(err) => {
                        breakdown = Some(err);
                        None
                    }
                }
            } else {
                None
            };
            rounds.push(ScheduledRound {
                k,
                weights: plan.weights,
                diagnostics: plan.diagnostics,
                traces: cov.traces(),
                expected_disagreement,
            });
            match next {
                Some((next, flags)) => {
                    let prev = core::mem::replace(&mut cov, next);
                    if let Some(g) = grids.as_mut() {
                        g.push(prev);
                    }
                    clamped = flags;
                }
                None => {
                    if let Some(g) = grids.as_mut() {
                        g.push(cov.clone());
                    }
                    break;
                }
            }
        }
        PartialSchedule {
            schedule: Self {
                init,
                config,
                rounds,
                grids,
            },
            breakdown,
        }
    }

    /// Number of iterations whose weights can be applied.
    pub fn applicable_rounds(&self) -> usize {
        self.rounds.len().saturating_sub(1)
    }

    pub fn horizon(&self) -> usize {
        self.applicable_rounds()
    }

    /// Applies the weights of iteration `round.k` to the estimates.
    pub fn advance(
        &self,
        estimates: &[Vector],
        round: &MeasurementRound,
        scenario: &Scenario,
    ) -> Result<Vec<Vector>, Error> {
        let entry = self.rounds.get(round.k).filter(|_| round.k < self.horizon()).ok_or(
            Error::IterationMismatch {
                state: self.horizon(),
                round: round.k,
            },
        )?;
        update_estimates(estimates, round, &entry.weights, scenario)
    }
}
