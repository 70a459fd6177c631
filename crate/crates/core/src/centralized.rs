//! Fusion-center benchmark filter and the closed-form batch posterior.

use crate::error::Error;
use crate::linalg::{self, Matrix, Vector};
use crate::model::{MeasurementRound, Scenario};

/// How estimates and covariances start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Initialization {
    /// `x₀ = θ̄`, `P₀ = Σ_θ`.
    #[default]
    Prior,
    /// Prior statistics unknown: `x₀ = 0`, `P₀ = I`.
    Uninformed,
}

impl Initialization {
    pub fn from_use_prior(use_prior: bool) -> Self {
        if use_prior {
            Self::Prior
        } else {
            Self::Uninformed
        }
    }

    pub fn initial_mean(self, scenario: &Scenario) -> Vector {
        match self {
            Self::Prior => scenario.theta_bar().clone(),
            Self::Uninformed => Vector::zeros(scenario.dim()),
        }
    }

    pub fn initial_covariance(self, scenario: &Scenario) -> Matrix {
        match self {
            Self::Prior => scenario.sigma_theta().clone(),
            Self::Uninformed => Matrix::identity(scenario.dim(), scenario.dim()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralizedState {
    pub x: Vector,
    pub p: Matrix,
    pub k: usize,
}

impl CentralizedState {
    pub fn init(scenario: &Scenario, init: Initialization) -> Self {
        Self {
            x: init.initial_mean(scenario),
            p: init.initial_covariance(scenario),
            k: 0,
        }
    }

    /// `𝒦* = P Hᵀ (H P Hᵀ + R)⁻¹`, computed as a solve against the SPD innovation covariance.
    pub fn gain(&self, scenario: &Scenario) -> Result<Matrix, Error> {
        centralized_gain(&self.p, &scenario.stacked_h(), &scenario.stacked_r())
    }

    /// One synchronous update with all agents' measurements.
    pub fn step(&self, round: &MeasurementRound, scenario: &Scenario) -> Result<Self, Error> {
        if round.k != self.k {
            return Err(Error::IterationMismatch {
                state: self.k,
                round: round.k,
            });
        }
        if !round.matches(scenario) {
            return Err(Error::DimensionMismatch("measurement round does not match scenario".into()));
        }
        let h = scenario.stacked_h();
        let gain = centralized_gain(&self.p, &h, &scenario.stacked_r())?;
        let innovation = round.stacked() - &h * &self.x;
        let n = scenario.dim();
        let p = (Matrix::identity(n, n) - &gain * &h) * &self.p;
        Ok(Self {
            x: &self.x + gain * innovation,
            p: linalg::symmetrized(p),
            k: self.k + 1,
        })
    }
}

pub fn centralized_gain(p: &Matrix, h: &Matrix, r: &Matrix) -> Result<Matrix, Error> {
    let s = linalg::symmetrized(h * p * h.transpose() + r);
    let chol = linalg::cholesky(&s).ok_or(Error::NotPositiveDefinite("centralized innovation covariance"))?;
    // K = P Hᵀ S⁻¹  ⇔  Kᵀ = S⁻¹ H P.
    Ok(chol.solve(&(h * p)).transpose())
}

/// Exact Gaussian posterior of θ given the prior and all rounds, in one shot:
/// `P = (P₀⁻¹ + Σₖ HᵀR⁻¹H)⁻¹`, `x = P (P₀⁻¹x₀ + Σₖ HᵀR⁻¹zₖ)`.
pub fn batch_posterior(
    scenario: &Scenario,
    rounds: &[MeasurementRound],
    init: Initialization,
) -> Result<(Vector, Matrix), Error> {
    let x0 = init.initial_mean(scenario);
    let p0 = init.initial_covariance(scenario);
    if rounds.is_empty() {
        return Ok((x0, p0));
    }
    let h = scenario.stacked_h();
    let r_inv = linalg::spd_inverse(&scenario.stacked_r(), "stacked R")?;
    let p0_inv = linalg::spd_inverse(&p0, "initial covariance")?;
    let ht_rinv = h.transpose() * &r_inv;
    let mut information = p0_inv.clone() + (&ht_rinv * &h) * rounds.len() as f64;
    linalg::symmetrize(&mut information);
    let mut info_vector = &p0_inv * &x0;
    for round in rounds {
        if !round.matches(scenario) {
            return Err(Error::DimensionMismatch("measurement round does not match scenario".into()));
        }
        info_vector += &ht_rinv * round.stacked();
    }
    let chol = linalg::cholesky(&information).ok_or(Error::NotPositiveDefinite("posterior information"))?;
    Ok((chol.solve(&info_vector), linalg::symmetrized(chol.inverse())))
}
