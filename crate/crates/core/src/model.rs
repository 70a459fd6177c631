//! Problem instance: Gaussian prior, per-agent linear measurement models and
//! the communication graph, plus sampling of the parameter and measurements.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ValidationErrors};
use crate::graph::DirectedGraph;
use crate::linalg::{self, Matrix, Vector};

/// Measurement model `z_i = H_i θ + v_i`, `v_i ~ N(0, R_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentModel {
    pub h: Matrix,
    pub r: Matrix,
}

impl AgentModel {
    pub fn new(h: Matrix, r: Matrix) -> Self {
        Self { h, r }
    }

    pub fn measurement_dim(&self) -> usize {
        self.h.nrows()
    }
}

/// A validated problem instance. Construction checks every invariant, so all
/// downstream code can rely on consistent dimensions and SPD covariances.
#[derive(Debug, Clone)]
pub struct Scenario {
    theta_bar: Vector,
    sigma_theta: Matrix,
    graph: DirectedGraph,
    agents: Vec<AgentModel>,
    prior_factor: Matrix,
    noise_factors: Vec<Matrix>,
}

impl Scenario {
    pub fn new(
        theta_bar: Vector,
        sigma_theta: Matrix,
        graph: DirectedGraph,
        agents: Vec<AgentModel>,
    ) -> Result<Self, ValidationErrors> {
        let mut errors = ValidationErrors::default();
        let n = theta_bar.len();
        if n == 0 {
            errors.push("n", "parameter dimension must be positive");
        }
        if sigma_theta.shape() != (n, n) {
            errors.push(
                "sigma_theta",
                format!("sigma_theta must be {n}x{n}, found {}x{}", sigma_theta.nrows(), sigma_theta.ncols()),
            );
        } else if !linalg::is_positive_definite(&sigma_theta) {
            errors.push("sigma_theta", "sigma_theta not symmetric positive definite");
        }
        if agents.is_empty() {
            errors.push("agents", "at least one agent is required");
        }
        if graph.agents() != agents.len() {
            errors.push(
                "edges",
                format!("graph has {} agents but {} agent models were given", graph.agents(), agents.len()),
            );
        }
        for (idx, agent) in agents.iter().enumerate() {
            let label = idx + 1;
            let p = agent.h.nrows();
            if p == 0 {
                errors.push(format!("agents[{idx}].H"), format!("H_{label} has no rows"));
            }
            if agent.h.ncols() != n {
                errors.push(
                    format!("agents[{idx}].H"),
                    format!("H_{label} column count: expected {n}, found {}", agent.h.ncols()),
                );
            }
            if agent.r.shape() != (p, p) {
                errors.push(
                    format!("agents[{idx}].R"),
                    format!("R_{label} must be {p}x{p}, found {}x{}", agent.r.nrows(), agent.r.ncols()),
                );
            } else if p > 0 && !linalg::is_positive_definite(&agent.r) {
                errors.push(format!("agents[{idx}].R"), format!("R_{label} not positive definite"));
            }
        }
        if !errors.is_empty() {
            return Err(errors);
        }
        let prior_factor = linalg::cholesky(&sigma_theta).expect("validated").l();
        let noise_factors = agents
            .iter()
            .map(|a| linalg::cholesky(&a.r).expect("validated").l())
            .collect();
        Ok(Self {
            theta_bar,
            sigma_theta,
            graph,
            agents,
            prior_factor,
            noise_factors,
        })
    }

    /// Parameter dimension `n`.
    pub fn dim(&self) -> usize {
        self.theta_bar.len()
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn theta_bar(&self) -> &Vector {
        &self.theta_bar
    }

    pub fn sigma_theta(&self) -> &Matrix {
        &self.sigma_theta
    }

    pub fn graph(&self) -> &DirectedGraph {
        &self.graph
    }

    pub fn agents(&self) -> &[AgentModel] {
        &self.agents
    }

    pub fn agent(&self, i: usize) -> &AgentModel {
        &self.agents[i]
    }

    pub fn measurement_dim(&self, i: usize) -> usize {
        self.agents[i].measurement_dim()
    }

    /// `p = Σ p_i`.
    pub fn total_measurement_dim(&self) -> usize {
        self.agents.iter().map(AgentModel::measurement_dim).sum()
    }

    /// `H = [H_1; …; H_m]`.
    pub fn stacked_h(&self) -> Matrix {
        linalg::vstack(self.dim(), self.agents.iter().map(|a| &a.h))
    }

    /// `R = blkdiag(R_1, …, R_m)`.
    pub fn stacked_r(&self) -> Matrix {
        linalg::block_diagonal(self.agents.iter().map(|a| &a.r))
    }

    /// Same prior, only agent `i`, no edges.
    pub fn local(&self, i: usize) -> Scenario {
        Scenario {
            theta_bar: self.theta_bar.clone(),
            sigma_theta: self.sigma_theta.clone(),
            graph: DirectedGraph::empty(1),
            agents: alloc::vec![self.agents[i].clone()],
            prior_factor: self.prior_factor.clone(),
            noise_factors: alloc::vec![self.noise_factors[i].clone()],
        }
    }

    /// Draws `θ = θ̄ + L w` with `L Lᵀ = Σ_θ` and `w ~ N(0, I)`.
    pub fn sample_parameter<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        &self.theta_bar + &self.prior_factor * standard_normal(self.dim(), rng)
    }

    /// Draws one synchronous round of measurements `z_i = H_i θ + v_i`.
    ///
    /// `noise` holds one independent stream per agent.
    pub fn sample_round<R: Rng>(&self, theta: &Vector, k: usize, noise: &mut [R]) -> MeasurementRound {
        assert_eq!(noise.len(), self.agent_count(), "one noise stream per agent");
        let z = self
            .agents
            .iter()
            .zip(&self.noise_factors)
            .zip(noise.iter_mut())
            .map(|((agent, factor), rng)| {
                &agent.h * theta + factor * standard_normal(agent.measurement_dim(), rng)
            })
            .collect();
        MeasurementRound { k, z }
    }
}

fn standard_normal<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vector {
    Vector::from_iterator(len, (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Measurements of all agents at iteration `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRound {
    pub k: usize,
    pub z: Vec<Vector>,
}

impl MeasurementRound {
    pub fn new(k: usize, z: Vec<Vector>) -> Self {
        Self { k, z }
    }

    /// `z_k = [z_1; …; z_m]`.
    pub fn stacked(&self) -> Vector {
        let len = self.z.iter().map(|z| z.len()).sum();
        Vector::from_iterator(len, self.z.iter().flat_map(|z| z.iter().copied()))
    }

    pub fn matches(&self, scenario: &Scenario) -> bool {
        self.z.len() == scenario.agent_count()
            && self
                .z
                .iter()
                .zip(scenario.agents())
                .all(|(z, a)| z.len() == a.measurement_dim())
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn streams(seed: u64, m: usize) -> Vec<ChaCha8Rng> {
        (0..m)
            .map(|i| {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                r.set_stream(i as u64 + 1);
                r
            })
            .collect()
    }

    #[test]
    fn well_formed_reference_validates() {
        let s = reference();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.total_measurement_dim(), 3);
        assert_eq!(s.stacked_h().shape(), (3, 2));
    }

    #[test]
    fn negative_noise_variance_rejected() {
        let err = Scenario::new(
            Vector::zeros(2),
            Matrix::identity(2, 2),
            DirectedGraph::cycle(3),
            alloc::vec![
                AgentModel::new(row(&[1.0, 0.0]), scalar(-1.0)),
                AgentModel::new(row(&[0.0, 1.0]), scalar(1.0)),
                AgentModel::new(row(&[1.0, 1.0]), scalar(1.0)),
            ],
        )
        .unwrap_err();
        assert!(err.contains("R_1 not positive definite"), "{err}");
        assert_eq!(err.issues()[0].field, "agents[0].R");
    }

    #[test]
    fn wrong_column_count_rejected() {
        let err = Scenario::new(
            Vector::zeros(2),
            Matrix::identity(2, 2),
            DirectedGraph::cycle(3),
            alloc::vec![
                AgentModel::new(row(&[1.0, 0.0]), scalar(1.0)),
                AgentModel::new(row(&[0.0, 1.0, 0.0]), scalar(1.0)),
                AgentModel::new(row(&[1.0, 1.0]), scalar(1.0)),
            ],
        )
        .unwrap_err();
        assert!(err.contains("H_2 column count"), "{err}");
    }

    #[test]
    fn every_problem_is_reported() {
        let err = Scenario::new(
            Vector::zeros(2),
            Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]),
            DirectedGraph::cycle(2),
            alloc::vec![AgentModel::new(row(&[1.0]), Matrix::identity(2, 2))],
        )
        .unwrap_err();
        let fields: Vec<_> = err.issues().iter().map(|i| i.field.as_str()).collect();
        assert!(fields.contains(&"sigma_theta"));
        assert!(fields.contains(&"edges"));
        assert!(fields.contains(&"agents[0].H"));
        assert!(fields.contains(&"agents[0].R"));
    }

    #[test]
    fn tight_prior_samples_near_mean() {
        let s = Scenario::new(
            Vector::from_vec(alloc::vec![1.0, 2.0]),
            Matrix::identity(2, 2) * 1e-12,
            DirectedGraph::empty(1),
            alloc::vec![AgentModel::new(row(&[1.0, 0.0]), scalar(1e-12))],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let theta = s.sample_parameter(&mut rng);
        assert!((&theta - s.theta_bar()).amax() < 1e-5);
        let round = s.sample_round(&theta, 0, &mut streams(3, 1));
        assert!((&round.z[0] - &s.agent(0).h * &theta).amax() < 1e-5);
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = reference();
        let a = s.sample_parameter(&mut ChaCha8Rng::seed_from_u64(11));
        let b = s.sample_parameter(&mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a, b);
        let ra = s.sample_round(&a, 4, &mut streams(5, 3));
        let rb = s.sample_round(&a, 4, &mut streams(5, 3));
        assert_eq!(ra, rb);
        assert!(ra.matches(&s));
    }

    #[test]
    fn parameter_moments() {
        let s = Scenario::new(
            Vector::from_vec(alloc::vec![0.5, -1.0]),
            Matrix::identity(2, 2),
            DirectedGraph::empty(1),
            alloc::vec![AgentModel::new(row(&[1.0, 0.0]), scalar(1.0))],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let mut mean = Vector::zeros(2);
        let mut second = Matrix::zeros(2, 2);
        for _ in 0..n {
            let d = s.sample_parameter(&mut rng) - s.theta_bar();
            mean += &d;
            second += &d * d.transpose();
        }
        mean /= n as f64;
        second /= n as f64;
        assert!(mean.amax() < 0.02, "{mean}");
        assert!((second - Matrix::identity(2, 2)).amax() < 0.05);
    }

    #[test]
    fn noise_moments_and_independence() {
        let s = Scenario::new(
            Vector::zeros(1),
            scalar(1.0),
            DirectedGraph::empty(2),
            alloc::vec![
                AgentModel::new(scalar(1.0), scalar(1.0)),
                AgentModel::new(scalar(1.0), scalar(1.0)),
            ],
        )
        .unwrap();
        let theta = Vector::from_element(1, 0.7);
        let mut rngs = streams(77, 2);
        let n = 100_000;
        let (mut s0, mut s00, mut s01, mut lag) = (0.0, 0.0, 0.0, 0.0);
        let mut prev = 0.0;
        for k in 0..n {
            let r = s.sample_round(&theta, k, &mut rngs);
            let v0 = r.z[0][0] - 0.7;
            let v1 = r.z[1][0] - 0.7;
            s0 += r.z[0][0];
            s00 += v0 * v0;
            s01 += v0 * v1;
            lag += v0 * prev;
            prev = v0;
        }
        let nf = n as f64;
        let mean = s0 / nf;
        let var = s00 / nf - (mean - 0.7) * (mean - 0.7);
        assert!((var - 1.0).abs() < 0.05);
        assert!((s01 / nf).abs() < 0.05);
        // Whiteness: lag-1 autocovariance inside 3/√N.
        assert!((lag / nf).abs() < 3.0 / nf.sqrt());
    }
}
