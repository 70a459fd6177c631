use alloc::vec::Vec;
use core::ops::Range;

use crate::error::Error;
use crate::linalg::{self, Matrix, Vector};
use crate::model::{MeasurementRound, Scenario};

/// Row layout of one agent's stacked innovation and its local innovation
/// matrix `H̃ᵢ`.
///
/// Rows are measurement residual blocks for `j ∈ Ω̄ᵢ` (ascending), followed by
/// `n`-row consensus blocks for `j ∈ Ωᵢ` (ascending).
#[derive(Debug, Clone, PartialEq)]
pub struct AgentGeometry {
    agent: usize,
    dim: usize,
    closed: Vec<usize>,
    open: Vec<usize>,
    measurement_offsets: Vec<usize>,
    measurement_rows: usize,
    h_tilde: Matrix,
}

impl AgentGeometry {
    fn new(scenario: &Scenario, agent: usize) -> Self {
        let graph = scenario.graph();
        let n = scenario.dim();
        let closed = graph.closed_neighborhood(agent).expect("agent in range");
        let open = graph.open_neighborhood(agent).expect("agent in range").to_vec();
        let mut measurement_offsets = Vec::with_capacity(closed.len());
        let mut rows = 0;
        for &j in &closed {
            measurement_offsets.push(rows);
            rows += scenario.measurement_dim(j);
        }
        let identity = Matrix::identity(n, n);
        let blocks = closed
            .iter()
            .map(|&j| &scenario.agent(j).h)
            .chain(open.iter().map(|_| &identity));
        let h_tilde = linalg::vstack(n, blocks);
        Self {
            agent,
            dim: n,
            closed,
            open,
            measurement_offsets,
            measurement_rows: rows,
            h_tilde,
        }
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    pub fn closed(&self) -> &[usize] {
        &self.closed
    }

    pub fn open(&self) -> &[usize] {
        &self.open
    }

    pub fn h_tilde(&self) -> &Matrix {
        &self.h_tilde
    }

    /// `rᵢ = Σ_{j∈Ω̄ᵢ} pⱼ + n|Ωᵢ|`.
    pub fn rows(&self) -> usize {
        self.h_tilde.nrows()
    }

    pub fn measurement_rows(&self) -> usize {
        self.measurement_rows
    }

    /// Rows of the measurement block of the `idx`-th closed-neighbourhood member.
    pub fn measurement_block(&self, idx: usize) -> Range<usize> {
        let start = self.measurement_offsets[idx];
        let end = self
            .measurement_offsets
            .get(idx + 1)
            .copied()
            .unwrap_or(self.measurement_rows);
        start..end
    }

    /// Rows of the consensus block of the `idx`-th open-neighbourhood member.
    pub fn consensus_block(&self, idx: usize) -> Range<usize> {
        let start = self.measurement_rows + idx * self.dim;
        start..start + self.dim
    }

    /// Position of agent `j` in the closed neighbourhood.
    pub fn closed_position(&self, j: usize) -> Option<usize> {
        self.closed.binary_search(&j).ok()
    }
}

/// Per-agent innovation layouts for a scenario; computed once and reused.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationGeometry {
    dim: usize,
    agents: Vec<AgentGeometry>,
}

impl InnovationGeometry {
    pub fn new(scenario: &Scenario) -> Self {
        Self {
            dim: scenario.dim(),
            agents: (0..scenario.agent_count())
                .map(|i| AgentGeometry::new(scenario, i))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn agent(&self, i: usize) -> &AgentGeometry {
        &self.agents[i]
    }

    pub fn agents(&self) -> &[AgentGeometry] {
        &self.agents
    }
}

/// `yᵢ = [zⱼ − Hⱼxᵢ for j ∈ Ω̄ᵢ ; xⱼ − xᵢ for j ∈ Ωᵢ]`.
pub fn stack_innovation(
    estimates: &[Vector],
    round: &MeasurementRound,
    scenario: &Scenario,
    geometry: &InnovationGeometry,
    i: usize,
) -> Result<Vector, Error> {
    if estimates.len() != scenario.agent_count() || estimates.iter().any(|x| x.len() != scenario.dim()) {
        return Err(Error::DimensionMismatch("estimates do not match scenario".into()));
    }
    if !round.matches(scenario) {
        return Err(Error::DimensionMismatch("measurement round does not match scenario".into()));
    }
    if i >= scenario.agent_count() {
        return Err(Error::AgentOutOfRange {
            index: i,
            agents: scenario.agent_count(),
        });
    }
    let g = geometry.agent(i);
    let xi = &estimates[i];
    let mut y = Vector::zeros(g.rows());
    for (idx, &j) in g.closed().iter().enumerate() {
        let residual = &round.z[j] - &scenario.agent(j).h * xi;
        y.rows_mut(g.measurement_block(idx).start, residual.len()).copy_from(&residual);
    }
    for (idx, &j) in g.open().iter().enumerate() {
        let diff = &estimates[j] - xi;
        y.rows_mut(g.consensus_block(idx).start, diff.len()).copy_from(&diff);
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::DirectedGraph;
    use crate::model::fixtures::{reference, row, scalar, with_graph};
    use crate::model::AgentModel;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn isolated_agent_has_only_its_measurement() {
        let s = with_graph(DirectedGraph::empty(3));
        let geo = InnovationGeometry::new(&s);
        let g = geo.agent(1);
        assert_eq!(g.h_tilde(), &s.agent(1).h);
        assert_eq!(g.rows(), 1);
        assert!(g.open().is_empty());
    }

    #[test]
    fn three_cycle_agent_two_layout() {
        let s = reference();
        let geo = InnovationGeometry::new(&s);
        let g = geo.agent(1);
        assert_eq!(g.closed(), &[0, 1]);
        assert_eq!(g.open(), &[0]);
        let expected = Matrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        assert_eq!(g.h_tilde(), &expected);
        assert_eq!(g.measurement_block(1), 1..2);
        assert_eq!(g.consensus_block(0), 2..4);
    }

    #[test]
    fn complete_pair_dimension() {
        let s = Scenario::new(
            Vector::zeros(3),
            Matrix::identity(3, 3),
            DirectedGraph::complete(2),
            vec![
                AgentModel::new(Matrix::identity(2, 3).rows(0, 2).into_owned(), Matrix::identity(2, 2)),
                AgentModel::new(row(&[0.0, 0.0, 1.0]), scalar(1.0)),
            ],
        )
        .unwrap();
        let geo = InnovationGeometry::new(&s);
        assert_eq!(geo.agent(0).rows(), 2 + 1 + 3);
    }

    #[test]
    fn hand_evaluated_innovation() {
        // Agent 2 of the 3-cycle with basis rows: x₁ = (1,0), x₂ = 0, z = 0.
        let s = Scenario::new(
            Vector::zeros(2),
            Matrix::identity(2, 2),
            DirectedGraph::cycle(3),
            vec![
                AgentModel::new(row(&[1.0, 0.0]), scalar(1.0)),
                AgentModel::new(row(&[0.0, 1.0]), scalar(1.0)),
                AgentModel::new(row(&[1.0, 0.0]), scalar(1.0)),
            ],
        )
        .unwrap();
        let geo = InnovationGeometry::new(&s);
        let x = vec![Vector::from_vec(vec![1.0, 0.0]), Vector::zeros(2), Vector::zeros(2)];
        let round = MeasurementRound::new(0, vec![Vector::zeros(1); 3]);
        let y = stack_innovation(&x, &round, &s, &geo, 1).unwrap();
        assert_eq!(y.as_slice(), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn consistent_data_gives_zero_innovation() {
        let s = reference();
        let geo = InnovationGeometry::new(&s);
        let x = Vector::from_vec(vec![0.3, -1.2]);
        let round = MeasurementRound::new(0, s.agents().iter().map(|a| &a.h * &x).collect());
        for i in 0..3 {
            let y = stack_innovation(&vec![x.clone(); 3], &round, &s, &geo, i).unwrap();
            assert_eq!(y.amax(), 0.0);
        }
    }

    proptest! {
        #[test]
        fn innovation_equals_error_form(
            theta in proptest::collection::vec(-3.0f64..3.0, 2),
            xs in proptest::collection::vec(-3.0f64..3.0, 6),
            vs in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            // yᵢ = H̃ᵢεᵢ + δᵢ with δᵢ = [vⱼ ; −εⱼ].
            let s = reference();
            let geo = InnovationGeometry::new(&s);
            let theta = Vector::from_vec(theta);
            let x: Vec<Vector> = xs.chunks(2).map(Vector::from_row_slice).collect();
            let round = MeasurementRound::new(
                0,
                (0..3).map(|j| &s.agent(j).h * &theta + Vector::from_element(1, vs[j])).collect(),
            );
            for i in 0..3 {
                let g = geo.agent(i);
                let eps = &theta - &x[i];
                let mut delta = Vector::zeros(g.rows());
                for (idx, &j) in g.closed().iter().enumerate() {
                    delta[g.measurement_block(idx).start] = vs[j];
                }
                for (idx, &j) in g.open().iter().enumerate() {
                    let ej = &theta - &x[j];
                    delta.rows_mut(g.consensus_block(idx).start, 2).copy_from(&(-ej));
                }
                let y = stack_innovation(&x, &round, &s, &geo, i).unwrap();
                let err = (g.h_tilde() * eps + delta - y).amax();
                prop_assert!(err < 1e-12);
            }
        }
    }
}
