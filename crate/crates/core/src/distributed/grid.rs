use alloc::vec::Vec;

use crate::graph::DirectedGraph;
use crate::linalg::{self, Matrix};

/// Which error cross-covariance blocks are tracked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceMode {
    /// All `m²` blocks, computed analytically offline.
    #[default]
    ExactGrid,
    /// Blocks outside closed neighbourhoods pinned to zero.
    PaperSparse,
}

impl CovarianceMode {
    /// Whether block `(i, j)` is tracked. In sparse mode a pair is tracked if
    /// either agent lies in the other's closed neighbourhood, so the tracked
    /// set stays closed under transposition on directed graphs.
    pub fn tracks(self, graph: &DirectedGraph, i: usize, j: usize) -> bool {
        match self {
            Self::ExactGrid => true,
            Self::PaperSparse => i == j || graph.adjacency(i, j) || graph.adjacency(j, i),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::ExactGrid => "exact-grid",
            Self::PaperSparse => "paper-sparse",
        }
    }
}

impl core::str::FromStr for CovarianceMode {
    type Err = alloc::string::String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact-grid" => Ok(Self::ExactGrid),
            "paper-sparse" => Ok(Self::PaperSparse),
            other => Err(alloc::format!(
                "unknown covariance mode '{other}' (expected exact-grid or paper-sparse)"
            )),
        }
    }
}

/// `m × m` grid of `n × n` error covariance blocks `Pᵢⱼ = E[εᵢεⱼᵀ]`, kept
/// transpose-symmetric: `Pⱼᵢ = Pᵢⱼᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceGrid {
    agents: usize,
    dim: usize,
    blocks: Vec<Matrix>,
}

impl CovarianceGrid {
    pub fn zeros(agents: usize, dim: usize) -> Self {
        Self {
            agents,
            dim,
            blocks: (0..agents * agents).map(|_| Matrix::zeros(dim, dim)).collect(),
        }
    }

    /// Every block equal to `block` (which must be symmetric).
    pub fn uniform(agents: usize, block: &Matrix) -> Self {
        Self {
            agents,
            dim: block.nrows(),
            blocks: (0..agents * agents).map(|_| block.clone()).collect(),
        }
    }

    /// Splits an `mn × mn` joint covariance into blocks.
    pub fn from_joint(agents: usize, dim: usize, joint: &Matrix) -> Self {
        assert_eq!(joint.shape(), (agents * dim, agents * dim), "joint covariance shape");
        let blocks = (0..agents * agents)
            .map(|idx| {
                let (i, j) = (idx / agents, idx % agents);
                joint.view((i * dim, j * dim), (dim, dim)).into_owned()
            })
            .collect();
        Self { agents, dim, blocks }
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &Matrix {
        &self.blocks[i * self.agents + j]
    }

    /// Sets `Pᵢⱼ` and `Pⱼᵢ = Pᵢⱼᵀ`.
    pub fn set(&mut self, i: usize, j: usize, block: Matrix) {
        if i == j {
            self.blocks[i * self.agents + i] = linalg::symmetrized(block);
        } else {
            self.blocks[j * self.agents + i] = block.transpose();
            self.blocks[i * self.agents + j] = block;
        }
    }

    pub fn diagonal(&self, i: usize) -> &Matrix {
        self.get(i, i)
    }

    pub fn diagonal_mut(&mut self, i: usize) -> &mut Matrix {
        &mut self.blocks[i * self.agents + i]
    }

    pub fn diagonal_blocks(&self) -> Vec<Matrix> {
        (0..self.agents).map(|i| self.diagonal(i).clone()).collect()
    }

    pub fn traces(&self) -> Vec<f64> {
        (0..self.agents).map(|i| self.diagonal(i).trace()).collect()
    }

    /// Zeroes every block the mode does not track.
    pub fn restrict(&mut self, mode: CovarianceMode, graph: &DirectedGraph) {
        for i in 0..self.agents {
            for j in 0..self.agents {
                if !mode.tracks(graph, i, j) {
                    self.blocks[i * self.agents + j].fill(0.0);
                }
            }
        }
    }

    /// The full `mn × mn` joint error covariance.
    pub fn to_joint(&self) -> Matrix {
        let (m, n) = (self.agents, self.dim);
        let mut out = Matrix::zeros(m * n, m * n);
        for i in 0..m {
            for j in 0..m {
                out.view_mut((i * n, j * n), (n, n)).copy_from(self.get(i, j));
            }
        }
        out
    }

    /// `E‖xᵢ − xⱼ‖² = tr(Pᵢ + Pⱼ − Pᵢⱼ − Pⱼᵢ)`, the expected squared disagreement.
    pub fn expected_disagreement(&self, i: usize, j: usize) -> f64 {
        self.diagonal(i).trace() + self.diagonal(j).trace() - 2.0 * self.get(i, j).trace()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn is_transpose_symmetric(&self, tol: f64) -> bool {
        (0..self.agents).all(|i| {
            (0..self.agents).all(|j| (self.get(i, j) - self.get(j, i).transpose()).amax() <= tol)
        })
    }
}
