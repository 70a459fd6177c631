//! Directed communication graph, neighbourhoods and the connectivity matrix.
//!
//! Convention: `a_ij = 1` iff there is an edge `j -> i`, i.e. agent `i`
//! receives from agent `j`. Neighbourhoods are always iterated in ascending
//! agent index; every stacked vector and matrix in the crate uses that order.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    agents: usize,
    /// Row-major `a_ij`.
    adjacency: Vec<bool>,
    /// In-neighbours of each agent, ascending.
    open: Vec<Vec<usize>>,
}

impl DirectedGraph {
    /// Builds a graph from `(from, to)` edges.
    pub fn new(agents: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, Error> {
        let mut adjacency = vec![false; agents * agents];
        for (from, to) in edges {
            for index in [from, to] {
                if index >= agents {
                    return Err(Error::AgentOutOfRange { index, agents });
                }
            }
            if from == to {
                return Err(Error::SelfLoop(from));
            }
            let cell = &mut adjacency[to * agents + from];
            if *cell {
                return Err(Error::DuplicateEdge { from, to });
            }
            *cell = true;
        }
        Ok(Self::from_cells(agents, adjacency))
    }

    /// Builds a graph from a row-major 0/1 adjacency matrix.
    pub fn from_adjacency(agents: usize, entries: &[u8]) -> Result<Self, Error> {
        if entries.len() != agents * agents {
            return Err(Error::DimensionMismatch(alloc::format!(
                "adjacency has {} entries, expected {}",
                entries.len(),
                agents * agents
            )));
        }
        let mut adjacency = Vec::with_capacity(entries.len());
        for (cell, &a) in entries.iter().enumerate() {
            match a {
                0 => adjacency.push(false),
                1 if cell / agents == cell % agents => return Err(Error::SelfLoop(cell % agents)),
                1 => adjacency.push(true),
                _ => {
                    return Err(Error::DimensionMismatch(alloc::format!(
                        "adjacency entry {a} is not 0 or 1"
                    )))
                }
            }
        }
        Ok(Self::from_cells(agents, adjacency))
    }

    fn from_cells(agents: usize, adjacency: Vec<bool>) -> Self {
        let open = (0..agents)
            .map(|i| (0..agents).filter(|&j| adjacency[i * agents + j]).collect())
            .collect();
        Self {
            agents,
            adjacency,
            open,
        }
    }

    pub fn empty(agents: usize) -> Self {
        Self::from_cells(agents, vec![false; agents * agents])
    }

    /// Directed cycle `0 -> 1 -> ... -> m-1 -> 0`.
    pub fn cycle(agents: usize) -> Self {
        let edges = (0..agents).map(|j| (j, (j + 1) % agents)).filter(|(a, b)| a != b);
        Self::new(agents, edges).expect("cycle edges are valid")
    }

    /// Every ordered pair of distinct agents is connected.
    pub fn complete(agents: usize) -> Self {
        let mut cells = vec![true; agents * agents];
        for i in 0..agents {
            cells[i * agents + i] = false;
        }
        Self::from_cells(agents, cells)
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    /// `a_ij`: whether `i` receives from `j`.
    pub fn adjacency(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.agents + j]
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.adjacency(to, from)
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.agents).flat_map(move |to| self.open[to].iter().map(move |&from| (from, to)))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().filter(|a| **a).count()
    }

    /// Graph with the edge `from -> to` added (no-op if already present).
    pub fn with_edge(&self, from: usize, to: usize) -> Result<Self, Error> {
        let mut edges: Vec<_> = self.edges().filter(|&e| e != (from, to)).collect();
        edges.push((from, to));
        Self::new(self.agents, edges)
    }

    fn check(&self, i: usize) -> Result<(), Error> {
        if i < self.agents {
            Ok(())
        } else {
            Err(Error::AgentOutOfRange {
                index: i,
                agents: self.agents,
            })
        }
    }

    /// Ωᵢ: agents `j` with an edge `j -> i`, ascending.
    pub fn open_neighborhood(&self, i: usize) -> Result<&[usize], Error> {
        self.check(i)?;
        Ok(&self.open[i])
    }

    /// Ω̄ᵢ = {i} ∪ Ωᵢ, ascending.
    pub fn closed_neighborhood(&self, i: usize) -> Result<Vec<usize>, Error> {
        let open = self.open_neighborhood(i)?;
        let mut closed = Vec::with_capacity(open.len() + 1);
        let split = open.partition_point(|&j| j < i);
        closed.extend_from_slice(&open[..split]);
        closed.push(i);
        closed.extend_from_slice(&open[split..]);
        Ok(closed)
    }

    /// Ã = I + A + A² + … + A^{m−1} in exact integer arithmetic.
    ///
    /// Entry `(i, j)` counts the directed walks from `j` to `i` of length
    /// `0..m`. Overflow is reported rather than wrapped.
    pub fn connectivity_matrix(&self) -> Result<ConnectivityMatrix, Error> {
        let m = self.agents;
        let identity = |i: usize, j: usize| u64::from(i == j);
        // Horner: Ã = I + A(I + A(I + … )).
        let mut acc: Vec<u64> = (0..m * m).map(|c| identity(c / m, c % m)).collect();
        for _ in 1..m {
            let mut next = vec![0u64; m * m];
            for i in 0..m {
                for j in 0..m {
                    let mut sum = identity(i, j);
                    for &l in &self.open[i] {
                        sum = sum.checked_add(acc[l * m + j]).ok_or(Error::WalkCountOverflow)?;
                    }
                    next[i * m + j] = sum;
                }
            }
            acc = next;
        }
        Ok(ConnectivityMatrix {
            agents: m,
            counts: acc,
        })
    }

    /// Whether every agent is reachable from every other agent, i.e. Ã > 0.
    ///
    /// Computed on reachability rather than walk counts so it cannot overflow.
    pub fn is_connected(&self) -> bool {
        let m = self.agents;
        (0..m).all(|source| {
            let mut seen = vec![false; m];
            let mut stack = vec![source];
            seen[source] = true;
            while let Some(u) = stack.pop() {
                for v in 0..m {
                    if !seen[v] && self.adjacency(v, u) {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            seen.iter().all(|s| *s)
        })
    }
}

/// Walk-count matrix Ã with `ã_ij` = number of walks `j -> i` of length `< m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectivityMatrix {
    agents: usize,
    counts: Vec<u64>,
}

impl ConnectivityMatrix {
    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.agents + j]
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.counts[i * self.agents..(i + 1) * self.agents]
    }

    pub fn is_positive(&self) -> bool {
        self.counts.iter().all(|c| *c > 0)
    }
}
