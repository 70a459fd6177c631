#![allow(dead_code)]

use ciest_core::{AgentModel, DirectedGraph, Matrix, Scenario, Vector};

pub fn row(values: &[f64]) -> Matrix {
    Matrix::from_row_slice(1, values.len(), values)
}

pub fn scalar(v: f64) -> Matrix {
    Matrix::from_element(1, 1, v)
}

/// 3-cycle, n = 2, H = [1 0], [0 1], [1 1], unit noise.
pub fn reference() -> Scenario {
    Scenario::new(
        Vector::from_vec(vec![1.0, -0.5]),
        Matrix::from_row_slice(2, 2, &[6.0, 1.0, 1.0, 4.0]),
        DirectedGraph::cycle(3),
        vec![
            AgentModel::new(row(&[1.0, 0.0]), scalar(1.0)),
            AgentModel::new(row(&[0.0, 1.0]), scalar(1.0)),
            AgentModel::new(row(&[1.0, 1.0]), scalar(1.0)),
        ],
    )
    .unwrap()
}

/// 4-ring, n = 2, heterogeneous rows and noise.
pub fn ring4() -> Scenario {
    Scenario::new(
        Vector::from_vec(vec![0.5, 0.0]),
        Matrix::from_row_slice(2, 2, &[5.0, -1.0, -1.0, 3.0]),
        DirectedGraph::cycle(4),
        vec![
            AgentModel::new(row(&[1.0, 0.0]), scalar(1.0)),
            AgentModel::new(row(&[0.0, 1.0]), scalar(0.5)),
            AgentModel::new(row(&[1.0, 0.0]), scalar(2.0)),
            AgentModel::new(row(&[1.0, -1.0]), scalar(1.0)),
        ],
    )
    .unwrap()
}

/// n = 3 basis rows on a 3-cycle.
pub fn basis_cycle() -> Scenario {
    Scenario::new(
        Vector::zeros(3),
        Matrix::identity(3, 3) * 4.0,
        DirectedGraph::cycle(3),
        (0..3)
            .map(|i| {
                let mut h = Matrix::zeros(1, 3);
                h[(0, i)] = 1.0;
                AgentModel::new(h, scalar(1.0))
            })
            .collect(),
    )
    .unwrap()
}

/// Three agents with full-rank local measurements and no links.
pub fn isolated() -> Scenario {
    Scenario::new(
        Vector::from_vec(vec![0.0, 1.0]),
        Matrix::identity(2, 2) * 2.0,
        DirectedGraph::empty(3),
        vec![
            AgentModel::new(Matrix::identity(2, 2), Matrix::identity(2, 2)),
            AgentModel::new(Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]), Matrix::identity(2, 2) * 0.5),
            AgentModel::new(Matrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, -1.0]), Matrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0])),
        ],
    )
    .unwrap()
}

/// Complete digraph on two agents, scalar parameter, distinct noise.
pub fn complete_pair() -> Scenario {
    Scenario::new(
        Vector::from_element(1, 0.0),
        scalar(1.0),
        DirectedGraph::complete(2),
        vec![AgentModel::new(scalar(1.0), scalar(1.0)), AgentModel::new(scalar(1.0), scalar(2.0))],
    )
    .unwrap()
}
