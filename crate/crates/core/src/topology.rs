//! Agent communication graph and subgraph views.
//!
//! Indices are 0-based here. Configs and reports use 1-based agent numbers
//! (`v_1..v_n`); conversion happens at the I/O boundary.

use crate::error::{Error, Result};

/// Directed weighted graph `G = {V, E, A}`. `a[i][j]` is the linking
/// intensity from agent `i` to agent `j`; weights may be negative.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    n: usize,
    adjacency: Vec<f64>,
    edges: Vec<(usize, usize)>,
}

impl Topology {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyTopology);
        }
        let mut adjacency = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotSquare {
                    row: i,
                    len: row.len(),
                    n,
                });
            }
            for (j, &a) in row.iter().enumerate() {
                if !a.is_finite() {
                    return Err(Error::NonFiniteWeight { row: i, col: j });
                }
                if i == j && a != 0.0 {
                    return Err(Error::NonZeroDiagonal { index: i, value: a });
                }
            }
            adjacency.extend_from_slice(row);
        }
        let edges = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| adjacency[i * n + j] != 0.0)
            .collect();
        Ok(Self { n, adjacency, edges })
    }

    /// Graph with no edges.
    pub fn empty(n: usize) -> Result<Self> {
        Self::new(vec![vec![0.0; n]; n])
    }

    /// The 10-agent adjacency matrix of the reference experiment.
    pub fn reference_experiment() -> Self {
        Self::new(reference_adjacency()).expect("reference matrix is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.adjacency.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// Ordered pairs `(i, j)` with `a_ij != 0`, in row-major order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.n {
            Ok(())
        } else {
            Err(Error::AgentOutOfRange { index: i, n: self.n })
        }
    }

    /// Out-neighbors of `i` with their weights, ascending by `j`.
    pub fn neighbors(&self, i: usize) -> Result<Vec<(usize, f64)>> {
        self.check_index(i)?;
        Ok(self.row_support(i).collect())
    }

    pub(crate) fn row_support(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.adjacency[i * self.n..(i + 1) * self.n]
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, a)| a != 0.0)
    }

    /// Effective input `u_i + sum_j a_ji * u_j` (column `i` of the matrix).
    pub fn coupled_input(&self, i: usize, u: &[f64]) -> Result<f64> {
        self.check_index(i)?;
        if u.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: u.len(),
            });
        }
        let coupling: f64 = (0..self.n).map(|j| self.weight(j, i) * u[j]).sum();
        Ok(u[i] + coupling)
    }
}

pub fn reference_adjacency() -> Vec<Vec<f64>> {
    vec![
        vec![0.0, 0.0, 0.1, 0.0, 0.0, 0.2, 0.0, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.3, 0.1, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0],
        vec![-0.2, 0.2, 0.0, 0.0, 0.1, 0.0, 0.0, 0.0, 0.03, 0.1],
        vec![0.0, -0.1, 0.0, 0.0, 0.0, 0.5, 0.2, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, -0.1, -0.03, 0.0, 0.0, 0.0, 0.0, 0.4, 0.0],
        vec![-0.02, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 0.2, 0.0, 0.0, 0.0, 0.4, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 0.1, 0.2, 0.0, -0.1, 0.0, 0.3, 0.0],
        vec![0.0, 0.0, -0.1, 0.0, 0.0, 0.0, 0.0, 0.2, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 0.05, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    ]
}

/// Critical-agent subgraph `G^s`: a member set plus the retained subset of
/// the parent's edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgraph {
    n: usize,
    member_mask: Vec<bool>,
    edge_mask: Vec<bool>,
}

impl Subgraph {
    /// The whole parent graph viewed as a subgraph.
    pub fn full(topo: &Topology) -> Self {
        let n = topo.n();
        let mut edge_mask = vec![false; n * n];
        for &(i, j) in topo.edges() {
            edge_mask[i * n + j] = true;
        }
        Self {
            n,
            member_mask: vec![true; n],
            edge_mask,
        }
    }

    /// Builds a subgraph from explicit members and edges, checking that
    /// every edge exists in the parent and joins two members.
    pub fn from_parts(topo: &Topology, members: &[usize], edges: &[(usize, usize)]) -> Result<Self> {
        let n = topo.n();
        let mut sub = Self {
            n,
            member_mask: vec![false; n],
            edge_mask: vec![false; n * n],
        };
        for &m in members {
            topo.check_index(m)?;
            sub.member_mask[m] = true;
        }
        for &(i, j) in edges {
            topo.check_index(i)?;
            topo.check_index(j)?;
            sub.edge_mask[i * n + j] = true;
        }
        sub.check_structure(topo)
            .map_err(|reason| Error::param("subgraph", reason))?;
        Ok(sub)
    }

    pub fn is_member(&self, i: usize) -> bool {
        self.member_mask[i]
    }

    pub fn retains(&self, i: usize, j: usize) -> bool {
        self.edge_mask[i * self.n + j]
    }

    pub fn members(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.member_mask[i]).collect()
    }

    pub fn member_count(&self) -> usize {
        self.member_mask.iter().filter(|m| **m).count()
    }

    pub fn retained_edges(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|i| (0..self.n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.retains(i, j))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_mask.iter().filter(|e| **e).count()
    }

    /// Retained out-edges of `i` with their parent weights, ascending by `j`.
    pub fn active_neighbors(&self, topo: &Topology, i: usize) -> Vec<(usize, f64)> {
        topo.row_support(i).filter(|&(j, _)| self.retains(i, j)).collect()
    }

    pub fn has_out_edges(&self, i: usize) -> bool {
        self.edge_mask[i * self.n..(i + 1) * self.n].iter().any(|e| *e)
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) {
        self.edge_mask[i * self.n + j] = false;
    }

    /// Drops `i` from the member set together with every retained edge
    /// touching it.
    pub fn remove_member(&mut self, i: usize) {
        self.member_mask[i] = false;
        for k in 0..self.n {
            self.edge_mask[i * self.n + k] = false;
            self.edge_mask[k * self.n + i] = false;
        }
    }

    /// Structural invariants: members lie inside the parent, retained edges
    /// are parent edges and connect members only.
    pub fn check_structure(&self, topo: &Topology) -> std::result::Result<(), String> {
        if self.n != topo.n() {
            return Err(format!("subgraph sized for {} agents, parent has {}", self.n, topo.n()));
        }
        for (i, j) in self.retained_edges() {
            if topo.weight(i, j) == 0.0 {
                return Err(format!("edge ({}, {}) is not in the parent graph", i + 1, j + 1));
            }
            if !self.member_mask[i] || !self.member_mask[j] {
                return Err(format!("edge ({}, {}) touches a non-member", i + 1, j + 1));
            }
        }
        Ok(())
    }
}
