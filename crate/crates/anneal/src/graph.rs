//! Simple undirected graphs for the combinatorial models.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("edge ({0}, {1}) is a self-loop")]
    SelfLoop(u32, u32),
    #[error("edge ({0}, {1}) appears more than once")]
    DuplicateEdge(u32, u32),
    #[error("edge ({0}, {1}) references a vertex >= {2}")]
    VertexOutOfRange(u32, u32, u32),
}

/// Undirected graph on vertices `0..vertex_count`; edges are stored with the
/// smaller endpoint first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct Graph {
    vertex_count: u32,
    edges: Vec<(u32, u32)>,
    adjacency: Vec<Vec<u32>>,
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    n: u32,
    edges: Vec<(u32, u32)>,
}

impl TryFrom<RawGraph> for Graph {
    type Error = GraphError;
    fn try_from(raw: RawGraph) -> Result<Self, Self::Error> {
        Graph::new(raw.n, &raw.edges)
    }
}

impl From<Graph> for RawGraph {
    fn from(g: Graph) -> Self {
        RawGraph {
            n: g.vertex_count,
            edges: g.edges,
        }
    }
}

impl Graph {
    pub fn new(vertex_count: u32, edges: &[(u32, u32)]) -> Result<Self, GraphError> {
        let mut normalized = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u == v {
                return Err(GraphError::SelfLoop(u, v));
            }
            if u >= vertex_count || v >= vertex_count {
                return Err(GraphError::VertexOutOfRange(u, v, vertex_count));
            }
            normalized.push((u.min(v), u.max(v)));
        }
        let mut sorted = normalized.clone();
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                return Err(GraphError::DuplicateEdge(w[0].0, w[0].1));
            }
        }
        let mut adjacency = vec![Vec::new(); vertex_count as usize];
        for &(u, v) in &normalized {
            adjacency[u as usize].push(v);
            adjacency[v as usize].push(u);
        }
        Ok(Graph {
            vertex_count,
            edges: normalized,
            adjacency,
        })
    }

    /// Path on `n` vertices: edges (0,1), (1,2), …
    pub fn path(n: u32) -> Graph {
        let edges: Vec<(u32, u32)> = (1..n).map(|v| (v - 1, v)).collect();
        Graph::new(n, &edges).expect("path is always valid")
    }

    /// Complete graph on `n` vertices.
    pub fn complete(n: u32) -> Graph {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                edges.push((u, v));
            }
        }
        Graph::new(n, &edges).expect("complete graph is always valid")
    }

    /// Non-periodic `side × side` square grid.
    pub fn grid(side: u32) -> Graph {
        let id = |r: u32, c: u32| r * side + c;
        let mut edges = Vec::new();
        for r in 0..side {
            for c in 0..side {
                if c + 1 < side {
                    edges.push((id(r, c), id(r, c + 1)));
                }
                if r + 1 < side {
                    edges.push((id(r, c), id(r + 1, c)));
                }
            }
        }
        Graph::new(side * side, &edges).expect("grid is always valid")
    }

    #[inline]
    pub fn vertex_count(&self) -> u32 {
        self.vertex_count
    }

    #[inline]
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.adjacency[v as usize]
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert_eq!(Graph::new(2, &[(0, 0)]), Err(GraphError::SelfLoop(0, 0)));
        assert_eq!(
            Graph::new(2, &[(0, 1), (1, 0)]),
            Err(GraphError::DuplicateEdge(0, 1))
        );
        assert_eq!(
            Graph::new(2, &[(0, 2)]),
            Err(GraphError::VertexOutOfRange(0, 2, 2))
        );
    }

    #[test]
    fn builders() {
        let p3 = Graph::path(3);
        assert_eq!(p3.edge_count(), 2);
        assert_eq!(p3.neighbors(1), &[0, 2]);
        let k3 = Graph::complete(3);
        assert_eq!(k3.edge_count(), 3);
        assert_eq!(k3.max_degree(), 2);
        let g2 = Graph::grid(2);
        assert_eq!(g2.vertex_count(), 4);
        assert_eq!(g2.edge_count(), 4);
        let g3 = Graph::grid(3);
        assert_eq!(g3.edge_count(), 12);
    }
}
