//! Compact metric graphs.
//!
//! A [`MetricGraph`] is a finite multigraph whose edges carry positive
//! lengths. Points on the continuum are addressed as [`GraphPoint`]s, i.e.
//! an edge plus an arclength offset. Turning a finite [`PointSet`] into
//! vertices yields a [`RefinedGraph`], the combinatorial graph on which all
//! matrices downstream are indexed.

mod generate;
mod point;
mod refine;

pub use generate::{generate_graph, one_sum, GraphFamily};
pub use point::{GraphPoint, PointSet, PointSpec};
pub use refine::{is_admissible, make_admissible, refine, separates, RefinedEdge, RefinedGraph};

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An edge of a metric graph. Loops (`u == v`) and parallel edges are allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub id: usize,
    pub u: usize,
    pub v: usize,
    pub length: f64,
}

impl Edge {
    pub fn is_loop(&self) -> bool {
        self.u == self.v
    }
}

/// A connected metric graph with strictly positive, finite edge lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricGraph {
    vertex_count: usize,
    edges: Vec<Edge>,
    by_id: BTreeMap<usize, usize>,
}

/// Serialized form of a graph:
/// `{"vertices": N, "edges": [{"id": .., "from": .., "to": .., "length": ..}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub vertices: usize,
    pub edges: Vec<EdgeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub id: usize,
    pub from: usize,
    pub to: usize,
    pub length: f64,
}

/// Validate a graph description.
pub fn build_graph(spec: &GraphSpec) -> Result<MetricGraph> {
    let edges = spec
        .edges
        .iter()
        .map(|e| Edge {
            id: e.id,
            u: e.from,
            v: e.to,
            length: e.length,
        })
        .collect();
    MetricGraph::new(spec.vertices, edges)
}

impl MetricGraph {
    pub fn new(vertex_count: usize, edges: Vec<Edge>) -> Result<Self> {
        if vertex_count == 0 {
            return Err(Error::BadIndex("graph must have at least one vertex".into()));
        }
        let mut by_id = BTreeMap::new();
        for (k, e) in edges.iter().enumerate() {
            if e.u >= vertex_count || e.v >= vertex_count {
                return Err(Error::BadIndex(format!(
                    "edge {} joins {}-{} but the graph has {} vertices",
                    e.id, e.u, e.v, vertex_count
                )));
            }
            if !(e.length.is_finite() && e.length > 0.0) {
                return Err(Error::NonPositiveLength {
                    edge: e.id,
                    length: e.length,
                });
            }
            if by_id.insert(e.id, k).is_some() {
                return Err(Error::BadIndex(format!("duplicate edge id {}", e.id)));
            }
        }
        let graph = MetricGraph {
            vertex_count,
            edges,
            by_id,
        };
        if let Some(vertex) = graph.first_unreachable() {
            return Err(Error::Disconnected { vertex });
        }
        Ok(graph)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: GraphSpec = serde_json::from_str(text)?;
        build_graph(&spec)
    }

    pub fn to_spec(&self) -> GraphSpec {
        GraphSpec {
            vertices: self.vertex_count,
            edges: self
                .edges
                .iter()
                .map(|e| EdgeSpec {
                    id: e.id,
                    from: e.u,
                    to: e.v,
                    length: e.length,
                })
                .collect(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> Option<&Edge> {
        self.by_id.get(&id).map(|&k| &self.edges[k])
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    /// Multigraph degree: a loop contributes 2.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.vertex_count];
        for e in &self.edges {
            deg[e.u] += 1;
            deg[e.v] += 1;
        }
        deg
    }

    /// True when the graph has no cycles (including loops and parallel edges).
    pub fn is_tree(&self) -> bool {
        self.edges.len() + 1 == self.vertex_count
    }

    /// All vertices as a canonical point set.
    pub fn vertex_points(&self) -> PointSet {
        PointSet::from_sorted_unchecked((0..self.vertex_count).map(GraphPoint::Vertex).collect())
    }

    /// Canonical point at `offset` along edge `edge_id`.
    pub fn point(&self, edge_id: usize, offset: f64) -> Result<GraphPoint> {
        let edge = self
            .edge(edge_id)
            .ok_or_else(|| Error::BadPoint(format!("unknown edge {edge_id}")))?;
        if !offset.is_finite() || offset < 0.0 || offset > edge.length {
            return Err(Error::BadPoint(format!(
                "offset {offset} outside [0, {}] on edge {edge_id}",
                edge.length
            )));
        }
        Ok(if offset == 0.0 {
            GraphPoint::Vertex(edge.u)
        } else if offset == edge.length {
            GraphPoint::Vertex(edge.v)
        } else {
            GraphPoint::Interior {
                edge: edge_id,
                t: offset,
            }
        })
    }

    /// Check that `p` is canonical and lies on this graph.
    pub fn validate_point(&self, p: &GraphPoint) -> Result<()> {
        match *p {
            GraphPoint::Vertex(v) if v < self.vertex_count => Ok(()),
            GraphPoint::Vertex(v) => Err(Error::BadPoint(format!("unknown vertex {v}"))),
            GraphPoint::Interior { edge, t } => match self.point(edge, t)? {
                GraphPoint::Interior { .. } => Ok(()),
                GraphPoint::Vertex(_) => Err(Error::BadPoint(format!(
                    "point e{edge}:{t} is an endpoint and must be given as a vertex"
                ))),
            },
        }
    }

    pub fn points_from_specs(&self, specs: &[PointSpec]) -> Result<PointSet> {
        let pts = specs
            .iter()
            .map(|s| match *s {
                PointSpec::Vertex { vertex } => {
                    let p = GraphPoint::Vertex(vertex);
                    self.validate_point(&p)?;
                    Ok(p)
                }
                PointSpec::Edge { edge, t } => self.point(edge, t),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PointSet::new(pts))
    }

    pub fn points_from_json(&self, text: &str) -> Result<PointSet> {
        let specs: Vec<PointSpec> = serde_json::from_str(text)?;
        self.points_from_specs(&specs)
    }

    fn first_unreachable(&self) -> Option<usize> {
        let mut adj = vec![Vec::new(); self.vertex_count];
        for e in &self.edges {
            adj[e.u].push(e.v);
            adj[e.v].push(e.u);
        }
        let mut seen = vec![false; self.vertex_count];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(x) = queue.pop_front() {
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        seen.iter().position(|s| !s)
    }
}
