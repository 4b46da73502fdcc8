//! Finite metric graphs: vertices, edges carrying lengths, and adjacency.
//!
//! Every edge `e` is identified with the interval `[0, length]`, the
//! coordinate running from `tail` (at 0) to `head` (at `length`). Positions
//! are layout metadata; the metric structure is carried by lengths alone.

use std::fmt;

use petgraph::graph::{NodeIndex, UnGraph};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeKind {
    Horizontal,
    Up,
    Down,
    HalflineStub,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EdgeKind::Horizontal => "horizontal",
            EdgeKind::Up => "up",
            EdgeKind::Down => "down",
            EdgeKind::HalflineStub => "halfline-stub",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vertex {
    pub id: usize,
    pub position: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub id: usize,
    pub tail: usize,
    pub head: usize,
    pub length: f64,
    pub kind: EdgeKind,
}

impl Edge {
    /// The endpoint of `self` opposite to `v`.
    pub fn other(&self, v: usize) -> usize {
        if self.tail == v {
            self.head
        } else {
            self.tail
        }
    }
}

/// Which end of an edge a vertex sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    /// The vertex is the edge's tail (coordinate 0).
    Outgoing,
    /// The vertex is the edge's head (coordinate `length`).
    Incoming,
}

/// A point of the graph given by an edge and an arclength offset from its tail.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphPoint {
    pub edge: usize,
    pub offset: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricGraph {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, Orientation)>>,
    boundary: Vec<bool>,
}

impl MetricGraph {
    /// Assemble a graph without checking it. Edges whose endpoints are not
    /// vertex ids are kept in `edges` but left out of the adjacency, so that
    /// [`validate`] can report them.
    pub fn from_parts(vertices: Vec<Vertex>, edges: Vec<Edge>) -> Self {
        let mut adjacency = vec![Vec::new(); vertices.len()];
        for e in &edges {
            if let Some(list) = adjacency.get_mut(e.tail) {
                list.push((e.id, Orientation::Outgoing));
            }
            if let Some(list) = adjacency.get_mut(e.head) {
                list.push((e.id, Orientation::Incoming));
            }
        }
        let boundary = vec![false; vertices.len()];
        MetricGraph { vertices, edges, adjacency, boundary }
    }

    /// Mark the truncation boundary: vertices where the infinite graph has
    /// been cut off.
    pub fn with_boundary(mut self, ids: impl IntoIterator<Item = usize>) -> Self {
        for id in ids {
            if let Some(flag) = self.boundary.get_mut(id) {
                *flag = true;
            }
        }
        self
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &Edge {
        &self.edges[id]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn adjacency(&self, v: usize) -> &[(usize, Orientation)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        self.boundary.iter().enumerate().filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    /// Copy of the graph with edge `id` reversed (tail and head swapped).
    pub fn with_flipped_edge(&self, id: usize) -> Self {
        let mut edges = self.edges.clone();
        let e = &mut edges[id];
        std::mem::swap(&mut e.tail, &mut e.head);
        let boundary = self.boundary.clone();
        let mut g = MetricGraph::from_parts(self.vertices.clone(), edges);
        g.boundary = boundary;
        g
    }

    fn petgraph(&self) -> UnGraph<(), f64> {
        let n = self.vertices.len();
        let mut g = UnGraph::with_capacity(n, self.edges.len());
        for _ in 0..n {
            g.add_node(());
        }
        for e in &self.edges {
            if e.tail < n && e.head < n {
                g.add_edge(NodeIndex::new(e.tail), NodeIndex::new(e.head), e.length);
            }
        }
        g
    }

    pub fn is_connected(&self) -> bool {
        self.vertices.is_empty() || petgraph::algo::connected_components(&self.petgraph()) == 1
    }

    /// Shortest-path distances from vertex `source` to every vertex.
    pub fn distances_from(&self, source: usize) -> Vec<f64> {
        let g = self.petgraph();
        let map = petgraph::algo::dijkstra(&g, NodeIndex::new(source), None, |e| *e.weight());
        let mut out = vec![f64::INFINITY; self.vertices.len()];
        for (node, d) in map {
            out[node.index()] = d;
        }
        out
    }

    /// Shortest-path distances from an interior point to every vertex.
    pub fn distances_from_point(&self, pt: GraphPoint) -> Vec<f64> {
        let e = &self.edges[pt.edge];
        let from_tail = self.distances_from(e.tail);
        let from_head = self.distances_from(e.head);
        from_tail
            .iter()
            .zip(&from_head)
            .map(|(dt, dh)| (pt.offset + dt).min(e.length - pt.offset + dh))
            .collect()
    }

    /// Distance from the source of `vertex_dist` to the point at `offset` on
    /// `edge`. When the source is itself a point of `edge`, pass it as
    /// `source` so the direct path along the edge is considered.
    pub fn point_distance(
        &self,
        vertex_dist: &[f64],
        source: Option<GraphPoint>,
        edge: usize,
        offset: f64,
    ) -> f64 {
        let e = &self.edges[edge];
        let mut d = (vertex_dist[e.tail] + offset).min(vertex_dist[e.head] + e.length - offset);
        if let Some(src) = source {
            if src.edge == edge {
                d = d.min((offset - src.offset).abs());
            }
        }
        d
    }
}

/// Check every structural invariant; returns one message per violation.
pub fn validate(g: &MetricGraph) -> Vec<String> {
    let mut out = Vec::new();
    let n = g.vertices.len();
    for (i, v) in g.vertices.iter().enumerate() {
        if v.id != i {
            out.push(format!("vertex {i}: id {} not contiguous", v.id));
        }
        if !(v.position[0].is_finite() && v.position[1].is_finite()) {
            out.push(format!("vertex {i}: non-finite position"));
        }
    }
    let mut endpoints_ok = true;
    for (i, e) in g.edges.iter().enumerate() {
        if e.id != i {
            out.push(format!("edge {i}: id {} not contiguous", e.id));
        }
        for end in [e.tail, e.head] {
            if end >= n {
                out.push(format!("edge {}: endpoint {end} undefined", e.id));
                endpoints_ok = false;
            }
        }
        if e.tail == e.head {
            out.push(format!("edge {}: self-loop at vertex {}", e.id, e.tail));
        }
        if !(e.length > 0.0 && e.length.is_finite()) {
            out.push(format!("edge {}: non-positive length {}", e.id, e.length));
        }
    }
    // every edge exactly twice in the adjacency, once per endpoint
    let mut seen = vec![0usize; g.edges.len()];
    for (v, list) in g.adjacency.iter().enumerate() {
        for &(eid, orient) in list {
            match g.edges.get(eid) {
                None => out.push(format!("vertex {v}: adjacency names missing edge {eid}")),
                Some(e) => {
                    seen[eid] += 1;
                    let expected = match orient {
                        Orientation::Outgoing => e.tail,
                        Orientation::Incoming => e.head,
                    };
                    if expected != v {
                        out.push(format!("vertex {v}: adjacency orientation wrong for edge {eid}"));
                    }
                }
            }
        }
    }
    if endpoints_ok {
        for (eid, &count) in seen.iter().enumerate() {
            if count != 2 {
                out.push(format!("edge {eid}: appears {count} times in adjacency"));
            }
        }
    }
    if g.boundary.len() != n || g.adjacency.len() != n {
        out.push("per-vertex tables have wrong length".to_string());
    }
    if !g.is_connected() {
        out.push("graph is not connected".to_string());
    }
    out
}

/// Offsets `0, 1, 2, ..., arm` along an arm of unit edges, the last edge
/// possibly shorter.
fn arm_offsets(arm: f64) -> Vec<f64> {
    let pieces = arm.ceil().max(1.0) as usize;
    let mut offs: Vec<f64> = (0..pieces).map(|k| k as f64).collect();
    offs.push(arm);
    offs
}

/// The segment `[-half_length, half_length]` as a chain of unit edges grown
/// outward from a central vertex at 0, oriented left to right.
pub fn build_line(half_length: f64) -> Result<MetricGraph> {
    if !(half_length > 0.0 && half_length.is_finite()) {
        return Err(invalid(format!("half_length must be positive, got {half_length}")));
    }
    let arm = arm_offsets(half_length);
    let mut xs: Vec<f64> = arm.iter().skip(1).rev().map(|x| -x).collect();
    xs.extend(arm.iter().copied());
    let vertices: Vec<Vertex> =
        xs.iter().enumerate().map(|(id, &x)| Vertex { id, position: [x, 0.0] }).collect();
    let edges = (0..xs.len() - 1)
        .map(|id| Edge {
            id,
            tail: id,
            head: id + 1,
            length: xs[id + 1] - xs[id],
            kind: EdgeKind::HalflineStub,
        })
        .collect();
    let last = vertices.len() - 1;
    Ok(MetricGraph::from_parts(vertices, edges).with_boundary([0, last]))
}

/// `num_halflines` arms of length `arm_length` glued at vertex 0. Each arm is
/// a chain of unit edges oriented away from the center.
pub fn build_star(num_halflines: usize, arm_length: f64) -> Result<MetricGraph> {
    if num_halflines < 2 {
        return Err(invalid(format!("a star needs at least 2 half-lines, got {num_halflines}")));
    }
    if !(arm_length > 0.0 && arm_length.is_finite()) {
        return Err(invalid(format!("arm_length must be positive, got {arm_length}")));
    }
    let offs = arm_offsets(arm_length);
    let mut vertices = vec![Vertex { id: 0, position: [0.0, 0.0] }];
    let mut edges = Vec::new();
    let mut leaves = Vec::new();
    for arm in 0..num_halflines {
        let angle = std::f64::consts::TAU * arm as f64 / num_halflines as f64;
        let (s, c) = angle.sin_cos();
        let mut prev = 0;
        for w in offs.windows(2) {
            let id = vertices.len();
            vertices.push(Vertex { id, position: [c * w[1], s * w[1]] });
            edges.push(Edge {
                id: edges.len(),
                tail: prev,
                head: id,
                length: w[1] - w[0],
                kind: EdgeKind::HalflineStub,
            });
            prev = id;
        }
        leaves.push(prev);
    }
    Ok(MetricGraph::from_parts(vertices, edges).with_boundary(leaves))
}

#[derive(Serialize, Deserialize)]
struct VertexJson {
    id: usize,
    x: f64,
    y: f64,
}

#[derive(Serialize, Deserialize)]
struct EdgeJson {
    id: usize,
    tail: usize,
    head: usize,
    length: f64,
    kind: EdgeKind,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    vertices: Vec<VertexJson>,
    edges: Vec<EdgeJson>,
    #[serde(default)]
    boundary: Vec<usize>,
}

impl MetricGraph {
    pub fn to_json(&self) -> Result<String> {
        let doc = GraphJson {
            vertices: self
                .vertices
                .iter()
                .map(|v| VertexJson { id: v.id, x: v.position[0], y: v.position[1] })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeJson { id: e.id, tail: e.tail, head: e.head, length: e.length, kind: e.kind })
                .collect(),
            boundary: self.boundary_vertices().collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphJson = serde_json::from_str(text)?;
        let vertices = doc.vertices.into_iter().map(|v| Vertex { id: v.id, position: [v.x, v.y] }).collect();
        let edges = doc
            .edges
            .into_iter()
            .map(|e| Edge { id: e.id, tail: e.tail, head: e.head, length: e.length, kind: e.kind })
            .collect();
        Ok(MetricGraph::from_parts(vertices, edges).with_boundary(doc.boundary))
    }
}
