//! Truncated hexagonal grid and its decomposition into path families.
//!
//! Horizontal edges are indexed by pairs `(i, j)`: the horizontal edge
//! `h(i, j)` is the one shared by the paths `L_i` and `R_j`. Its left endpoint
//! is `a(i, j)`, its right endpoint `b(i, j)`. The remaining edges are
//!
//! * up edges `b(i, j) -> a(i, j + 1)`, which continue `L_i` to the right;
//! * down edges `b(i, j) -> a(i - 1, j)`, which continue `R_j` to the right.
//!
//! Hence every vertex is degree three in the infinite grid, `L_i` alternates
//! horizontal and up edges, and `R_j` alternates horizontal and down edges.
//! `L_{i+1}` lies above `L_i`; the origin `o` is `a(0, 0)`.
//!
//! The truncation of radius `R` keeps every `h(i, j)` with `|i|, |j| <= R`
//! together with all up and down edges joining two kept vertices, so each
//! `L_i` and `R_j` with index in `[-R, R]` is complete across the window.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::graph::{Edge, EdgeKind, MetricGraph, Vertex};

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

/// The two vertices at the ends of a horizontal edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Site {
    /// Left endpoint `a(i, j)`.
    A,
    /// Right endpoint `b(i, j)`.
    B,
}

#[derive(Clone, Debug)]
pub struct HoneycombLattice {
    pub graph: Arc<MetricGraph>,
    pub edge_length: f64,
    pub origin_vertex: usize,
    pub truncation_radius: usize,
}

impl HoneycombLattice {
    fn side(&self) -> usize {
        2 * self.truncation_radius + 1
    }

    fn r(&self) -> i64 {
        self.truncation_radius as i64
    }

    fn in_window(&self, k: i64) -> bool {
        k.abs() <= self.r()
    }

    fn cell_index(&self, i: i64, j: i64) -> usize {
        let r = self.r();
        ((i + r) as usize) * self.side() + (j + r) as usize
    }

    /// Vertex id of `a(i, j)` or `b(i, j)`, if inside the window.
    pub fn vertex(&self, site: Site, i: i64, j: i64) -> Option<usize> {
        if !(self.in_window(i) && self.in_window(j)) {
            return None;
        }
        let base = 2 * self.cell_index(i, j);
        Some(match site {
            Site::A => base,
            Site::B => base + 1,
        })
    }

    /// Inverse of [`HoneycombLattice::vertex`].
    pub fn vertex_indices(&self, v: usize) -> (Site, i64, i64) {
        let cell = v / 2;
        let i = (cell / self.side()) as i64 - self.r();
        let j = (cell % self.side()) as i64 - self.r();
        let site = if v.is_multiple_of(2) { Site::A } else { Site::B };
        (site, i, j)
    }

    pub fn horizontal_edge(&self, i: i64, j: i64) -> Option<usize> {
        (self.in_window(i) && self.in_window(j)).then(|| self.cell_index(i, j))
    }

    /// The up edge `b(i, j) -> a(i, j + 1)`.
    pub fn up_edge(&self, i: i64, j: i64) -> Option<usize> {
        let r = self.r();
        if !(self.in_window(i) && j >= -r && j < r) {
            return None;
        }
        let n = self.side();
        Some(n * n + ((i + r) as usize) * (n - 1) + (j + r) as usize)
    }

    /// The down edge `b(i, j) -> a(i - 1, j)`.
    pub fn down_edge(&self, i: i64, j: i64) -> Option<usize> {
        let r = self.r();
        if !(i > -r && i <= r && self.in_window(j)) {
            return None;
        }
        let n = self.side();
        Some(n * n + n * (n - 1) + ((i + r - 1) as usize) * n + (j + r) as usize)
    }

    /// Index `i` of the path `L_i` through `v` and the combinatorial
    /// coordinate of `v` along it (edge counts, origin on the line through
    /// `o` and `b(1, 0)`, increasing to the right).
    pub fn l_coordinate(&self, v: usize) -> (i64, i64) {
        let (site, i, j) = self.vertex_indices(v);
        let x = match site {
            Site::A => 2 * j - i,
            Site::B => 2 * j + 1 - i,
        };
        (i, x)
    }

    /// Vertices on the truncation boundary of the window.
    fn boundary_ids(&self) -> Vec<usize> {
        let r = self.r();
        let mut out = Vec::new();
        for i in -r..=r {
            for j in -r..=r {
                if i == r || j == -r {
                    out.push(self.vertex(Site::A, i, j).unwrap());
                }
                if i == -r || j == r {
                    out.push(self.vertex(Site::B, i, j).unwrap());
                }
            }
        }
        out
    }
}

fn cell_position(i: i64, j: i64, l: f64) -> [f64; 2] {
    [1.5 * l * (j - i) as f64, SQRT3_2 * l * (i + j) as f64]
}

/// Truncated honeycomb whose stored paths `L_i`, `R_j` have `|i|, |j| <= R`.
pub fn build_honeycomb(truncation_radius: usize, edge_length: f64) -> Result<HoneycombLattice> {
    if truncation_radius < 1 {
        return Err(invalid("truncation radius must be at least 1"));
    }
    if !(edge_length > 0.0 && edge_length.is_finite()) {
        return Err(invalid(format!("edge length must be positive, got {edge_length}")));
    }
    let mut lat = HoneycombLattice {
        graph: Arc::new(MetricGraph::from_parts(Vec::new(), Vec::new())),
        edge_length,
        origin_vertex: 0,
        truncation_radius,
    };
    let r = truncation_radius as i64;
    let n = lat.side();

    let mut vertices = Vec::with_capacity(2 * n * n);
    for i in -r..=r {
        for j in -r..=r {
            let p = cell_position(i, j, edge_length);
            let id = vertices.len();
            vertices.push(Vertex { id, position: p });
            vertices.push(Vertex { id: id + 1, position: [p[0] + edge_length, p[1]] });
        }
    }

    let mut edges = Vec::with_capacity(n * (3 * n - 2));
    let push = |edges: &mut Vec<Edge>, tail, head, kind| {
        let id = edges.len();
        edges.push(Edge { id, tail, head, length: edge_length, kind });
    };
    for i in -r..=r {
        for j in -r..=r {
            let a = lat.vertex(Site::A, i, j).unwrap();
            let b = lat.vertex(Site::B, i, j).unwrap();
            push(&mut edges, a, b, EdgeKind::Horizontal);
        }
    }
    for i in -r..=r {
        for j in -r..r {
            let b = lat.vertex(Site::B, i, j).unwrap();
            let a = lat.vertex(Site::A, i, j + 1).unwrap();
            push(&mut edges, b, a, EdgeKind::Up);
        }
    }
    for i in (-r + 1)..=r {
        for j in -r..=r {
            let b = lat.vertex(Site::B, i, j).unwrap();
            let a = lat.vertex(Site::A, i - 1, j).unwrap();
            push(&mut edges, b, a, EdgeKind::Down);
        }
    }

    let boundary = lat.boundary_ids();
    lat.graph = Arc::new(MetricGraph::from_parts(vertices, edges).with_boundary(boundary));
    lat.origin_vertex = lat.vertex(Site::A, 0, 0).unwrap();
    Ok(lat)
}

/// The two path families covering the grid, with the segments and base
/// vertices used to integrate along them.
#[derive(Clone, Debug, PartialEq)]
pub struct PathFamily {
    /// `L_i`, edges ordered left to right.
    pub l_paths: BTreeMap<i64, Vec<usize>>,
    /// `R_j`, edges ordered left to right.
    pub r_paths: BTreeMap<i64, Vec<usize>>,
    /// `I_i^j`: the horizontal edge `L_i ∩ R_j` and the up edge on its right.
    pub i_segments: BTreeMap<(i64, i64), Vec<usize>>,
    /// `J_j^i`: the edge of `R_j` on the left of `L_i ∩ R_j` and that
    /// horizontal edge.
    pub j_segments: BTreeMap<(i64, i64), Vec<usize>>,
    /// `v_i^j`: first vertex of `I_i^j` met walking along `R_j` from the left.
    pub v_vertices: BTreeMap<(i64, i64), usize>,
    /// `w_j^i`: first vertex of `J_j^i` met walking along `L_i` from the left.
    pub w_vertices: BTreeMap<(i64, i64), usize>,
}

pub fn decompose_paths(lat: &HoneycombLattice) -> PathFamily {
    let r = lat.r();
    let mut fam = PathFamily {
        l_paths: BTreeMap::new(),
        r_paths: BTreeMap::new(),
        i_segments: BTreeMap::new(),
        j_segments: BTreeMap::new(),
        v_vertices: BTreeMap::new(),
        w_vertices: BTreeMap::new(),
    };
    for i in -r..=r {
        let mut path = Vec::new();
        for j in -r..=r {
            let mut seg = vec![lat.horizontal_edge(i, j).unwrap()];
            seg.extend(lat.up_edge(i, j));
            path.extend(&seg);
            fam.i_segments.insert((i, j), seg);
            fam.v_vertices.insert((i, j), lat.vertex(Site::A, i, j).unwrap());
        }
        fam.l_paths.insert(i, path);
    }
    for j in -r..=r {
        let mut path = Vec::new();
        // walking R_j to the right visits L_i with decreasing i
        for i in (-r..=r).rev() {
            let mut seg: Vec<usize> = lat.down_edge(i + 1, j).into_iter().collect();
            seg.push(lat.horizontal_edge(i, j).unwrap());
            path.extend(&seg);
            fam.j_segments.insert((j, i), seg);
            fam.w_vertices.insert((j, i), lat.vertex(Site::A, i, j).unwrap());
        }
        fam.r_paths.insert(j, path);
    }
    fam
}

/// A bridging edge `b_j^k` joining `L_j` and `L_{j+1}` along the line `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Bridge {
    pub j: i64,
    pub edge: usize,
    /// Endpoint where the bridge coordinate is 0: on `L_j` when `j >= 0`,
    /// on `L_{j+1}` when `j < 0`.
    pub zero_end: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BridgeFamily {
    /// Every transversal line meeting the window, bridges sorted by `j`.
    pub lines: BTreeMap<i64, Vec<Bridge>>,
}

impl BridgeFamily {
    /// Line index and bridge record for a down edge.
    pub fn locate(&self, edge: usize) -> Option<(i64, Bridge)> {
        self.lines.iter().find_map(|(&k, bs)| bs.iter().find(|b| b.edge == edge).map(|b| (k, *b)))
    }
}

/// The down edge `b(i, m) -> a(i - 1, m)` is the bridge `b_j^k` with
/// `j = i - 1` and `k = 2m - j`: it joins the vertices of `L_j` and `L_{j+1}`
/// sitting at coordinate `k`, which is why line `k` only carries bridges
/// whose `j` has the parity of `k`.
pub fn decompose_bridges(lat: &HoneycombLattice) -> BridgeFamily {
    let r = lat.r();
    let mut lines: BTreeMap<i64, Vec<Bridge>> = BTreeMap::new();
    for i in (-r + 1)..=r {
        for m in -r..=r {
            let edge = lat.down_edge(i, m).unwrap();
            let j = i - 1;
            let k = 2 * m - j;
            let e = lat.graph.edge(edge);
            // tail is b(i, m) on L_{j+1}, head is a(j, m) on L_j
            let zero_end = if j >= 0 { e.head } else { e.tail };
            lines.entry(k).or_default().push(Bridge { j, edge, zero_end });
        }
    }
    for bs in lines.values_mut() {
        bs.sort_by_key(|b| b.j);
    }
    BridgeFamily { lines }
}

/// `(2R+1) x (2R+1)` square grid with spacing `edge_length`.
pub fn build_square_grid(truncation_radius: usize, edge_length: f64) -> Result<MetricGraph> {
    if truncation_radius < 1 {
        return Err(invalid("truncation radius must be at least 1"));
    }
    if !(edge_length > 0.0 && edge_length.is_finite()) {
        return Err(invalid(format!("edge length must be positive, got {edge_length}")));
    }
    let r = truncation_radius as i64;
    let n = 2 * truncation_radius + 1;
    let id = |x: i64, y: i64| ((y + r) as usize) * n + (x + r) as usize;
    let mut vertices = Vec::with_capacity(n * n);
    let mut boundary = Vec::new();
    for y in -r..=r {
        for x in -r..=r {
            vertices
                .push(Vertex { id: id(x, y), position: [x as f64 * edge_length, y as f64 * edge_length] });
            if x.abs() == r || y.abs() == r {
                boundary.push(id(x, y));
            }
        }
    }
    let mut edges = Vec::with_capacity(2 * n * (n - 1));
    for y in -r..=r {
        for x in -r..r {
            let eid = edges.len();
            edges.push(Edge {
                id: eid,
                tail: id(x, y),
                head: id(x + 1, y),
                length: edge_length,
                kind: EdgeKind::Horizontal,
            });
        }
    }
    for y in -r..r {
        for x in -r..=r {
            let eid = edges.len();
            edges.push(Edge {
                id: eid,
                tail: id(x, y),
                head: id(x, y + 1),
                length: edge_length,
                kind: EdgeKind::Up,
            });
        }
    }
    Ok(MetricGraph::from_parts(vertices, edges).with_boundary(boundary))
}

/// Center vertex of a square grid built by [`build_square_grid`].
pub fn square_grid_center(truncation_radius: usize) -> usize {
    let n = 2 * truncation_radius + 1;
    truncation_radius * n + truncation_radius
}

#[derive(Serialize)]
struct PathEntry<'a> {
    index: i64,
    edges: &'a [usize],
}

#[derive(Serialize)]
struct PairEntry<'a> {
    first: i64,
    second: i64,
    edges: &'a [usize],
    vertex: usize,
}

#[derive(Serialize)]
struct PathFamilyJson<'a> {
    l_paths: Vec<PathEntry<'a>>,
    r_paths: Vec<PathEntry<'a>>,
    i_segments: Vec<PairEntry<'a>>,
    j_segments: Vec<PairEntry<'a>>,
}

impl PathFamily {
    /// Index maps as JSON, entries sorted by key. Pair entries carry the
    /// segment and its base vertex (`v_i^j` resp. `w_j^i`).
    pub fn to_json(&self) -> Result<String> {
        fn paths(m: &BTreeMap<i64, Vec<usize>>) -> Vec<PathEntry<'_>> {
            m.iter().map(|(&index, e)| PathEntry { index, edges: e }).collect()
        }
        let doc = PathFamilyJson {
            l_paths: paths(&self.l_paths),
            r_paths: paths(&self.r_paths),
            i_segments: self
                .i_segments
                .iter()
                .map(|(&(a, b), e)| PairEntry {
                    first: a,
                    second: b,
                    edges: e,
                    vertex: self.v_vertices[&(a, b)],
                })
                .collect(),
            j_segments: self
                .j_segments
                .iter()
                .map(|(&(a, b), e)| PairEntry {
                    first: a,
                    second: b,
                    edges: e,
                    vertex: self.w_vertices[&(a, b)],
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

#[derive(Serialize)]
struct LineEntry<'a> {
    k: i64,
    bridges: &'a [Bridge],
}

impl BridgeFamily {
    pub fn to_json(&self) -> Result<String> {
        let doc: Vec<LineEntry> = self.lines.iter().map(|(&k, b)| LineEntry { k, bridges: b }).collect();
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

/// Plot-ready edge list: `edge_id,kind,x0,y0,x1,y1`.
pub fn layout_csv(g: &MetricGraph) -> String {
    let mut out = String::from("edge_id,kind,x0,y0,x1,y1\n");
    for e in g.edges() {
        let p = g.vertices()[e.tail].position;
        let q = g.vertices()[e.head].position;
        let _ = writeln!(out, "{},{},{},{},{},{}", e.id, e.kind, p[0], p[1], q[0], q[1]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::validate;
    use std::collections::{BTreeSet, HashSet};

    #[test]
    fn small_lattice_is_valid() {
        let lat = build_honeycomb(1, 1.0).unwrap();
        assert!(validate(&lat.graph).is_empty());
        assert!(lat.graph.edges().iter().all(|e| e.length == 1.0));
        assert!(build_honeycomb(0, 1.0).is_err());
    }

    #[test]
    fn interior_is_trivalent() {
        for r in 1..=4 {
            let lat = build_honeycomb(r, 0.7).unwrap();
            let g = &lat.graph;
            for v in 0..g.num_vertices() {
                if g.is_boundary(v) {
                    assert!(matches!(g.degree(v), 1 | 2), "vertex {v}");
                } else {
                    assert_eq!(g.degree(v), 3, "vertex {v}");
                }
            }
        }
    }

    #[test]
    fn edge_kinds_follow_geometry() {
        let lat = build_honeycomb(2, 1.0).unwrap();
        let g = &lat.graph;
        for e in g.edges() {
            let p = g.vertices()[e.tail].position;
            let q = g.vertices()[e.head].position;
            let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
            assert!((dx.hypot(dy) - 1.0).abs() < 1e-12);
            match e.kind {
                EdgeKind::Horizontal => assert!(dy.abs() < 1e-12 && dx > 0.0),
                EdgeKind::Up => assert!(dy > 0.5 && dx > 0.0),
                EdgeKind::Down => assert!(dy < -0.5 && dx > 0.0),
                EdgeKind::HalflineStub => panic!("no stubs in the lattice"),
            }
        }
    }

    #[test]
    fn origin_has_horizontal_edge_on_right() {
        let lat = build_honeycomb(2, 1.0).unwrap();
        let g = &lat.graph;
        let o = lat.origin_vertex;
        assert_eq!(g.vertices()[o].position, [0.0, 0.0]);
        let kinds: BTreeSet<String> = g
            .adjacency(o)
            .iter()
            .map(|&(e, _)| {
                let edge = g.edge(e);
                let other = g.vertices()[edge.other(o)].position;
                format!("{}:{}", edge.kind, if other[0] > 0.0 { "right" } else { "left" })
            })
            .collect();
        let expected: BTreeSet<String> =
            ["horizontal:right", "down:left", "up:left"].iter().map(|s| s.to_string()).collect();
        assert_eq!(kinds, expected);
    }

    #[test]
    fn vertex_index_roundtrip() {
        let lat = build_honeycomb(3, 1.0).unwrap();
        for v in 0..lat.graph.num_vertices() {
            let (s, i, j) = lat.vertex_indices(v);
            assert_eq!(lat.vertex(s, i, j), Some(v));
        }
    }

    #[test]
    fn paths_are_simple_and_contiguous() {
        let lat = build_honeycomb(2, 1.0).unwrap();
        let fam = decompose_paths(&lat);
        let g = &lat.graph;
        for path in fam.l_paths.values().chain(fam.r_paths.values()) {
            let mut visited = HashSet::new();
            let first = g.edge(path[0]);
            let mut at = first.tail;
            visited.insert(at);
            for &e in path {
                let edge = g.edge(e);
                assert_eq!(edge.tail, at, "paths run tail to head");
                at = edge.head;
                assert!(visited.insert(at), "path revisits vertex {at}");
            }
        }
    }

    #[test]
    fn consecutive_i_segments_are_adjacent() {
        let lat = build_honeycomb(2, 1.0).unwrap();
        let fam = decompose_paths(&lat);
        let g = &lat.graph;
        for i in -2..=2i64 {
            for j in -2..2i64 {
                let s0 = &fam.i_segments[&(i, j)];
                let s1 = &fam.i_segments[&(i, j + 1)];
                assert!(s0.iter().all(|e| !s1.contains(e)));
                let end = g.edge(*s0.last().unwrap()).head;
                assert_eq!(g.edge(s1[0]).tail, end);
            }
        }
    }

    #[test]
    fn square_grid_counts() {
        let g = build_square_grid(1, 1.0).unwrap();
        assert_eq!((g.num_vertices(), g.num_edges()), (9, 12));
        let g = build_square_grid(2, 1.0).unwrap();
        assert_eq!((g.num_vertices(), g.num_edges()), (25, 40));
        assert!(validate(&g).is_empty());
        for v in 0..g.num_vertices() {
            if !g.is_boundary(v) {
                assert_eq!(g.degree(v), 4);
            }
        }
        assert_eq!(g.vertices()[square_grid_center(2)].position, [0.0, 0.0]);
        assert!(build_square_grid(0, 1.0).is_err());
    }

    #[test]
    fn decomposition_is_deterministic() {
        let a = build_honeycomb(2, 1.0).unwrap();
        let b = build_honeycomb(2, 1.0).unwrap();
        assert_eq!(decompose_paths(&a), decompose_paths(&b));
        assert_eq!(decompose_bridges(&a), decompose_bridges(&b));
        assert_eq!(decompose_paths(&a).to_json().unwrap(), decompose_paths(&b).to_json().unwrap());
    }

    #[test]
    fn layout_has_one_row_per_edge() {
        let lat = build_honeycomb(1, 1.0).unwrap();
        let csv = layout_csv(&lat.graph);
        assert_eq!(csv.lines().count(), lat.graph.num_edges() + 1);
    }
}
