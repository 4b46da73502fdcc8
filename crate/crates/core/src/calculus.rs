//! Functions on a metric graph sampled uniformly along each edge.
//!
//! Storage is one flat vector of degrees of freedom: the value at every
//! vertex first, then the `n - 2` interior samples of each edge in edge
//! order. An edge's samples are read as `[tail, interior..., head]`, so
//! continuity at vertices holds by construction.
//!
//! Integrals use the composite trapezoid rule; derivatives are forward
//! differences on sample intervals, which are exact for the piecewise-linear
//! interpolant. Per-edge sums pair samples symmetrically from both ends so
//! that reversing an edge leaves every result bit-identical.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::graph::MetricGraph;

pub const DEFAULT_SAMPLES_PER_EDGE: usize = 33;

#[derive(Clone, Debug)]
pub struct GraphFunction {
    graph: Arc<MetricGraph>,
    samples_per_edge: usize,
    values: Vec<f64>,
}

impl GraphFunction {
    pub fn zeros(graph: Arc<MetricGraph>, samples_per_edge: usize) -> Result<Self> {
        if samples_per_edge < 2 {
            return Err(invalid(format!("need at least 2 samples per edge, got {samples_per_edge}")));
        }
        let len = graph.num_vertices() + graph.num_edges() * (samples_per_edge - 2);
        Ok(GraphFunction { graph, samples_per_edge, values: vec![0.0; len] })
    }

    /// Build from a value per vertex and a value per interior point
    /// `(edge, arclength from tail)`. The caller supplies compatible values.
    pub fn from_fns(
        graph: Arc<MetricGraph>,
        samples_per_edge: usize,
        vertex_fn: impl Fn(usize) -> f64,
        point_fn: impl Fn(usize, f64) -> f64,
    ) -> Result<Self> {
        let mut u = Self::zeros(graph, samples_per_edge)?;
        let nv = u.graph.num_vertices();
        for v in 0..nv {
            u.values[v] = vertex_fn(v);
        }
        let graph = Arc::clone(&u.graph);
        for e in graph.edges() {
            let h = u.step(e.id);
            let range = u.interior_range(e.id);
            for (k, slot) in u.values[range].iter_mut().enumerate() {
                *slot = point_fn(e.id, (k + 1) as f64 * h);
            }
        }
        Ok(u)
    }

    /// Build from a function of the point only, read at vertices through
    /// their first incident edge.
    pub fn from_point_fn(
        graph: Arc<MetricGraph>,
        samples_per_edge: usize,
        f: impl Fn(usize, f64) -> f64,
    ) -> Result<Self> {
        let g = Arc::clone(&graph);
        let vertex_fn = |v: usize| match g.adjacency(v).first() {
            Some(&(eid, crate::graph::Orientation::Outgoing)) => f(eid, 0.0),
            Some(&(eid, crate::graph::Orientation::Incoming)) => f(eid, g.edge(eid).length),
            None => 0.0,
        };
        Self::from_fns(graph, samples_per_edge, vertex_fn, &f)
    }

    /// Piecewise-linear interpolation of vertex values.
    pub fn from_vertex_values(
        graph: Arc<MetricGraph>,
        samples_per_edge: usize,
        vertex_values: &[f64],
    ) -> Result<Self> {
        if vertex_values.len() != graph.num_vertices() {
            return Err(invalid("one value per vertex required"));
        }
        let g = Arc::clone(&graph);
        Self::from_fns(
            graph,
            samples_per_edge,
            |v| vertex_values[v],
            |e, x| {
                let edge = g.edge(e);
                let t = x / edge.length;
                (1.0 - t) * vertex_values[edge.tail] + t * vertex_values[edge.head]
            },
        )
    }

    pub fn graph(&self) -> &Arc<MetricGraph> {
        &self.graph
    }

    pub fn samples_per_edge(&self) -> usize {
        self.samples_per_edge
    }

    /// Flat degree-of-freedom vector (vertices first, then edge interiors).
    pub fn dofs(&self) -> &[f64] {
        &self.values
    }

    pub fn dofs_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn interior_range(&self, edge: usize) -> std::ops::Range<usize> {
        let m = self.samples_per_edge - 2;
        let start = self.graph.num_vertices() + edge * m;
        start..start + m
    }

    /// Sample spacing on `edge`.
    pub fn step(&self, edge: usize) -> f64 {
        self.graph.edge(edge).length / (self.samples_per_edge - 1) as f64
    }

    pub fn vertex_value(&self, v: usize) -> f64 {
        self.values[v]
    }

    pub fn sample(&self, edge: usize, k: usize) -> f64 {
        let e = self.graph.edge(edge);
        let n = self.samples_per_edge;
        match k {
            0 => self.values[e.tail],
            k if k == n - 1 => self.values[e.head],
            k => self.values[self.interior_range(edge).start + k - 1],
        }
    }

    /// All `n` samples of `edge`, tail to head, written into `buf`.
    pub fn edge_samples_into(&self, edge: usize, buf: &mut Vec<f64>) {
        let e = self.graph.edge(edge);
        buf.clear();
        buf.push(self.values[e.tail]);
        buf.extend_from_slice(&self.values[self.interior_range(edge)]);
        buf.push(self.values[e.head]);
    }

    pub fn edge_samples(&self, edge: usize) -> Vec<f64> {
        let mut buf = Vec::with_capacity(self.samples_per_edge);
        self.edge_samples_into(edge, &mut buf);
        buf
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// Same function on the graph with `edge` reversed.
    pub fn with_flipped_edge(&self, edge: usize) -> Self {
        let graph = Arc::new(self.graph.with_flipped_edge(edge));
        let mut values = self.values.clone();
        let range = self.interior_range(edge);
        values[range].reverse();
        GraphFunction { graph, samples_per_edge: self.samples_per_edge, values }
    }

    /// Same graph and sampling, new values.
    pub fn with_dofs(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(invalid("dof vector has the wrong length"));
        }
        Ok(GraphFunction { graph: Arc::clone(&self.graph), samples_per_edge: self.samples_per_edge, values })
    }

    /// Rows `edge_id,sample_index,arclength_coordinate,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("edge_id,sample_index,arclength_coordinate,value\n");
        let mut buf = Vec::new();
        for e in self.graph.edges() {
            let h = self.step(e.id);
            self.edge_samples_into(e.id, &mut buf);
            for (k, v) in buf.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{}", e.id, k, k as f64 * h, v);
            }
        }
        out
    }
}

/// Trapezoid sum of `f` over one edge's samples, paired from both ends.
pub(crate) fn edge_trapezoid(samples: &[f64], h: f64, f: impl Fn(f64) -> f64) -> f64 {
    let n = samples.len();
    let mut acc = 0.5 * (f(samples[0]) + f(samples[n - 1]));
    let (mut lo, mut hi) = (1, n - 2);
    while lo < hi {
        acc += f(samples[lo]) + f(samples[hi]);
        lo += 1;
        hi -= 1;
    }
    if lo == hi {
        acc += f(samples[lo]);
    }
    h * acc
}

/// Sum of `g(u[k+1] - u[k])` over one edge, paired from both ends; `g` must
/// be even.
pub(crate) fn edge_difference_sum(samples: &[f64], g: impl Fn(f64) -> f64) -> f64 {
    let m = samples.len() - 1;
    let d = |k: usize| samples[k + 1] - samples[k];
    let mut acc = 0.0;
    let (mut lo, mut hi) = (0, m - 1);
    while lo < hi {
        acc += g(d(lo)) + g(d(hi));
        lo += 1;
        hi -= 1;
    }
    if lo == hi {
        acc += g(d(lo));
    }
    acc
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("exponent p must be >= 1, got {p}")))
    }
}

#[inline]
fn abs_pow(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x
    } else {
        x.abs().powf(p)
    }
}

/// Trapezoid approximation of the integral of `|u|^p` over the graph.
pub fn integrate_power(u: &GraphFunction, p: f64) -> Result<f64> {
    check_p(p)?;
    let mut buf = Vec::with_capacity(u.samples_per_edge);
    let mut total = 0.0;
    for e in u.graph.edges() {
        u.edge_samples_into(e.id, &mut buf);
        total += edge_trapezoid(&buf, u.step(e.id), |x| abs_pow(x, p));
    }
    Ok(total)
}

/// `(‖u'‖_{L¹}, ‖u'‖²_{L²})` from forward differences.
pub fn gradient_norms(u: &GraphFunction) -> (f64, f64) {
    let mut buf = Vec::with_capacity(u.samples_per_edge);
    let (mut l1, mut l2sq) = (0.0, 0.0);
    for e in u.graph.edges() {
        u.edge_samples_into(e.id, &mut buf);
        let h = u.step(e.id);
        l1 += edge_difference_sum(&buf, f64::abs);
        l2sq += edge_difference_sum(&buf, |d| d * d) / h;
    }
    (l1, l2sq)
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormReport {
    /// `‖u‖²_{L²}`.
    pub mass: f64,
    /// `(p, ‖u‖^p_{L^p})` in request order.
    pub lp: Vec<(f64, f64)>,
    pub linf: f64,
    pub grad_l1: f64,
    pub grad_l2sq: f64,
}

impl NormReport {
    pub fn lp(&self, p: f64) -> Option<f64> {
        self.lp.iter().find(|(q, _)| *q == p).map(|&(_, v)| v)
    }
}

pub fn norm_report(u: &GraphFunction, p_list: &[f64]) -> Result<NormReport> {
    for &p in p_list {
        check_p(p)?;
    }
    let mut buf = Vec::with_capacity(u.samples_per_edge);
    let mut mass = 0.0;
    let mut lp = vec![0.0; p_list.len()];
    let (mut grad_l1, mut grad_l2sq) = (0.0, 0.0);
    for e in u.graph.edges() {
        u.edge_samples_into(e.id, &mut buf);
        let h = u.step(e.id);
        mass += edge_trapezoid(&buf, h, |x| x * x);
        for (acc, &p) in lp.iter_mut().zip(p_list) {
            *acc += edge_trapezoid(&buf, h, |x| abs_pow(x, p));
        }
        grad_l1 += edge_difference_sum(&buf, f64::abs);
        grad_l2sq += edge_difference_sum(&buf, |d| d * d) / h;
    }
    let linf = u.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(NormReport { mass, lp: p_list.iter().copied().zip(lp).collect(), linf, grad_l1, grad_l2sq })
}

/// `sqrt(mu / mass(u)) * u`.
pub fn rescale_mass(u: &GraphFunction, mu: f64) -> Result<GraphFunction> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(invalid(format!("target mass must be positive, got {mu}")));
    }
    let mass = integrate_power(u, 2.0)?;
    if !(mass > 0.0) {
        return Err(Error::DegenerateInput("cannot rescale a function of zero mass".into()));
    }
    Ok(u.scaled((mu / mass).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_line, build_star};
    use proptest::prelude::*;

    fn single_edge() -> Arc<MetricGraph> {
        Arc::new(build_line(0.5).unwrap())
    }

    #[test]
    fn constant_mass_is_exact() {
        let g = Arc::new(build_star(3, 2.5).unwrap());
        let u = GraphFunction::from_point_fn(Arc::clone(&g), 9, |_, _| 1.7).unwrap();
        let m = integrate_power(&u, 2.0).unwrap();
        assert!((m - 1.7 * 1.7 * 7.5).abs() < 1e-12);
        assert_eq!(gradient_norms(&u), (0.0, 0.0));
        let rep = norm_report(&u, &[]).unwrap();
        assert_eq!(rep.linf, 1.7);
    }

    #[test]
    fn hat_on_unit_edge() {
        // [-0.5, 0.5] as two half edges; the hat peaks at the middle vertex
        let g = single_edge();
        let u = GraphFunction::from_fns(
            Arc::clone(&g),
            1025,
            |v| if v == 1 { 2.0 } else { 0.0 },
            |e, x| if e == 0 { 2.0 * x / 0.5 } else { 2.0 * (1.0 - x / 0.5) },
        )
        .unwrap();
        let m = integrate_power(&u, 2.0).unwrap();
        // exact integral of the hat squared is peak^2 / 3 over unit length
        assert!((m - 4.0 / 3.0).abs() < 1e-5, "{m}");
        let (l1, _) = gradient_norms(&u);
        assert!((l1 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn ramp_gradient() {
        let g = Arc::new(build_line(0.5).unwrap());
        let u = GraphFunction::from_fns(Arc::clone(&g), 17, |v| v as f64 * 0.5, |e, x| 0.5 * e as f64 + x)
            .unwrap();
        let (l1, l2) = gradient_norms(&u);
        assert!((l1 - 1.0).abs() < 1e-14);
        assert!((l2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_small_p_and_bad_sampling() {
        let g = single_edge();
        let u = GraphFunction::zeros(Arc::clone(&g), 5).unwrap();
        assert!(integrate_power(&u, 0.5).is_err());
        assert!(GraphFunction::zeros(g, 1).is_err());
    }

    #[test]
    fn rescale() {
        let g = Arc::new(build_line(2.0).unwrap());
        let u = GraphFunction::from_point_fn(Arc::clone(&g), 5, |_, _| 1.0).unwrap();
        // mass 4 -> factor 1/2
        let v = rescale_mass(&u, 1.0).unwrap();
        assert!((v.vertex_value(0) - 0.5).abs() < 1e-15);
        assert!((integrate_power(&v, 2.0).unwrap() - 1.0).abs() < 1e-15);
        let same = rescale_mass(&u, 4.0).unwrap();
        assert_eq!(same.dofs(), u.dofs());
        let zero = GraphFunction::zeros(g, 5).unwrap();
        assert!(matches!(rescale_mass(&zero, 1.0), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn quadrature_converges_quadratically() {
        let g = Arc::new(build_line(4.0).unwrap());
        let exact = {
            // ∫_{-4}^{4} exp(-x^2) dx
            let erf4 = statrs::function::erf::erf(4.0);
            std::f64::consts::PI.sqrt() * erf4
        };
        let err = |n: usize| {
            let gg = Arc::clone(&g);
            let u = GraphFunction::from_point_fn(Arc::clone(&g), n, move |e, x| {
                let t = gg.vertices()[gg.edge(e).tail].position[0] + x;
                (-t * t / 2.0).exp()
            })
            .unwrap();
            (integrate_power(&u, 2.0).unwrap() - exact).abs()
        };
        let (e1, e2) = (err(5), err(9));
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn csv_rows() {
        let g = Arc::new(build_line(1.0).unwrap());
        let u = GraphFunction::zeros(g, 4).unwrap();
        let csv = u.to_csv();
        assert_eq!(csv.lines().count(), 1 + 2 * 4);
        assert!(csv.lines().nth(2).unwrap().starts_with("0,1,0.333"));
    }

    fn random_function(seed: u64, n: usize) -> GraphFunction {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = Arc::new(build_star(3, 2.5).unwrap());
        let mut u = GraphFunction::zeros(g, n).unwrap();
        u.dofs_mut().iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
        u
    }

    proptest! {
        #[test]
        fn flipping_edges_preserves_norms(seed in 0u64..1000, edge in 0usize..9, n in 2usize..12) {
            let u = random_function(seed, n);
            let v = u.with_flipped_edge(edge);
            let a = norm_report(&u, &[3.0, 4.5]).unwrap();
            let b = norm_report(&v, &[3.0, 4.5]).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn homogeneity(seed in 0u64..1000, c in -5.0f64..5.0) {
            let u = random_function(seed, 7);
            let a = norm_report(&u, &[3.0]).unwrap();
            let b = norm_report(&u.scaled(c), &[3.0]).unwrap();
            prop_assert!((b.mass - c * c * a.mass).abs() <= 1e-12 * (1.0 + b.mass));
            let lp = b.lp(3.0).unwrap();
            let want = c.abs().powi(3) * a.lp(3.0).unwrap();
            prop_assert!((lp - want).abs() <= 1e-12 * (1.0 + want));
        }
    }
}
