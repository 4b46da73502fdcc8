//! Assembled discrete operators on the flat degree-of-freedom layout of
//! [`GraphFunction`](crate::calculus::GraphFunction): lumped trapezoid
//! weights `W`, the P1 stiffness `K` (so that `uᵀKu = ‖u'‖²`), and a solver
//! for `(K + σW) x = r`.
//!
//! The solver eliminates the interior samples of every edge (a tridiagonal
//! system per edge), runs Jacobi-preconditioned conjugate gradients on the
//! vertex Schur complement, and back-substitutes.

use std::collections::HashMap;
use std::sync::Arc;

use crate::graph::MetricGraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryCondition {
    /// Functions vanish on the truncation boundary, i.e. they extend by zero
    /// to the untruncated graph.
    #[default]
    Dirichlet,
    /// No constraint at the truncation boundary.
    Free,
}

#[derive(Clone, Debug)]
struct EdgeClass {
    h: f64,
    /// Thomas factorization of the interior block for the current shift.
    cprime: Vec<f64>,
    denom: Vec<f64>,
    /// First and last columns of the inverse interior block.
    col_first: Vec<f64>,
    col_last: Vec<f64>,
    s_end: f64,
    s_cross: f64,
}

#[derive(Clone, Debug)]
pub struct Discretization {
    graph: Arc<MetricGraph>,
    n: usize,
    nv: usize,
    weights: Vec<f64>,
    fixed: Vec<bool>,
    edge_class: Vec<usize>,
    class_h: Vec<f64>,
}

impl Discretization {
    pub fn new(graph: Arc<MetricGraph>, samples_per_edge: usize, bc: BoundaryCondition) -> Self {
        let n = samples_per_edge;
        let nv = graph.num_vertices();
        let m = n - 2;
        let ndof = nv + graph.num_edges() * m;
        let mut weights = vec![0.0; ndof];
        let mut edge_class = Vec::with_capacity(graph.num_edges());
        let mut classes: HashMap<u64, usize> = HashMap::new();
        let mut class_h = Vec::new();
        for e in graph.edges() {
            let h = e.length / (n - 1) as f64;
            weights[e.tail] += 0.5 * h;
            weights[e.head] += 0.5 * h;
            let start = nv + e.id * m;
            weights[start..start + m].iter_mut().for_each(|w| *w = h);
            let id = *classes.entry(h.to_bits()).or_insert_with(|| {
                class_h.push(h);
                class_h.len() - 1
            });
            edge_class.push(id);
        }
        let fixed = match bc {
            BoundaryCondition::Dirichlet => (0..nv).map(|v| graph.is_boundary(v)).collect(),
            BoundaryCondition::Free => vec![false; nv],
        };
        Discretization { graph, n, nv, weights, fixed, edge_class, class_h }
    }

    pub fn graph(&self) -> &Arc<MetricGraph> {
        &self.graph
    }

    pub fn samples_per_edge(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Whether dof `k` is held at zero.
    pub fn is_fixed(&self, k: usize) -> bool {
        k < self.nv && self.fixed[k]
    }

    pub fn zero_fixed(&self, x: &mut [f64]) {
        for (v, &f) in self.fixed.iter().enumerate() {
            if f {
                x[v] = 0.0;
            }
        }
    }

    fn interior_start(&self, edge: usize) -> usize {
        self.nv + edge * (self.n - 2)
    }

    /// Dof index of sample `k` on `edge`.
    #[inline]
    fn dof(&self, edge: usize, k: usize) -> usize {
        let e = self.graph.edge(edge);
        if k == 0 {
            e.tail
        } else if k == self.n - 1 {
            e.head
        } else {
            self.interior_start(edge) + k - 1
        }
    }

    pub fn dot_w(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights.iter().zip(a).zip(b).map(|((w, x), y)| w * x * y).sum()
    }

    pub fn mass(&self, u: &[f64]) -> f64 {
        self.dot_w(u, u)
    }

    pub fn lp(&self, u: &[f64], p: f64) -> f64 {
        self.weights.iter().zip(u).map(|(w, x)| w * x.abs().powf(p)).sum()
    }

    /// `‖u'‖²` and `‖u'‖₁`.
    pub fn gradient_norms(&self, u: &[f64]) -> (f64, f64) {
        let (mut l2, mut l1) = (0.0, 0.0);
        for e in 0..self.graph.num_edges() {
            let h = self.class_h[self.edge_class[e]];
            let mut prev = u[self.dof(e, 0)];
            for k in 1..self.n {
                let cur = u[self.dof(e, k)];
                let d = cur - prev;
                l2 += d * d / h;
                l1 += d.abs();
                prev = cur;
            }
        }
        (l2, l1)
    }

    /// `½(‖v'‖² - ‖u'‖²)`, summed as differences so that nearby states
    /// are compared without cancellation.
    pub fn kinetic_difference(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for e in 0..self.graph.num_edges() {
            let h = self.class_h[self.edge_class[e]];
            let mut a = self.dof(e, 0);
            let mut s = 0.0;
            for k in 1..self.n {
                let b = self.dof(e, k);
                // the change of the difference, from the exact per-dof changes
                let dd = (v[b] - u[b]) - (v[a] - u[a]);
                s += dd * ((v[b] - v[a]) + (u[b] - u[a]));
                a = b;
            }
            acc += s / h;
        }
        0.5 * acc
    }

    /// `Σ w (|v|^p - |u|^p)`, each term formed without cancellation.
    pub fn lp_difference(&self, u: &[f64], v: &[f64], p: f64) -> f64 {
        self.weights
            .iter()
            .zip(u.iter().zip(v))
            .map(|(w, (x, y))| {
                let (a, b) = (y.abs(), x.abs());
                // the log form only where the plain difference cancels
                let d = if b > 0.0 && (a - b).abs() <= 0.5 * b {
                    b.powf(p) * (p * ((a - b) / b).ln_1p()).exp_m1()
                } else {
                    a.powf(p) - b.powf(p)
                };
                w * d
            })
            .sum()
    }

    /// `out = K u`.
    pub fn stiffness_apply(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for e in 0..self.graph.num_edges() {
            let h = self.class_h[self.edge_class[e]];
            let mut a = self.dof(e, 0);
            for k in 1..self.n {
                let b = self.dof(e, k);
                let d = (u[b] - u[a]) / h;
                out[a] -= d;
                out[b] += d;
                a = b;
            }
        }
    }

    /// Euclidean gradient of `Σ_e Σ_k |Δu|`, using `sign(0) = 0`.
    pub fn grad_l1_gradient(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for e in 0..self.graph.num_edges() {
            let mut a = self.dof(e, 0);
            for k in 1..self.n {
                let b = self.dof(e, k);
                let d = u[b] - u[a];
                let s = if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                out[a] -= s;
                out[b] += s;
                a = b;
            }
        }
    }

    /// Prepare a solver for `(K + σW) x = r` with fixed dofs held at 0.
    pub fn shifted_solver(&self, sigma: f64) -> ShiftedSolver<'_> {
        let m = self.n - 2;
        let classes = self
            .class_h
            .iter()
            .map(|&h| {
                let diag = 2.0 / h + sigma * h;
                let off = -1.0 / h;
                let (mut cprime, mut denom) = (vec![0.0; m], vec![0.0; m]);
                for i in 0..m {
                    let d = if i == 0 { diag } else { diag - off * cprime[i - 1] };
                    denom[i] = d;
                    cprime[i] = off / d;
                }
                let mut class = EdgeClass {
                    h,
                    cprime,
                    denom,
                    col_first: vec![0.0; m],
                    col_last: vec![0.0; m],
                    s_end: 0.0,
                    s_cross: 0.0,
                };
                let end_diag = 1.0 / h + 0.5 * sigma * h;
                if m == 0 {
                    class.s_end = end_diag;
                    class.s_cross = -1.0 / h;
                } else {
                    let mut e1 = vec![0.0; m];
                    e1[0] = 1.0;
                    class.col_first = thomas(&class, &e1);
                    let mut em = vec![0.0; m];
                    em[m - 1] = 1.0;
                    class.col_last = thomas(&class, &em);
                    class.s_end = end_diag - class.col_first[0] / (h * h);
                    class.s_cross = -class.col_first[m - 1] / (h * h);
                }
                class
            })
            .collect::<Vec<EdgeClass>>();
        let mut diag = vec![0.0; self.nv];
        for e in self.graph.edges() {
            let c = &classes[self.edge_class[e.id]];
            diag[e.tail] += c.s_end;
            diag[e.head] += c.s_end;
        }
        ShiftedSolver { disc: self, classes, diag }
    }
}

fn thomas(c: &EdgeClass, rhs: &[f64]) -> Vec<f64> {
    let m = rhs.len();
    let off = -1.0 / c.h;
    let mut y = vec![0.0; m];
    for i in 0..m {
        let prev = if i == 0 { 0.0 } else { y[i - 1] };
        y[i] = (rhs[i] - off * prev) / c.denom[i];
    }
    for i in (0..m.saturating_sub(1)).rev() {
        y[i] -= c.cprime[i] * y[i + 1];
    }
    y
}

pub struct ShiftedSolver<'a> {
    disc: &'a Discretization,
    classes: Vec<EdgeClass>,
    diag: Vec<f64>,
}

impl<'a> ShiftedSolver<'a> {
    fn schur_apply(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for e in self.disc.graph.edges() {
            let c = &self.classes[self.disc.edge_class[e.id]];
            let (a, b) = (e.tail, e.head);
            out[a] += c.s_end * x[a] + c.s_cross * x[b];
            out[b] += c.s_cross * x[a] + c.s_end * x[b];
        }
        for (v, &f) in self.disc.fixed.iter().enumerate() {
            if f {
                out[v] = x[v];
            }
        }
    }

    /// Solve `(K + σW) x = r` on the free dofs; fixed dofs of `x` are 0.
    pub fn solve(&self, r: &[f64]) -> Vec<f64> {
        let d = self.disc;
        let m = d.n - 2;
        let nv = d.nv;
        let mut x = vec![0.0; d.len()];
        // interior elimination: z_e = G_II^{-1} r_I
        let mut rhs_b = r[..nv].to_vec();
        let mut z_all = vec![0.0; d.len() - nv];
        if m > 0 {
            for e in d.graph.edges() {
                let c = &self.classes[d.edge_class[e.id]];
                let start = d.interior_start(e.id);
                let z = thomas(c, &r[start..start + m]);
                rhs_b[e.tail] += z[0] / c.h;
                rhs_b[e.head] += z[m - 1] / c.h;
                z_all[start - nv..start - nv + m].copy_from_slice(&z);
            }
        }
        for (v, &f) in d.fixed.iter().enumerate() {
            if f {
                rhs_b[v] = 0.0;
            }
        }
        let xb = self.cg(&rhs_b);
        x[..nv].copy_from_slice(&xb);
        if m > 0 {
            for e in d.graph.edges() {
                let c = &self.classes[d.edge_class[e.id]];
                let start = d.interior_start(e.id);
                let (xa, xh) = (xb[e.tail], xb[e.head]);
                for k in 0..m {
                    x[start + k] = z_all[start - nv + k] + (xa * c.col_first[k] + xh * c.col_last[k]) / c.h;
                }
            }
        }
        x
    }

    fn cg(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let precond: Vec<f64> =
            self.diag.iter().zip(&self.disc.fixed).map(|(&dg, &f)| if f { 1.0 } else { 1.0 / dg }).collect();
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut x = vec![0.0; n];
        if bnorm == 0.0 {
            return x;
        }
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&precond).map(|(a, p)| a * p).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mut ap = vec![0.0; n];
        for _ in 0..(10 * n).max(100) {
            self.schur_apply(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rnorm <= 1e-13 * bnorm {
                break;
            }
            for i in 0..n {
                z[i] = r[i] * precond[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        x
    }
}
