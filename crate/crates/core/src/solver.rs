//! Minimization of the NLS energy at fixed mass on a truncated graph.
//!
//! The descent direction is the energy gradient in the `H¹`-type metric
//! `G = K + σW`, projected onto the tangent space of the mass sphere in that
//! metric; each trial point is rescaled back to mass `μ` and accepted by an
//! Armijo test. The shift follows the current multiplier, `σ = max(-λ, σ₀)`,
//! which turns the iteration into a nonlinear inverse iteration near a
//! ground state.

use std::collections::VecDeque;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::SolitonParams;
use crate::calculus::{rescale_mass, GraphFunction};
use crate::discrete::{BoundaryCondition, Discretization, ShiftedSolver};
use crate::error::{invalid, Error, Result};
use crate::functionals::{central_vertex, corpus_function, energy};
use crate::graph::MetricGraph;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Initial step in the preconditioned metric.
    pub step: f64,
    pub max_iters: usize,
    /// A converged state is a ground state when its energy is below
    /// `-energy_tol` times its kinetic energy.
    pub energy_tol: f64,
    pub residual_tol: f64,
    /// Fraction of the mass within two edges of the boundary above which a
    /// state is reported as touching the boundary.
    pub spread_threshold: f64,
    pub seed: u64,
    pub samples_per_edge: usize,
    pub boundary: BoundaryCondition,
    /// Energies below this value are reported as unbounded below.
    pub divergence_floor: f64,
    /// Lower bound for the metric shift.
    pub min_shift: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            step: 1.0,
            max_iters: 20_000,
            energy_tol: 1e-8,
            residual_tol: 1e-6,
            spread_threshold: 0.05,
            seed: 0,
            samples_per_edge: crate::calculus::DEFAULT_SAMPLES_PER_EDGE,
            boundary: BoundaryCondition::Dirichlet,
            divergence_floor: -1e8,
            min_shift: 1e-4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("step", self.step),
            ("energy_tol", self.energy_tol),
            ("residual_tol", self.residual_tol),
            ("min_shift", self.min_shift),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.spread_threshold > 0.0 && self.spread_threshold < 1.0) {
            return Err(invalid("spread_threshold must lie in (0, 1)"));
        }
        if self.samples_per_edge < 2 {
            return Err(invalid("need at least 2 samples per edge"));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Classification {
    GroundState,
    SpreadToZero,
    UnboundedBelow,
    Inconclusive,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::GroundState => "GroundState",
            Classification::SpreadToZero => "SpreadToZero",
            Classification::UnboundedBelow => "UnboundedBelow",
            Classification::Inconclusive => "Inconclusive",
        }
    }
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Classification {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Classification::GroundState,
            Classification::SpreadToZero,
            Classification::UnboundedBelow,
            Classification::Inconclusive,
        ]
        .into_iter()
        .find(|c| c.as_str() == s)
        .ok_or_else(|| Error::Parse(format!("unknown classification '{s}'")))
    }
}

/// Starting point of a solve.
#[derive(Clone, Debug)]
pub enum Initializer {
    /// Radial line-soliton profile of mass `μ` around a vertex (the central
    /// vertex when `None`).
    SolitonBump {
        center: Option<usize>,
    },
    /// `e^{-rate d(x)}` around a vertex.
    Exponential {
        center: Option<usize>,
        rate: f64,
    },
    /// Constant on the free degrees of freedom.
    Uniform,
    /// A random corpus function drawn from the configured seed.
    Random {
        index: usize,
    },
    Given(GraphFunction),
}

impl Initializer {
    /// Named initializers: `soliton-bump`, `trial-eps` (decay rate 0.3),
    /// `uniform`, `random`.
    pub fn named(name: &str) -> Result<Self> {
        match name {
            "soliton-bump" => Ok(Initializer::SolitonBump { center: None }),
            "trial-eps" => Ok(Initializer::Exponential { center: None, rate: 0.3 }),
            "uniform" => Ok(Initializer::Uniform),
            "random" => Ok(Initializer::Random { index: 0 }),
            _ => Err(Error::Parse(format!("unknown initializer '{name}'"))),
        }
    }
}

fn radial(
    graph: &Arc<MetricGraph>,
    n: usize,
    center: usize,
    f: impl Fn(f64) -> f64,
) -> Result<GraphFunction> {
    let dist = graph.distances_from(center);
    let g = Arc::clone(graph);
    GraphFunction::from_fns(
        Arc::clone(graph),
        n,
        |v| f(dist[v]),
        |e, s| f(g.point_distance(&dist, None, e, s)),
    )
}

fn initial_state(
    graph: &Arc<MetricGraph>,
    p: f64,
    mu: f64,
    cfg: &SolverConfig,
    init: &Initializer,
) -> Result<GraphFunction> {
    let n = cfg.samples_per_edge;
    let center = |c: &Option<usize>| c.unwrap_or_else(|| central_vertex(graph));
    let u = match init {
        Initializer::SolitonBump { center: c } => {
            let params = SolitonParams::new(p.min(5.5), mu)?;
            radial(graph, n, center(c), |r| crate::analytic::soliton_profile(&params, r))?
        }
        Initializer::Exponential { center: c, rate } => radial(graph, n, center(c), |r| (-rate * r).exp())?,
        Initializer::Uniform => GraphFunction::from_fns(Arc::clone(graph), n, |_| 1.0, |_, _| 1.0)?,
        Initializer::Random { index } => {
            let dist = graph.distances_from(central_vertex(graph));
            corpus_function(graph, &dist, n, cfg.seed, *index)?
        }
        Initializer::Given(f) => {
            let same_shape = f.graph().num_vertices() == graph.num_vertices()
                && f.graph().num_edges() == graph.num_edges();
            if f.samples_per_edge() != n || !same_shape {
                return Err(invalid("initial function does not match the graph sampling"));
            }
            f.clone()
        }
    };
    Ok(u)
}

/// One row of the solver trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub energy: f64,
    pub residual: f64,
    pub step: f64,
    pub boundary_mass_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub classification: Classification,
    pub final_energy: f64,
    pub kinetic: f64,
    pub potential: f64,
    /// The final iterate; a minimizer when the classification is
    /// `GroundState`.
    pub minimizer: GraphFunction,
    pub lagrange_multiplier: f64,
    pub residual: f64,
    pub iterations: usize,
    pub boundary_mass_fraction: f64,
    pub p: f64,
    pub mu: f64,
    pub trace: Vec<TraceRow>,
}

impl SolveOutcome {
    pub fn is_ground_state(&self) -> bool {
        self.classification == Classification::GroundState
    }
}

/// Serializable summary of a solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub classification: Classification,
    pub p: f64,
    pub mu: f64,
    pub final_energy: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub lagrange_multiplier: f64,
    pub residual: f64,
    pub iterations: usize,
    pub boundary_mass_fraction: f64,
    pub seed: u64,
    pub config: SolverConfig,
}

impl SolveOutcome {
    pub fn record(&self, cfg: &SolverConfig) -> OutcomeRecord {
        OutcomeRecord {
            classification: self.classification,
            p: self.p,
            mu: self.mu,
            final_energy: self.final_energy,
            kinetic: self.kinetic,
            potential: self.potential,
            lagrange_multiplier: self.lagrange_multiplier,
            residual: self.residual,
            iterations: self.iterations,
            boundary_mass_fraction: self.boundary_mass_fraction,
            seed: cfg.seed,
            config: cfg.clone(),
        }
    }

    pub fn trace_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.trace {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Weight mask of the degrees of freedom within two edges of the boundary.
fn near_boundary_mask(graph: &MetricGraph, n: usize) -> Vec<bool> {
    let nv = graph.num_vertices();
    let mut hops = vec![usize::MAX; nv];
    let mut queue: VecDeque<usize> = graph.boundary_vertices().collect();
    for &v in &queue {
        hops[v] = 0;
    }
    while let Some(v) = queue.pop_front() {
        for &(e, _) in graph.adjacency(v) {
            let w = graph.edge(e).other(v);
            if hops[w] == usize::MAX {
                hops[w] = hops[v] + 1;
                queue.push_back(w);
            }
        }
    }
    let m = n - 2;
    let mut mask = vec![false; nv + graph.num_edges() * m];
    for v in 0..nv {
        mask[v] = hops[v] <= 2;
    }
    for e in graph.edges() {
        let near = hops[e.tail] < 2 || hops[e.head] < 2;
        mask[nv + e.id * m..nv + (e.id + 1) * m].iter_mut().for_each(|x| *x = near);
    }
    mask
}

/// State of the discrete problem at one iterate.
struct Eval {
    kinetic: f64,
    potential: f64,
    mass: f64,
}

impl Eval {
    fn energy(&self) -> f64 {
        self.kinetic - self.potential
    }

    fn multiplier(&self, p: f64) -> f64 {
        (2.0 * self.kinetic - p * self.potential) / self.mass
    }
}

struct Problem<'a> {
    d: &'a Discretization,
    p: f64,
    mu: f64,
}

impl Problem<'_> {
    /// `E(v) - E(u) - λ(M(v) - M(u))/2`. On the mass sphere this is the
    /// energy difference; the multiplier term removes the first-order effect
    /// of rounding in the mass normalization.
    fn lagrangian_difference(&self, u: &[f64], v: &[f64], lambda: f64) -> f64 {
        let dm: f64 =
            self.d.weights().iter().zip(u.iter().zip(v)).map(|(w, (x, y))| w * (y - x) * (y + x)).sum();
        self.d.kinetic_difference(u, v) - self.d.lp_difference(u, v, self.p) / self.p - 0.5 * lambda * dm
    }

    fn eval(&self, u: &[f64]) -> Eval {
        let (k2, _) = self.d.gradient_norms(u);
        Eval { kinetic: 0.5 * k2, potential: self.d.lp(u, self.p) / self.p, mass: self.d.mass(u) }
    }

    /// `Ku - W|u|^{p-2}u - λWu`, zero on fixed dofs. For the Rayleigh
    /// multiplier this is the gradient restricted to the mass tangent space.
    fn constrained_gradient(&self, u: &[f64], lambda: f64, out: &mut [f64]) {
        self.d.stiffness_apply(u, out);
        for ((o, &x), &w) in out.iter_mut().zip(u).zip(self.d.weights()) {
            *o -= w * (x.abs().powf(self.p - 2.0) + lambda) * x;
        }
        self.d.zero_fixed(out);
    }

    /// `‖W⁻¹r‖_W / ‖u‖_W` over free dofs.
    fn residual(&self, r: &[f64], mass: f64) -> f64 {
        let acc: f64 = r
            .iter()
            .zip(self.d.weights())
            .enumerate()
            .filter(|(k, _)| !self.d.is_fixed(*k))
            .map(|(_, (x, w))| x * x / w)
            .sum();
        (acc / mass).sqrt()
    }

    fn project_mass(&self, u: &mut [f64]) -> bool {
        self.d.zero_fixed(u);
        let m = self.d.mass(u);
        if !(m > 0.0 && m.is_finite()) {
            return false;
        }
        let s = (self.mu / m).sqrt();
        u.iter_mut().for_each(|x| *x *= s);
        true
    }
}

fn check_problem(graph: &MetricGraph, p: f64, mu: f64, cfg: &SolverConfig) -> Result<()> {
    if !(p > 2.0 && p <= 6.0) {
        return Err(invalid(format!("p must lie in (2, 6], got {p}")));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(invalid(format!("mass must be positive, got {mu}")));
    }
    if !graph.is_connected() {
        return Err(invalid("graph is not connected"));
    }
    cfg.validate()
}

/// Minimize `E(·)` at mass `mu` from `init`.
pub fn minimize(
    graph: &Arc<MetricGraph>,
    p: f64,
    mu: f64,
    cfg: &SolverConfig,
    init: &Initializer,
) -> Result<SolveOutcome> {
    check_problem(graph, p, mu, cfg)?;
    let u0 = initial_state(graph, p, mu, cfg, init)?;
    let d = Discretization::new(Arc::clone(graph), cfg.samples_per_edge, cfg.boundary);
    let pb = Problem { d: &d, p, mu };
    let near = near_boundary_mask(graph, cfg.samples_per_edge);
    let boundary_fraction = |u: &[f64]| {
        let near_mass: f64 =
            u.iter().zip(d.weights()).zip(&near).filter(|(_, &m)| m).map(|((x, w), _)| w * x * x).sum();
        near_mass / mu
    };

    let mut u = u0.dofs().to_vec();
    if !pb.project_mass(&mut u) {
        return Err(Error::DegenerateInput("initial state has zero mass on the free dofs".into()));
    }
    let len = u.len();
    let mut g = vec![0.0; len];
    let mut wu = vec![0.0; len];
    let mut trial = vec![0.0; len];
    let mut ev = pb.eval(&u);
    let mut lambda = ev.multiplier(p);
    pb.constrained_gradient(&u, lambda, &mut g);
    let mut residual = pb.residual(&g, ev.mass);

    let mut shift = (-lambda).max(cfg.min_shift);
    let mut solver: ShiftedSolver<'_> = d.shifted_solver(shift);
    let mut tau = cfg.step;
    let mut trace = vec![TraceRow {
        iteration: 0,
        energy: ev.energy(),
        residual,
        step: 0.0,
        boundary_mass_fraction: boundary_fraction(&u),
    }];
    let mut converged = residual <= cfg.residual_tol;
    let mut diverged = false;
    let mut iterations = 0;

    // previous projected gradient and search direction, for conjugacy
    let mut prev: Option<(Vec<f64>, Vec<f64>, f64)> = None;
    while !converged && !diverged && iterations < cfg.max_iters {
        iterations += 1;
        let want = (-lambda).max(cfg.min_shift);
        if (want - shift).abs() > 0.1 * shift {
            shift = want;
            solver = d.shifted_solver(shift);
            prev = None;
        }
        for (k, x) in u.iter().enumerate() {
            wu[k] = d.weights()[k] * x;
        }
        d.zero_fixed(&mut wu);
        let a = solver.solve(&g);
        let b = solver.solve(&wu);
        let bw = dot(&wu, &b);
        let alpha = dot(&wu, &a) / bw;
        let grad: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - alpha * y).collect();
        // ‖grad‖²_G, using G grad = g - αWu and uᵀWgrad = 0
        let gg = dot(&g, &grad);
        if !(gg > 0.0) {
            break;
        }
        let mut dir = grad.clone();
        if let Some((pg, ps, pgg)) = prev.take() {
            // Polak-Ribière in the G metric, old direction moved to the tangent space
            let cross: f64 = pg.iter().zip(&g).zip(&wu).map(|((x, gk), w)| x * (gk - alpha * w)).sum();
            let beta = ((gg - cross) / pgg).max(0.0);
            if beta > 0.0 {
                let c = dot(&wu, &ps) / bw;
                for k in 0..len {
                    dir[k] += beta * (ps[k] - c * b[k]);
                }
            }
        }
        let mut slope = dot(&g, &dir);
        if !(slope > 0.0) {
            dir.copy_from_slice(&grad);
            slope = gg;
        }
        let mut accepted = None;
        for _ in 0..60 {
            for k in 0..len {
                trial[k] = u[k] - tau * dir[k];
            }
            if pb.project_mass(&mut trial) {
                let de = pb.lagrangian_difference(&u, &trial, lambda);
                if de <= -1e-4 * tau * slope {
                    accepted = Some(de);
                    break;
                }
            }
            tau *= 0.5;
        }
        let Some(de) = accepted else { break };
        // minimizer of the parabola through E(0), E'(0) and E(τ)
        let curv = de + slope * tau;
        if curv > 0.0 {
            let t2 = slope * tau * tau / (2.0 * curv);
            if t2 > 1.5 * tau || t2 < 0.5 * tau {
                let mut alt: Vec<f64> = u.iter().zip(&dir).map(|(x, y)| x - t2 * y).collect();
                if pb.project_mass(&mut alt) {
                    let da = pb.lagrangian_difference(&u, &alt, lambda);
                    if da < de {
                        trial = alt;
                        tau = t2;
                    }
                }
            }
        }
        std::mem::swap(&mut u, &mut trial);
        ev = pb.eval(&u);
        lambda = ev.multiplier(p);
        pb.constrained_gradient(&u, lambda, &mut g);
        residual = pb.residual(&g, ev.mass);
        trace.push(TraceRow {
            iteration: iterations,
            energy: ev.energy(),
            residual,
            step: tau,
            boundary_mass_fraction: boundary_fraction(&u),
        });
        prev = Some((grad, dir, gg));
        tau = (tau * 1.5).min(cfg.step * 16.0);
        converged = residual <= cfg.residual_tol;
        diverged = ev.energy() < cfg.divergence_floor;
    }

    let e = ev.energy();
    let classification = if diverged || (p >= 6.0 && e < -cfg.energy_tol * ev.kinetic) {
        Classification::UnboundedBelow
    } else if !converged {
        Classification::Inconclusive
    } else if e < -cfg.energy_tol * ev.kinetic {
        Classification::GroundState
    } else {
        Classification::SpreadToZero
    };
    Ok(SolveOutcome {
        classification,
        final_energy: e,
        kinetic: ev.kinetic,
        potential: ev.potential,
        boundary_mass_fraction: boundary_fraction(&u),
        minimizer: u0.with_dofs(u)?,
        lagrange_multiplier: lambda,
        residual,
        iterations,
        p,
        mu,
        trace,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve from every initializer in parallel and keep the lowest converged
/// energy; unconverged runs are used only when nothing converged.
pub fn minimize_multistart(
    graph: &Arc<MetricGraph>,
    p: f64,
    mu: f64,
    cfg: &SolverConfig,
    inits: &[Initializer],
) -> Result<SolveOutcome> {
    if inits.is_empty() {
        return Err(invalid("at least one initializer is required"));
    }
    let runs: Vec<Result<SolveOutcome>> =
        inits.par_iter().map(|init| minimize(graph, p, mu, cfg, init)).collect();
    let mut best: Option<SolveOutcome> = None;
    let rank = |o: &SolveOutcome| o.classification == Classification::Inconclusive;
    for r in runs {
        let o = r?;
        let better = match &best {
            None => true,
            Some(b) => (rank(&o), o.final_energy) < (rank(b), b.final_energy),
        };
        if better {
            best = Some(o);
        }
    }
    Ok(best.expect("inits is non-empty"))
}

/// Multiplier `λ = (‖u'‖² - ‖u‖_p^p)/μ` and relative residual of the
/// stationarity equation `-u'' - |u|^{p-2}u = λu` over the free dofs, with
/// the truncation boundary held at zero.
pub fn euler_lagrange_residual(u: &GraphFunction, p: f64) -> Result<(f64, f64)> {
    euler_lagrange_residual_with(u, p, BoundaryCondition::Dirichlet)
}

pub fn euler_lagrange_residual_with(u: &GraphFunction, p: f64, bc: BoundaryCondition) -> Result<(f64, f64)> {
    if !(p > 2.0 && p.is_finite()) {
        return Err(invalid(format!("p must exceed 2, got {p}")));
    }
    let d = Discretization::new(Arc::clone(u.graph()), u.samples_per_edge(), bc);
    let x = u.dofs();
    let m = d.mass(x);
    if !(m > 0.0) {
        return Err(Error::DegenerateInput("zero mass".into()));
    }
    let pb = Problem { d: &d, p, mu: m };
    let ev = pb.eval(x);
    let lambda = ev.multiplier(p);
    let mut g = vec![0.0; x.len()];
    pb.constrained_gradient(x, lambda, &mut g);
    Ok((lambda, pb.residual(&g, m)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalMass {
    pub mu_star: f64,
    pub bracket: (f64, f64),
    /// Every solve as `(μ, classification, energy)`, in evaluation order.
    pub history: Vec<(f64, Classification, f64)>,
}

/// Bisection on the predicate "the solve returns a ground state" until the
/// bracket satisfies `hi - lo <= tol * lo`. Every solve is a multi-start over
/// `inits`, plus the last ground state found, rescaled.
pub fn bisect_critical_mass(
    graph: &Arc<MetricGraph>,
    p: f64,
    mu_lo: f64,
    mu_hi: f64,
    cfg: &SolverConfig,
    tol: f64,
    inits: &[Initializer],
) -> Result<CriticalMass> {
    if !(4.0..6.0).contains(&p) {
        return Err(invalid(format!("critical mass search needs p in [4, 6), got {p}")));
    }
    if !(mu_lo > 0.0 && mu_hi > mu_lo) {
        return Err(Error::Bracket(format!("need 0 < mu_lo < mu_hi, got [{mu_lo}, {mu_hi}]")));
    }
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let mut history = Vec::new();
    let mut last_ground: Option<GraphFunction> = None;
    let probe = |mu: f64, history: &mut Vec<(f64, Classification, f64)>, last: &mut Option<GraphFunction>| {
        let mut all = inits.to_vec();
        if let Some(f) = last.as_ref() {
            all.push(Initializer::Given(rescale_mass(f, mu)?));
        }
        let o = minimize_multistart(graph, p, mu, cfg, &all)?;
        history.push((mu, o.classification, o.final_energy));
        match o.classification {
            Classification::GroundState => {
                *last = Some(o.minimizer);
                Ok(true)
            }
            Classification::SpreadToZero => Ok(false),
            c => Err(Error::Bracket(format!("solve at mu = {mu} returned {c}"))),
        }
    };
    if !probe(mu_hi, &mut history, &mut last_ground)? {
        return Err(Error::Bracket(format!("no ground state at mu_hi = {mu_hi}")));
    }
    if probe(mu_lo, &mut history, &mut last_ground)? {
        return Err(Error::Bracket(format!("ground state already at mu_lo = {mu_lo}")));
    }
    let (mut lo, mut hi) = (mu_lo, mu_hi);
    while hi - lo > tol * lo {
        let mid = 0.5 * (lo + hi);
        if probe(mid, &mut history, &mut last_ground)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(CriticalMass { mu_star: 0.5 * (lo + hi), bracket: (lo, hi), history })
}

/// Settings of the squeezed-profile probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Sample intervals per unit of profile width.
    pub intervals_per_width: f64,
    pub min_samples_per_edge: usize,
    pub max_samples_per_edge: usize,
    /// Largest relative energy change tolerated when the sampling doubles.
    pub gate_tol: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            intervals_per_width: 40.0,
            min_samples_per_edge: 33,
            max_samples_per_edge: 4097,
            gate_tol: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnboundedProbe {
    pub width: f64,
    pub samples_per_edge: usize,
    pub energy: f64,
    pub refined_energy: f64,
    pub relative_change: f64,
    pub gate_passed: bool,
}

/// Energies at `p = 6` of `x -> sech(d(x)/w)` rescaled to mass `mu`, where
/// `d` is the distance to the midpoint of the edge nearest the center.
/// The sampling grows like `1/w`; each energy is recomputed with doubled
/// sampling as a convergence check.
pub fn demonstrate_unbounded(
    graph: &Arc<MetricGraph>,
    mu: f64,
    widths: &[f64],
    probe: &ProbeConfig,
) -> Result<Vec<UnboundedProbe>> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(invalid(format!("mass must be positive, got {mu}")));
    }
    if widths.is_empty() {
        return Err(invalid("width sequence is empty"));
    }
    for (k, &w) in widths.iter().enumerate() {
        if !(w > 0.0 && w.is_finite()) {
            return Err(invalid(format!("width must be positive, got {w}")));
        }
        if k > 0 && w >= widths[k - 1] {
            return Err(invalid("widths must be strictly decreasing"));
        }
    }
    let c = central_vertex(graph);
    let edge = graph.adjacency(c).first().map(|&(e, _)| e).ok_or_else(|| invalid("isolated center"))?;
    let src = crate::graph::GraphPoint { edge, offset: 0.5 * graph.edge(edge).length };
    let dist = graph.distances_from_point(src);
    let min_len = graph.edges().iter().map(|e| e.length).fold(f64::INFINITY, f64::min);
    let energy_at = |w: f64, n: usize| -> Result<f64> {
        let g = Arc::clone(graph);
        let f = |e: usize, s: f64| (g.point_distance(&dist, Some(src), e, s) / w).cosh().recip();
        let u = GraphFunction::from_fns(Arc::clone(graph), n, |v| (dist[v] / w).cosh().recip(), f)?;
        Ok(energy(&rescale_mass(&u, mu)?, 6.0)?.total)
    };
    widths
        .par_iter()
        .map(|&w| {
            let intervals = (probe.intervals_per_width * min_len / w).ceil() as usize;
            let n = (intervals + 1).max(probe.min_samples_per_edge);
            let refined = 2 * (n - 1) + 1;
            if refined > probe.max_samples_per_edge {
                return Err(Error::Resolution(format!(
                    "width {w} needs {refined} samples per edge, limit is {}",
                    probe.max_samples_per_edge
                )));
            }
            let e = energy_at(w, n)?;
            let e2 = energy_at(w, refined)?;
            let relative_change = (e2 - e).abs() / e2.abs().max(f64::MIN_POSITIVE);
            Ok(UnboundedProbe {
                width: w,
                samples_per_edge: n,
                energy: e,
                refined_energy: e2,
                relative_change,
                gate_passed: relative_change < probe.gate_tol,
            })
        })
        .collect()
}
