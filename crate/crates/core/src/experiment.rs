//! Batch experiments behind the `hexnls` binary.
//!
//! A run takes an [`ExperimentSpec`], writes plot-ready CSV/JSON files and a
//! `manifest.json` into the output directory, and reports the outcome of its
//! embedded assertions. Data files depend only on the spec; timings live in
//! the manifest and in the `runtime_ms` column of phase tables.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analytic::{
    critical_mass_from_constant, soliton_profile, trial_energy_terms, trial_function, trial_kinetic_integral,
    trial_lp_integral, trial_normalization, SolitonParams,
};
use crate::calculus::{gradient_norms, integrate_power, GraphFunction};
use crate::error::{invalid, Error, Result};
use crate::functionals::{
    central_vertex, estimate_sharp_constant_with, evaluate_corpus, random_corpus, render_corpus_csv,
    AscentConfig, InequalityKind,
};
use crate::graph::{build_line, MetricGraph};
use crate::lattice::{build_honeycomb, build_square_grid};
use crate::solver::{
    bisect_critical_mass, demonstrate_unbounded, minimize_multistart, Classification, Initializer,
    ProbeConfig, SolverConfig,
};

/// Version reported in manifests, `git describe` output when available.
pub const VERSION: &str = env!("HEXNLS_VERSION");

/// Critical mass of the quintic problem on the real line, `π√3/2`.
pub const LINE_CRITICAL_MASS_P6: f64 = 2.720_699_046_351_326_4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Inequalities,
    TrialForms,
    PhaseDiagram,
    CriticalMass,
    #[serde(rename = "unbounded-p6")]
    UnboundedP6,
    SolitonCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Inequalities,
        ExperimentKind::TrialForms,
        ExperimentKind::PhaseDiagram,
        ExperimentKind::CriticalMass,
        ExperimentKind::UnboundedP6,
        ExperimentKind::SolitonCheck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Inequalities => "inequalities",
            ExperimentKind::TrialForms => "trial-forms",
            ExperimentKind::PhaseDiagram => "phase-diagram",
            ExperimentKind::CriticalMass => "critical-mass",
            ExperimentKind::UnboundedP6 => "unbounded-p6",
            ExperimentKind::SolitonCheck => "soliton-check",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown experiment kind '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphFamily {
    Honeycomb,
    Square,
    Line,
}

/// Full description of a run. Every field has a per-kind default; a JSON
/// file only needs the fields it changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub family: GraphFamily,
    /// Truncation radius of lattice families. For `trial-forms`, `null`
    /// picks `ceil(10 / (ε l))` per `ε`.
    pub radius: Option<usize>,
    /// Half length of the `line` family.
    pub half_length: f64,
    pub edge_length: f64,
    pub p: Vec<f64>,
    pub mu: Vec<f64>,
    pub eps: Vec<f64>,
    /// Exponents of the small-`ε` slope fits in `trial-forms`.
    pub slope_p: Vec<f64>,
    pub seed: u64,
    /// Sampling of every function in the run; copied into the solver config.
    pub samples_per_edge: usize,
    pub corpus_size: usize,
    /// Ascent starts per sharp-constant estimate.
    pub witnesses: usize,
    pub ascent_budget: usize,
    /// Main relative tolerance of the kind's assertions.
    pub tolerance: f64,
    pub energy_tolerance: f64,
    pub widths: Vec<f64>,
    /// Depth the squeezed family must reach in `unbounded-p6`.
    pub energy_target: f64,
    /// Bisection bracket; `null` takes it from the sweep.
    pub bracket: Option<(f64, f64)>,
    pub bisection_tol: f64,
    pub initializers: Vec<String>,
    pub solver: SolverConfig,
    pub probe: ProbeConfig,
    pub out: PathBuf,
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
}

impl ExperimentSpec {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let mut s = ExperimentSpec {
            kind,
            family: GraphFamily::Honeycomb,
            radius: Some(20),
            half_length: 30.0,
            edge_length: 1.0,
            p: vec![3.0],
            mu: vec![1.0],
            eps: vec![],
            slope_p: vec![],
            seed: 0,
            samples_per_edge: 9,
            corpus_size: 1000,
            witnesses: 50,
            ascent_budget: 200,
            tolerance: 1e-3,
            energy_tolerance: 1e-3,
            widths: vec![],
            energy_target: 10.0,
            bracket: None,
            bisection_tol: 0.05,
            initializers: ["soliton-bump", "trial-eps", "uniform"].map(String::from).to_vec(),
            solver: SolverConfig::default(),
            probe: ProbeConfig::default(),
            out: PathBuf::from("out").join(kind.as_str()),
        };
        match kind {
            ExperimentKind::TrialForms => {
                s.radius = None;
                s.eps = vec![0.1, 0.2, 0.5];
                s.p = vec![2.0, 3.0, 4.0];
                s.mu = vec![0.5, 1.0, 2.0];
                s.slope_p = vec![3.0, 5.0];
                s.samples_per_edge = 33;
                s.energy_tolerance = 1e-6;
            }
            ExperimentKind::Inequalities => {
                s.radius = Some(8);
                s.p = vec![3.0, 4.0, 5.0, 6.0];
                s.tolerance = 1e-2;
                s.ascent_budget = 100;
            }
            ExperimentKind::PhaseDiagram => {
                // Small masses at p < 4 spread over tens of cells, so the
                // window is wide and the sampling coarse.
                s.radius = Some(60);
                s.samples_per_edge = 3;
                s.p = vec![3.0, 5.0];
                s.mu = vec![0.01, 1.0, 100.0];
            }
            ExperimentKind::CriticalMass => {
                s.p = vec![5.0];
                s.mu = log_grid(1e-3, 1e2, 13);
            }
            ExperimentKind::UnboundedP6 => {
                s.radius = Some(4);
                s.p = vec![6.0];
                s.mu = vec![0.01, 10.0];
                s.widths = vec![0.5, 0.25, 0.125, 0.0625, 0.03125];
                s.tolerance = 1e-6;
            }
            ExperimentKind::SolitonCheck => {
                s.family = GraphFamily::Line;
                s.p = vec![4.0];
                s.mu = vec![2.0];
                s.samples_per_edge = 33;
                s.tolerance = 1e-2;
                s.initializers = vec!["soliton-bump".into()];
            }
        }
        s.solver.samples_per_edge = s.samples_per_edge;
        s
    }

    /// Defaults for `kind` overlaid with the JSON object `text`. Nested
    /// objects merge key by key; a `kind` in the file must agree.
    pub fn from_json(kind: ExperimentKind, text: &str) -> Result<Self> {
        let user: Value = serde_json::from_str(text)?;
        if !user.is_object() {
            return Err(Error::Parse("experiment spec must be a JSON object".into()));
        }
        if let Some(k) = user.get("kind") {
            let k: ExperimentKind = serde_json::from_value(k.clone())?;
            if k != kind {
                return Err(invalid(format!("spec file is for '{k}', command is '{kind}'")));
            }
        }
        let mut base = serde_json::to_value(Self::defaults(kind))?;
        merge(&mut base, user, "")?;
        let mut s: Self = serde_json::from_value(base)?;
        s.solver.samples_per_edge = s.samples_per_edge;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let need = |name: &str, v: &[f64]| {
            if v.is_empty() {
                Err(invalid(format!("parameter list '{name}' is empty")))
            } else if v.iter().any(|x| !x.is_finite()) {
                Err(invalid(format!("parameter list '{name}' has a non-finite entry")))
            } else {
                Ok(())
            }
        };
        need("p", &self.p)?;
        if !(self.edge_length > 0.0 && self.edge_length.is_finite()) {
            return Err(invalid("edge_length must be positive"));
        }
        if !(self.tolerance > 0.0) || !(self.energy_tolerance > 0.0) {
            return Err(invalid("tolerances must be positive"));
        }
        self.solver.validate()?;
        match self.kind {
            ExperimentKind::TrialForms => {
                need("eps", &self.eps)?;
                need("mu", &self.mu)?;
                need("slope_p", &self.slope_p)?;
            }
            ExperimentKind::Inequalities => {
                if self.corpus_size == 0 {
                    return Err(invalid("corpus_size must be positive"));
                }
            }
            ExperimentKind::PhaseDiagram | ExperimentKind::CriticalMass => {
                need("mu", &self.mu)?;
                if self.initializers.is_empty() {
                    return Err(invalid("parameter list 'initializers' is empty"));
                }
            }
            ExperimentKind::UnboundedP6 => {
                need("mu", &self.mu)?;
                need("widths", &self.widths)?;
                if self.p != [6.0] {
                    return Err(invalid("unbounded-p6 runs at p = 6 only"));
                }
            }
            ExperimentKind::SolitonCheck => {
                need("mu", &self.mu)?;
                if self.family != GraphFamily::Line {
                    return Err(invalid("soliton-check needs the line family"));
                }
            }
        }
        Ok(())
    }

    fn initializers(&self) -> Result<Vec<Initializer>> {
        self.initializers.iter().map(|s| Initializer::named(s)).collect()
    }

    fn graph(&self) -> Result<Arc<MetricGraph>> {
        let r = self.radius.ok_or_else(|| invalid("this experiment needs a radius"))?;
        Ok(match self.family {
            GraphFamily::Honeycomb => build_honeycomb(r, self.edge_length)?.graph,
            GraphFamily::Square => Arc::new(build_square_grid(r, self.edge_length)?),
            GraphFamily::Line => Arc::new(build_line(self.half_length)?),
        })
    }
}

fn merge(base: &mut Value, user: Value, path: &str) -> Result<()> {
    let Value::Object(over) = user else {
        *base = user;
        return Ok(());
    };
    let Value::Object(target) = base else {
        return Err(Error::Parse(format!("'{path}' is not an object")));
    };
    for (k, v) in over {
        let sub = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
        match target.get_mut(&k) {
            Some(slot) if slot.is_object() => merge(slot, v, &sub)?,
            Some(slot) => *slot = v,
            None => return Err(Error::Parse(format!("unknown spec field '{sub}'"))),
        }
    }
    Ok(())
}

/// One cell of a phase diagram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub p: f64,
    pub mu: f64,
    pub classification: Classification,
    pub energy: f64,
    pub runtime_ms: u64,
}

/// Columns `p, mu, classification, energy, runtime_ms`, sorted by `(p, mu)`.
/// Numbers use the shortest exact representation, so parsing the output
/// gives the same points back.
pub fn render_phase_csv(points: &[PhasePoint]) -> Result<String> {
    if points.is_empty() {
        return Err(invalid("no phase points to render"));
    }
    let mut sorted: Vec<&PhasePoint> = points.iter().collect();
    sorted.sort_by(|a, b| a.p.total_cmp(&b.p).then(a.mu.total_cmp(&b.mu)));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["p", "mu", "classification", "energy", "runtime_ms"])?;
    for pt in sorted {
        w.write_record([
            pt.p.to_string(),
            pt.mu.to_string(),
            pt.classification.to_string(),
            pt.energy.to_string(),
            pt.runtime_ms.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn parse_phase_csv(text: &str) -> Result<Vec<PhasePoint>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["p", "mu", "classification", "energy", "runtime_ms"] {
        return Err(Error::Parse("unexpected phase table header".into()));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("'{s}': {e}")));
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(PhasePoint {
                p: num(&rec[0])?,
                mu: num(&rec[1])?,
                classification: rec[2].parse()?,
                energy: num(&rec[3])?,
                runtime_ms: rec[4].parse().map_err(|e| Error::Parse(format!("'{}': {e}", &rec[4])))?,
            })
        })
        .collect()
}

/// Problems with the regime pattern of the points at exponent `p`, read in
/// increasing `μ`: all ground states below 4, a single switch from spreading
/// to ground states in `[4, 6)`, no ground state from 6 on.
pub fn regime_violations(points: &[PhasePoint], p: f64) -> Vec<String> {
    let mut row: Vec<&PhasePoint> = points.iter().filter(|x| x.p == p).collect();
    row.sort_by(|a, b| a.mu.total_cmp(&b.mu));
    let mut out = Vec::new();
    for pt in &row {
        if !matches!(pt.classification, Classification::GroundState | Classification::SpreadToZero) && p < 6.0
        {
            out.push(format!("p={p} mu={}: {}", pt.mu, pt.classification));
        }
    }
    let flips = count_flips(&row);
    if p < 4.0 {
        for pt in row.iter().filter(|x| x.classification != Classification::GroundState) {
            out.push(format!("p={p} mu={}: expected ground_state, got {}", pt.mu, pt.classification));
        }
    } else if p < 6.0 {
        let downward = row
            .windows(2)
            .filter(|w| {
                w[0].classification == Classification::GroundState
                    && w[1].classification == Classification::SpreadToZero
            })
            .count();
        if flips != 1 || downward != 0 {
            out.push(format!("p={p}: {flips} upward and {downward} downward transitions"));
        }
    } else {
        for pt in row.iter().filter(|x| x.classification == Classification::GroundState) {
            out.push(format!("p={p} mu={}: unexpected ground_state", pt.mu));
        }
    }
    out
}

/// Number of `SpreadToZero -> GroundState` steps between consecutive points.
fn count_flips(row: &[&PhasePoint]) -> usize {
    row.windows(2)
        .filter(|w| {
            w[0].classification == Classification::SpreadToZero
                && w[1].classification == Classification::GroundState
        })
        .count()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub kind: ExperimentKind,
    pub assertions: Vec<Assertion>,
    /// Data files written, relative to the output directory.
    pub files: Vec<String>,
    pub timings_ms: BTreeMap<String, u64>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    kind: ExperimentKind,
    passed: bool,
    config: &'a ExperimentSpec,
    files: &'a [String],
    assertions: &'a [Assertion],
    timings_ms: &'a BTreeMap<String, u64>,
}

struct Ctx {
    dir: PathBuf,
    report: Report,
    clock: Instant,
}

impl Ctx {
    fn write(&mut self, name: &str, body: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), body)?;
        self.report.files.push(name.to_string());
        Ok(())
    }

    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.report.assertions.push(Assertion { name: name.into(), passed, detail: detail.into() });
    }

    fn lap(&mut self, stage: &str) {
        let ms = self.clock.elapsed().as_millis() as u64;
        let before: u64 = self.report.timings_ms.values().sum();
        self.report.timings_ms.insert(stage.to_string(), ms.saturating_sub(before));
    }
}

fn ensure_writable(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let probe = dir.join(".write-probe");
    std::fs::write(&probe, b"")?;
    std::fs::remove_file(probe)?;
    Ok(())
}

/// Run `spec`, write its artifacts and manifest, and return the report.
/// Errors are configuration or I/O problems, or solver failures that leave
/// the experiment without an answer.
pub fn run(spec: &ExperimentSpec) -> Result<Report> {
    spec.validate()?;
    ensure_writable(&spec.out)?;
    let mut ctx = Ctx {
        dir: spec.out.clone(),
        report: Report {
            kind: spec.kind,
            assertions: Vec::new(),
            files: Vec::new(),
            timings_ms: BTreeMap::new(),
        },
        clock: Instant::now(),
    };
    match spec.kind {
        ExperimentKind::TrialForms => trial_forms(spec, &mut ctx)?,
        ExperimentKind::Inequalities => inequalities(spec, &mut ctx)?,
        ExperimentKind::PhaseDiagram => phase_diagram(spec, &mut ctx)?,
        ExperimentKind::CriticalMass => critical_mass(spec, &mut ctx)?,
        ExperimentKind::UnboundedP6 => unbounded(spec, &mut ctx)?,
        ExperimentKind::SolitonCheck => soliton_check(spec, &mut ctx)?,
    }
    let total = ctx.clock.elapsed().as_millis() as u64;
    ctx.report.timings_ms.insert("total".into(), total);
    let manifest = Manifest {
        version: VERSION,
        kind: spec.kind,
        passed: ctx.report.passed(),
        config: spec,
        files: &ctx.report.files,
        assertions: &ctx.report.assertions,
        timings_ms: &ctx.report.timings_ms,
    };
    std::fs::write(ctx.dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(ctx.report)
}

fn csv_string(rows: impl IntoIterator<Item = Vec<String>>, header: &[&str]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Least-squares slope of `y` against `x`.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn trial_forms(spec: &ExperimentSpec, ctx: &mut Ctx) -> Result<()> {
    let l = spec.edge_length;
    let n = spec.samples_per_edge;
    let fine = 2 * (n - 1) + 1;
    let mut integrals = Vec::new();
    let mut norms = Vec::new();
    let mut lp_list = spec.p.clone();
    if !lp_list.contains(&2.0) {
        lp_list.push(2.0);
    }
    for &eps in &spec.eps {
        let r = spec.radius.unwrap_or_else(|| (10.0 / (eps * l)).ceil() as usize);
        let lat = build_honeycomb(r, l)?;
        // Every piece is smooth inside an edge, so the trapezoid error expands
        // in even powers of the step and one Richardson step removes h².
        let (coarse, refined) = (trial_function(&lat, eps, n)?, trial_function(&lat, eps, fine)?);
        let extrapolate = |f: &dyn Fn(&GraphFunction) -> Result<f64>| -> Result<f64> {
            Ok((4.0 * f(&refined)? - f(&coarse)?) / 3.0)
        };
        let kin = extrapolate(&|u| Ok(gradient_norms(u).1))?;
        let mut lp = BTreeMap::new();
        for &p in &lp_list {
            lp.insert(p.to_bits(), extrapolate(&|u| integrate_power(u, p))?);
        }
        let kin_exact = trial_kinetic_integral(eps)?;
        for &p in &spec.p {
            let exact = trial_lp_integral(eps, p)?;
            let q = lp[&p.to_bits()];
            let (e_lp, e_kin) = (rel(q, exact), rel(kin, kin_exact));
            let pass = e_lp < spec.tolerance && e_kin < spec.tolerance;
            integrals.push((eps, p, r, q, exact, e_lp, kin, kin_exact, e_kin, pass));
        }
        let mass_exact = trial_lp_integral(eps, 2.0)?;
        for &mu in &spec.mu {
            let k = trial_normalization(eps, mu)?;
            let alg = k * k * mass_exact;
            let quad = k * k * lp[&2f64.to_bits()];
            let pass = rel(alg, mu) < 1e-12 && rel(quad, mu) < spec.energy_tolerance;
            norms.push((eps, mu, k, alg, quad, pass));
        }
    }
    ctx.lap("quadrature");
    let bad = integrals.iter().filter(|r| !r.9).count();
    let worst = integrals.iter().map(|r| r.5.max(r.8)).fold(0.0, f64::max);
    ctx.check(
        "closed-form integrals",
        bad == 0,
        format!("{} cases, worst relative error {worst:e}, tolerance {:e}", integrals.len(), spec.tolerance),
    );
    let bad_norm = norms.iter().filter(|r| !r.5).count();
    let worst_norm = norms.iter().map(|r| rel(r.4, r.1)).fold(0.0, f64::max);
    ctx.check(
        "normalization identity",
        bad_norm == 0,
        format!("{} cases, worst quadrature error {worst_norm:e}", norms.len()),
    );
    let body = csv_string(
        integrals.iter().map(|r| {
            vec![
                r.0.to_string(),
                r.1.to_string(),
                r.2.to_string(),
                r.3.to_string(),
                r.4.to_string(),
                r.5.to_string(),
                r.6.to_string(),
                r.7.to_string(),
                r.8.to_string(),
                pass_str(r.9),
            ]
        }),
        &[
            "eps",
            "p",
            "radius",
            "lp_quadrature",
            "lp_closed",
            "lp_error",
            "kinetic_quadrature",
            "kinetic_closed",
            "kinetic_error",
            "result",
        ],
    )?;
    ctx.write("trial_integrals.csv", &body)?;
    let body = csv_string(
        norms.iter().map(|r| {
            vec![
                r.0.to_string(),
                r.1.to_string(),
                r.2.to_string(),
                r.3.to_string(),
                r.4.to_string(),
                pass_str(r.5),
            ]
        }),
        &["eps", "mu", "k", "mass_algebraic", "mass_quadrature", "result"],
    )?;
    ctx.write("normalization.csv", &body)?;

    let grid = log_grid(1e-3, 1e-1, 21);
    let lx: Vec<f64> = grid.iter().map(|e| e.ln()).collect();
    let mut slopes = Vec::new();
    let mut curves = Vec::new();
    for &p in &spec.slope_p {
        for &mu in &spec.mu {
            let mut kin = Vec::new();
            let mut pot = Vec::new();
            for &eps in &grid {
                let (k, v) = trial_energy_terms(eps, p, mu)?;
                curves.push(vec![
                    p.to_string(),
                    mu.to_string(),
                    eps.to_string(),
                    k.to_string(),
                    v.to_string(),
                ]);
                kin.push(k.abs().ln());
                pot.push(v.abs().ln());
            }
            let (sk, sv) = (slope(&lx, &kin), slope(&lx, &pot));
            slopes.push((p, mu, sk, sv, (sk - 2.0).abs() <= 0.02 && (sv - (p - 2.0)).abs() <= 0.05));
        }
    }
    let bad_slope = slopes.iter().filter(|s| !s.4).count();
    let detail: Vec<String> =
        slopes.iter().map(|s| format!("p={} mu={}: {:.4}/{:.4}", s.0, s.1, s.2, s.3)).collect();
    ctx.check("energy exponents", bad_slope == 0, detail.join(", "));
    ctx.write("energy_terms.csv", &csv_string(curves, &["p", "mu", "eps", "kinetic", "potential"])?)?;
    ctx.write(
        "energy_slopes.csv",
        &csv_string(
            slopes.iter().map(|s| {
                vec![s.0.to_string(), s.1.to_string(), s.2.to_string(), s.3.to_string(), pass_str(s.4)]
            }),
            &["p", "mu", "kinetic_slope", "potential_slope", "result"],
        )?,
    )?;
    ctx.lap("slopes");
    Ok(())
}

fn pass_str(b: bool) -> String {
    if b { "pass" } else { "fail" }.to_string()
}

fn inequalities(spec: &ExperimentSpec, ctx: &mut Ctx) -> Result<()> {
    let g = spec.graph()?;
    let n = spec.samples_per_edge;
    let corpus = random_corpus(&g, central_vertex(&g), spec.corpus_size, n, spec.seed)?;
    let rows = evaluate_corpus(&corpus, &InequalityKind::ALL, &spec.p, spec.edge_length, spec.tolerance)?;
    ctx.lap("corpus");
    ctx.write("corpus.csv", &render_corpus_csv(&rows)?)?;
    for kind in InequalityKind::ALL {
        let mine: Vec<_> = rows.iter().filter(|r| r.name == kind).collect();
        let max = mine.iter().map(|r| r.ratio).fold(0.0, f64::max);
        let fails = mine.iter().filter(|r| !r.pass).count();
        match kind.known_bound(spec.edge_length) {
            Some(b) => ctx.check(
                format!("corpus {kind}"),
                fails == 0,
                format!("{fails} violations in {} rows, max ratio {max} vs bound {b}", mine.len()),
            ),
            None => ctx.check(format!("corpus {kind}"), true, format!("max ratio {max}, no bound")),
        }
    }

    let cfg = AscentConfig {
        budget: spec.ascent_budget,
        seed: spec.seed,
        samples_per_edge: n,
        starts: spec.witnesses,
        boundary: spec.solver.boundary,
    };
    let mut wit = Vec::new();
    for kind in InequalityKind::ALL {
        let Some(bound) = kind.known_bound(spec.edge_length) else { continue };
        let exps: &[f64] = if kind.uses_p() { &spec.p } else { &[2.0] };
        for &p in exps {
            let est = estimate_sharp_constant_with(kind, p, Arc::clone(&g), &cfg, &[])?;
            let pass = est.c_hat <= bound * (1.0 + spec.tolerance);
            let tag = if kind.uses_p() { format!("{kind}_p{p}") } else { kind.to_string() };
            ctx.write(&format!("witness_{tag}.csv"), &est.witness.to_csv())?;
            ctx.check(
                format!("ascent {kind} p={p}"),
                pass,
                format!("best of {} starts {} vs bound {bound}", spec.witnesses, est.c_hat),
            );
            wit.push(vec![
                kind.to_string(),
                p.to_string(),
                est.c_hat.to_string(),
                bound.to_string(),
                est.start.to_string(),
                pass_str(pass),
            ]);
        }
    }
    ctx.write("witnesses.csv", &csv_string(wit, &["name", "p", "c_hat", "bound", "start", "result"])?)?;
    ctx.lap("ascent");
    Ok(())
}

fn sweep(spec: &ExperimentSpec, g: &Arc<MetricGraph>, p: f64, mus: &[f64]) -> Result<Vec<PhasePoint>> {
    let inits = spec.initializers()?;
    mus.par_iter()
        .map(|&mu| {
            let t = Instant::now();
            let o = minimize_multistart(g, p, mu, &spec.solver, &inits)?;
            Ok(PhasePoint {
                p,
                mu,
                classification: o.classification,
                energy: o.final_energy,
                runtime_ms: t.elapsed().as_millis() as u64,
            })
        })
        .collect()
}

fn phase_diagram(spec: &ExperimentSpec, ctx: &mut Ctx) -> Result<()> {
    let g = spec.graph()?;
    let mut points = Vec::new();
    for &p in &spec.p {
        points.extend(sweep(spec, &g, p, &spec.mu)?);
    }
    ctx.lap("sweep");
    ctx.write("phase_diagram.csv", &render_phase_csv(&points)?)?;
    let mut ps = spec.p.clone();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    for p in ps {
        let v = regime_violations(&points, p);
        let detail = if v.is_empty() { "pattern as expected".to_string() } else { v.join("; ") };
        ctx.check(format!("regime p={p}"), v.is_empty(), detail);
    }
    Ok(())
}

#[derive(Serialize)]
struct CriticalRecord {
    p: f64,
    mu_star: f64,
    bracket: (f64, f64),
    relative_width: f64,
    c_hat: f64,
    witness_start: usize,
    mu_lower: f64,
}

fn critical_mass(spec: &ExperimentSpec, ctx: &mut Ctx) -> Result<()> {
    let g = spec.graph()?;
    let inits = spec.initializers()?;
    let mut all_points = Vec::new();
    let mut records = Vec::new();
    let mut history = Vec::new();
    for &p in &spec.p {
        let points = sweep(spec, &g, p, &spec.mu)?;
        let mut row: Vec<&PhasePoint> = points.iter().collect();
        row.sort_by(|a, b| a.mu.total_cmp(&b.mu));
        let flips = count_flips(&row);
        let v = regime_violations(&points, p);
        ctx.check(
            format!("single transition p={p}"),
            v.is_empty() && flips == 1,
            if v.is_empty() { format!("{flips} transition over {} masses", row.len()) } else { v.join("; ") },
        );
        let bracket = match spec.bracket {
            Some(b) => Some(b),
            None => row
                .windows(2)
                .find(|w| {
                    w[0].classification == Classification::SpreadToZero
                        && w[1].classification == Classification::GroundState
                })
                .map(|w| (w[0].mu, w[1].mu)),
        };
        all_points.extend(points);
        ctx.lap(&format!("sweep p={p}"));
        let Some((lo, hi)) = bracket else {
            ctx.check(format!("bisection p={p}"), false, "no bracket available");
            continue;
        };
        let cm = bisect_critical_mass(&g, p, lo, hi, &spec.solver, spec.bisection_tol, &inits)?;
        for &(mu, c, e) in &cm.history {
            history.push(vec![p.to_string(), mu.to_string(), c.to_string(), e.to_string()]);
        }
        ctx.lap(&format!("bisection p={p}"));
        let (blo, bhi) = cm.bracket;
        let width = (bhi - blo) / blo;
        ctx.check(
            format!("bracket width p={p}"),
            width < spec.bisection_tol,
            format!("[{blo}, {bhi}], relative width {width:e}"),
        );
        let cfg = AscentConfig {
            budget: spec.ascent_budget,
            seed: spec.seed,
            samples_per_edge: spec.samples_per_edge,
            starts: spec.witnesses,
            boundary: spec.solver.boundary,
        };
        let est = estimate_sharp_constant_with(InequalityKind::GnInterp, p, Arc::clone(&g), &cfg, &[])?;
        let mu_lower = critical_mass_from_constant(p, est.c_hat)?;
        ctx.lap(&format!("ascent p={p}"));
        ctx.check(
            format!("lower bound p={p}"),
            blo >= mu_lower * 0.95,
            format!("bracket low end {blo} vs bound {mu_lower} from constant {}", est.c_hat),
        );
        records.push(CriticalRecord {
            p,
            mu_star: cm.mu_star,
            bracket: cm.bracket,
            relative_width: width,
            c_hat: est.c_hat,
            witness_start: est.start,
            mu_lower,
        });
    }
    ctx.write("sweep.csv", &render_phase_csv(&all_points)?)?;
    ctx.write("bisection.csv", &csv_string(history, &["p", "mu", "classification", "energy"])?)?;
    ctx.write("critical_mass.json", &serde_json::to_string_pretty(&records)?)?;
    Ok(())
}

fn unbounded(spec: &ExperimentSpec, ctx: &mut Ctx) -> Result<()> {
    let g = spec.graph()?;
    let mut rows = Vec::new();
    for &mu in &spec.mu {
        let probes = demonstrate_unbounded(&g, mu, &spec.widths, &spec.probe)?;
        let energies: Vec<f64> = probes.iter().map(|p| p.energy).collect();
        if mu < LINE_CRITICAL_MASS_P6 {
            let min = energies.iter().copied().fold(f64::INFINITY, f64::min);
            ctx.check(
                format!("bounded mu={mu}"),
                min >= -spec.tolerance,
                format!("lowest probe energy {min}"),
            );
        } else {
            let monotone = energies.windows(2).all(|w| w[1] < w[0]);
            let gates = probes.iter().all(|p| p.gate_passed);
            let last = *energies.last().expect("widths are non-empty");
            ctx.check(
                format!("unbounded mu={mu}"),
                monotone && gates && last < -spec.energy_target,
                format!("monotone {monotone}, gates {gates}, last energy {last}"),
            );
        }
        for pr in probes {
            rows.push(vec![
                mu.to_string(),
                pr.width.to_string(),
                pr.samples_per_edge.to_string(),
                pr.energy.to_string(),
                pr.refined_energy.to_string(),
                pr.relative_change.to_string(),
                pass_str(pr.gate_passed),
            ]);
        }
    }
    ctx.lap("probes");
    ctx.write(
        "unbounded.csv",
        &csv_string(
            rows,
            &["mu", "width", "samples_per_edge", "energy", "refined_energy", "relative_change", "gate"],
        )?,
    )?;
    Ok(())
}

/// Composite Simpson energy of the line soliton on `[-half, half]`.
pub fn soliton_energy_oracle(params: &SolitonParams, half: f64, intervals: usize) -> f64 {
    let m = intervals + intervals % 2;
    let h = 2.0 * half / m as f64;
    let (a, c, p) = (params.peak(), params.scaled_width(), params.p);
    let density = |x: f64| {
        let s = (c * x).cosh().recip();
        let du = -a * c * s * (c * x).tanh();
        0.5 * du * du - (a * s).powf(p) / p
    };
    let mut acc = density(-half) + density(half);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * density(-half + k as f64 * h);
    }
    acc * h / 3.0
}

fn soliton_check(spec: &ExperimentSpec, ctx: &mut Ctx) -> Result<()> {
    let g = spec.graph()?;
    let inits = spec.initializers()?;
    let n = spec.samples_per_edge;
    let x_of = |e: usize, s: f64| g.vertices()[g.edge(e).tail].position[0] + s;
    let mut summary = Vec::new();
    for &p in &spec.p {
        for &mu in &spec.mu {
            let o = minimize_multistart(&g, p, mu, &spec.solver, &inits)?;
            let tag = format!("p{p}_mu{mu}");
            let mut u = o.minimizer.clone();
            if u.dofs().iter().sum::<f64>() < 0.0 {
                u = u.scaled(-1.0);
            }
            // Centre of mass fixes the translation left free by the line.
            let xs = GraphFunction::from_fns(Arc::clone(&g), n, |v| g.vertices()[v].position[0], x_of)?;
            let weighted = u.with_dofs(u.dofs().iter().zip(xs.dofs()).map(|(a, x)| a * a * x).collect())?;
            let x0 = integrate_signed(&weighted) / integrate_power(&u, 2.0)?;
            let params = SolitonParams::new(p, mu)?;
            let phi = GraphFunction::from_fns(
                Arc::clone(&g),
                n,
                |v| soliton_profile(&params, g.vertices()[v].position[0] - x0),
                |e, s| soliton_profile(&params, x_of(e, s) - x0),
            )?;
            let diff = u.with_dofs(u.dofs().iter().zip(phi.dofs()).map(|(a, b)| a - b).collect())?;
            let l2 = (integrate_power(&diff, 2.0)? / integrate_power(&phi, 2.0)?).sqrt();
            let oracle = soliton_energy_oracle(&params, spec.half_length, 400_000);
            let e_err = rel(o.final_energy, oracle);
            ctx.check(
                format!("ground state {tag}"),
                o.is_ground_state() && o.final_energy < 0.0 && o.residual < spec.solver.residual_tol,
                format!("{} with energy {} and residual {:e}", o.classification, o.final_energy, o.residual),
            );
            ctx.check(format!("profile {tag}"), l2 < spec.tolerance, format!("relative L2 distance {l2:e}"));
            ctx.check(
                format!("energy {tag}"),
                e_err < spec.energy_tolerance,
                format!("energy {} vs oracle {oracle}, relative error {e_err:e}", o.final_energy),
            );
            let mut prof: Vec<(f64, f64, f64)> = Vec::new();
            for v in 0..g.num_vertices() {
                prof.push((g.vertices()[v].position[0], u.vertex_value(v), phi.vertex_value(v)));
            }
            for e in g.edges() {
                let h = u.step(e.id);
                for (k, r) in u.interior_range(e.id).enumerate() {
                    prof.push((x_of(e.id, (k + 1) as f64 * h), u.dofs()[r], phi.dofs()[r]));
                }
            }
            prof.sort_by(|a, b| a.0.total_cmp(&b.0));
            ctx.write(
                &format!("soliton_profile_{tag}.csv"),
                &csv_string(
                    prof.iter().map(|r| vec![r.0.to_string(), r.1.to_string(), r.2.to_string()]),
                    &["x", "minimizer", "soliton"],
                )?,
            )?;
            ctx.write(&format!("soliton_trace_{tag}.csv"), &o.trace_csv()?)?;
            summary.push(serde_json::json!({
                "outcome": o.record(&spec.solver),
                "center": x0,
                "l2_distance": l2,
                "oracle_energy": oracle,
            }));
        }
    }
    ctx.lap("solves");
    ctx.write("soliton.json", &serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

/// Trapezoid integral of `u` itself.
fn integrate_signed(u: &GraphFunction) -> f64 {
    u.graph()
        .edges()
        .iter()
        .map(|e| {
            let s = u.edge_samples(e.id);
            let h = u.step(e.id);
            h * (s.iter().sum::<f64>() - 0.5 * (s[0] + s[s.len() - 1]))
        })
        .sum()
}
