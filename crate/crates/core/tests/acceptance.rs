//! Acceptance suite: one test per criterion, each printing a single
//! `criterion N: PASS|FAIL ...` line before asserting.
//!
//! Reference values are recomputed here from their own formulas (closed-form
//! integrals, the explicit quartic soliton, Simpson quadrature, plane
//! geometry) rather than read back from the library.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use hexnls::analytic::{
    critical_mass_from_constant, trial_energy_terms, trial_function, trial_normalization,
};
use hexnls::calculus::{gradient_norms, integrate_power, GraphFunction};
use hexnls::experiment::{run, ExperimentKind, ExperimentSpec};
use hexnls::functionals::{
    central_vertex, estimate_sharp_constant_with, inequality_ratio, random_corpus, AscentConfig,
    InequalityKind,
};
use hexnls::graph::{build_line, EdgeKind};
use hexnls::lattice::{build_honeycomb, decompose_bridges, decompose_paths};
use hexnls::solver::{
    bisect_critical_mass, demonstrate_unbounded, minimize_multistart, Classification, Initializer,
    ProbeConfig, SolverConfig,
};

fn report(n: u32, pass: bool, detail: String) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} failed: {detail}");
}

fn lp_closed(eps: f64, p: f64) -> f64 {
    let e = (p * eps).exp();
    3.0 * (e + 1.0) / (p * eps * (e - 1.0))
}

fn kinetic_closed(eps: f64) -> f64 {
    let e = (2.0 * eps).exp();
    3.0 * eps * (e + 1.0) / (2.0 * (e - 1.0))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn inits() -> Vec<Initializer> {
    ["soliton-bump", "trial-eps", "uniform"].iter().map(|s| Initializer::named(s).unwrap()).collect()
}

#[test]
fn criterion_01_closed_form_integrals() {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for eps in [0.1f64, 0.2, 0.5] {
        let r = (10.0 / eps).ceil() as usize;
        let lat = build_honeycomb(r, 1.0).unwrap();
        let u = trial_function(&lat, eps, 65).unwrap();
        let kin = gradient_norms(&u).1;
        worst = worst.max(rel(kin, kinetic_closed(eps)));
        for p in [2.0, 3.0, 4.0] {
            worst = worst.max(rel(integrate_power(&u, p).unwrap(), lp_closed(eps, p)));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    report(1, worst < 1e-3 && secs < 30.0, format!("worst relative error {worst:e} in {secs:.1} s"));
}

#[test]
fn criterion_02_normalization_identity() {
    let mut worst_alg: f64 = 0.0;
    let mut worst_quad: f64 = 0.0;
    for eps in [0.1f64, 0.2, 0.5] {
        let lat = build_honeycomb((10.0 / eps).ceil() as usize, 1.0).unwrap();
        // one Richardson step on the trapezoid rule
        let coarse = integrate_power(&trial_function(&lat, eps, 33).unwrap(), 2.0).unwrap();
        let fine = integrate_power(&trial_function(&lat, eps, 65).unwrap(), 2.0).unwrap();
        let quad = (4.0 * fine - coarse) / 3.0;
        for mu in [0.5, 1.0, 2.0] {
            let k = trial_normalization(eps, mu).unwrap();
            worst_alg = worst_alg.max(rel(k * k * lp_closed(eps, 2.0), mu));
            worst_quad = worst_quad.max(rel(k * k * quad, mu));
        }
    }
    report(
        2,
        worst_alg < 1e-12 && worst_quad < 1e-6,
        format!("9 combinations, algebraic {worst_alg:e}, quadrature {worst_quad:e}"),
    );
}

#[test]
fn criterion_03_energy_exponents() {
    let eps: Vec<f64> = (0..21).map(|k| 10f64.powf(-3.0 + 2.0 * k as f64 / 20.0)).collect();
    let x: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let fit = |y: &[f64]| {
        let n = x.len() as f64;
        let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        let num: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        num / x.iter().map(|a| (a - mx).powi(2)).sum::<f64>()
    };
    let mut ok = true;
    let mut detail = Vec::new();
    for p in [3.0, 5.0] {
        let (mut k, mut v) = (Vec::new(), Vec::new());
        for &e in &eps {
            let (a, b) = trial_energy_terms(e, p, 1.0).unwrap();
            k.push(a.abs().ln());
            v.push(b.abs().ln());
        }
        let (sk, sv) = (fit(&k), fit(&v));
        ok &= (sk - 2.0).abs() <= 0.02 && (sv - (p - 2.0)).abs() <= 0.05;
        detail.push(format!("p={p}: kinetic {sk:.4}, potential {sv:.4}"));
    }
    report(3, ok, detail.join(", "));
}

fn corpus_and_witnesses(kind: InequalityKind, ps: &[f64]) -> (f64, f64, usize) {
    let mut corpus_max: f64 = 0.0;
    let mut ascent_max: f64 = 0.0;
    let mut count = 0;
    for (r, size) in [(8usize, 1000usize), (5, 200)] {
        let g = build_honeycomb(r, 1.0).unwrap().graph;
        let corpus = random_corpus(&g, central_vertex(&g), size, 9, 11).unwrap();
        count += corpus.len();
        for &p in ps {
            for u in &corpus {
                corpus_max = corpus_max.max(inequality_ratio(u, kind, p).unwrap().value);
            }
            let mut cfg = AscentConfig::new(100, 11);
            cfg.samples_per_edge = 9;
            let est = estimate_sharp_constant_with(kind, p, Arc::clone(&g), &cfg, &[]).unwrap();
            ascent_max = ascent_max.max(est.c_hat);
        }
    }
    (corpus_max, ascent_max, count)
}

#[test]
fn criterion_04_sobolev_bound() {
    let t = Instant::now();
    let bound = 2.0 * 2f64.sqrt();
    let (c, a, n) = corpus_and_witnesses(InequalityKind::Sobolev2d, &[2.0]);
    let secs = t.elapsed().as_secs_f64();
    report(
        4,
        c.max(a) <= bound * 1.01 && secs < 120.0,
        format!("{n} corpus functions max {c}, 2x50 witnesses max {a}, bound {bound}, {secs:.1} s"),
    );
}

#[test]
fn criterion_05_line_gagliardo_nirenberg() {
    let (c, a, n) = corpus_and_witnesses(InequalityKind::Gn1d, &[3.0, 4.0, 5.0, 6.0]);
    report(5, c.max(a) <= 1.01, format!("{n} corpus functions max {c}, witnesses max {a}"));
}

#[test]
fn criterion_06_subcritical_ground_states() {
    let cfg = SolverConfig { samples_per_edge: 9, ..SolverConfig::default() };
    let g20 = build_honeycomb(20, 1.0).unwrap().graph;
    let g30 = build_honeycomb(30, 1.0).unwrap().graph;
    let mut ok = true;
    let mut detail = Vec::new();
    for mu in [0.1, 1.0, 10.0] {
        let a = minimize_multistart(&g20, 3.0, mu, &cfg, &inits()).unwrap();
        let b = minimize_multistart(&g30, 3.0, mu, &cfg, &inits()).unwrap();
        let drift = rel(a.final_energy, b.final_energy);
        let good = a.classification == Classification::GroundState
            && a.final_energy < 0.0
            && a.residual < 1e-6
            && drift < 1e-3;
        ok &= good;
        detail.push(format!(
            "mu={mu}: {} E={:.6e} res={:.1e} R30 drift {drift:.1e}",
            a.classification, a.final_energy, a.residual
        ));
    }
    report(6, ok, detail.join("; "));
}

#[test]
fn criterion_07_critical_mass_structure() {
    let p = 5.0;
    let cfg = SolverConfig { samples_per_edge: 9, ..SolverConfig::default() };
    let g = build_honeycomb(20, 1.0).unwrap().graph;
    let mus: Vec<f64> = (0..13).map(|k| 10f64.powf(-3.0 + 5.0 * k as f64 / 12.0)).collect();
    let classes: Vec<Classification> = mus
        .iter()
        .map(|&mu| minimize_multistart(&g, p, mu, &cfg, &inits()).unwrap().classification)
        .collect();
    let ups: Vec<usize> = (1..classes.len())
        .filter(|&k| {
            classes[k - 1] == Classification::SpreadToZero && classes[k] == Classification::GroundState
        })
        .collect();
    let only_two =
        classes.iter().all(|c| matches!(c, Classification::SpreadToZero | Classification::GroundState));
    let single = ups.len() == 1
        && only_two
        && classes[..ups[0]].iter().all(|c| *c == Classification::SpreadToZero)
        && classes[ups[0]..].iter().all(|c| *c == Classification::GroundState);
    if !single {
        report(7, false, format!("sweep classifications {classes:?}"));
        return;
    }
    let (lo, hi) = (mus[ups[0] - 1], mus[ups[0]]);
    let cm = bisect_critical_mass(&g, p, lo, hi, &cfg, 0.05, &inits()).unwrap();
    let (blo, bhi) = cm.bracket;
    let width = (bhi - blo) / blo;
    let mut acfg = AscentConfig::new(200, 1);
    acfg.samples_per_edge = 9;
    let est = estimate_sharp_constant_with(InequalityKind::GnInterp, p, Arc::clone(&g), &acfg, &[]).unwrap();
    let lower = (p / (2.0 * est.c_hat)).powf(2.0 / (p - 2.0));
    assert!(rel(lower, critical_mass_from_constant(p, est.c_hat).unwrap()) < 1e-12);
    report(
        7,
        width < 0.05 && blo >= lower * 0.95,
        format!("one transition in ({lo:.3}, {hi:.3}); bracket [{blo:.4}, {bhi:.4}] width {width:.3}; C_hat {:.5} gives lower bound {lower:.4}", est.c_hat),
    );
}

#[test]
fn criterion_08_critical_power_unbounded() {
    let g = build_honeycomb(4, 1.0).unwrap().graph;
    let widths = [0.5, 0.25, 0.125, 0.0625, 0.03125];
    let probe = ProbeConfig::default();
    let small = demonstrate_unbounded(&g, 0.01, &widths, &probe).unwrap();
    let large = demonstrate_unbounded(&g, 10.0, &widths, &probe).unwrap();
    let small_min = small.iter().map(|p| p.energy).fold(f64::INFINITY, f64::min);
    let e: Vec<f64> = large.iter().map(|p| p.energy).collect();
    let monotone = e.windows(2).all(|w| w[1] < w[0]);
    let gates = large.iter().all(|p| p.gate_passed);
    let last = *e.last().unwrap();
    report(
        8,
        small_min >= -1e-6 && monotone && gates && last < -10.0,
        format!("mu=0.01 min energy {small_min:.3e}; mu=10 energies {e:.3?}, gates {gates}"),
    );
}

/// Quartic line soliton of mass `mu`: `u'' + u³ = ωu` gives
/// `u = √(2ω) sech(√ω x)` with mass `4√ω`.
fn quartic_soliton(mu: f64) -> (f64, f64) {
    let s = mu / 4.0;
    ((2.0f64).sqrt() * s, s)
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

#[test]
fn criterion_09_line_soliton() {
    let (mu, half) = (2.0, 30.0);
    let g = Arc::new(build_line(half).unwrap());
    let cfg = SolverConfig { samples_per_edge: 33, ..SolverConfig::default() };
    let init = [Initializer::named("soliton-bump").unwrap()];
    let o = minimize_multistart(&g, 4.0, mu, &cfg, &init).unwrap();
    let (amp, k) = quartic_soliton(mu);
    let phi = |x: f64| amp / (k * x).cosh();
    let oracle = simpson(
        |x| {
            let d = -amp * k * (k * x).tanh() / (k * x).cosh();
            0.5 * d * d - phi(x).powi(4) / 4.0
        },
        -half,
        half,
        200_000,
    );
    assert!((oracle + 1.0 / 12.0).abs() < 1e-9);

    let mut u = o.minimizer.clone();
    if u.dofs().iter().sum::<f64>() < 0.0 {
        u = u.scaled(-1.0);
    }
    let x_of = |e: usize, s: f64| g.vertices()[g.edge(e).tail].position[0] + s;
    let xs = GraphFunction::from_fns(Arc::clone(&g), 33, |v| g.vertices()[v].position[0], x_of).unwrap();
    let mut num = 0.0;
    let mut den = 0.0;
    for e in g.edges() {
        let (a, x) = (u.edge_samples(e.id), xs.edge_samples(e.id));
        let h = u.step(e.id);
        for k in 0..a.len() {
            let w = if k == 0 || k == a.len() - 1 { 0.5 * h } else { h };
            num += w * a[k] * a[k] * x[k];
            den += w * a[k] * a[k];
        }
    }
    let x0 = num / den;
    let target = GraphFunction::from_fns(
        Arc::clone(&g),
        33,
        |v| phi(g.vertices()[v].position[0] - x0),
        |e, s| phi(x_of(e, s) - x0),
    )
    .unwrap();
    let diff = u.with_dofs(u.dofs().iter().zip(target.dofs()).map(|(a, b)| a - b).collect()).unwrap();
    let l2 = (integrate_power(&diff, 2.0).unwrap() / integrate_power(&target, 2.0).unwrap()).sqrt();
    let e_err = rel(o.final_energy, oracle);
    report(
        9,
        o.classification == Classification::GroundState && o.final_energy < 0.0 && l2 < 1e-2 && e_err < 1e-3,
        format!(
            "{} E={:.8} oracle {oracle:.8} (rel {e_err:.1e}), L2 distance {l2:.1e}",
            o.classification, o.final_energy
        ),
    );
}

#[test]
fn criterion_10_combinatorics_at_radius_two() {
    let s3 = 3f64.sqrt();
    let lat = build_honeycomb(2, 1.0).unwrap();
    let g = &lat.graph;
    let fam = decompose_paths(&lat);
    let mut exceptions = Vec::new();

    let mut covered = BTreeSet::new();
    for p in fam.l_paths.values().chain(fam.r_paths.values()) {
        covered.extend(p.iter().copied());
    }
    if covered.len() != g.num_edges() {
        exceptions.push(format!("cover has {} of {} edges", covered.len(), g.num_edges()));
    }
    for (&i, lp) in &fam.l_paths {
        let l: BTreeSet<usize> = lp.iter().copied().collect();
        for (&j, rp) in &fam.r_paths {
            let common: Vec<usize> = rp.iter().copied().filter(|e| l.contains(e)).collect();
            let single_horizontal = common.len() == 1 && {
                let e = g.edge(common[0]);
                let (a, b) = (g.vertices()[e.tail].position, g.vertices()[e.head].position);
                (a[1] - b[1]).abs() < 1e-12 && ((a[0] - b[0]).abs() - 1.0).abs() < 1e-12
            };
            if !single_horizontal {
                exceptions.push(format!("L_{i} and R_{j} share {common:?}"));
            }
        }
    }
    // Bridges of one line share the offset x√3/2 + y/2 of their midpoints;
    // the parity rule is read off the line label.
    let bridges = decompose_bridges(&lat);
    let mut placed = BTreeMap::new();
    for (&k, bs) in &bridges.lines {
        let mut offsets = Vec::new();
        for b in bs {
            let e = g.edge(b.edge);
            let (a, c) = (g.vertices()[e.tail].position, g.vertices()[e.head].position);
            offsets.push(0.25 * s3 * (a[0] + c[0]) + 0.25 * (a[1] + c[1]));
            if e.kind != EdgeKind::Down || (b.j - k).rem_euclid(2) != 0 {
                exceptions.push(format!("bridge {} on line {k} with j={}", b.edge, b.j));
            }
            if placed.insert(b.edge, k).is_some() {
                exceptions.push(format!("bridge {} on two lines", b.edge));
            }
        }
        if offsets.iter().any(|o| (o - offsets[0]).abs() > 1e-9) {
            exceptions.push(format!("line {k} is not straight"));
        }
    }
    let downs = g.edges().iter().filter(|e| e.kind == EdgeKind::Down).count();
    if placed.len() != downs {
        exceptions.push(format!("{} of {downs} bridges placed", placed.len()));
    }
    report(10, exceptions.is_empty(), format!("{} exceptions {exceptions:?}", exceptions.len()));
}

fn small_spec(kind: ExperimentKind, out: &Path) -> ExperimentSpec {
    let mut s = ExperimentSpec::defaults(kind);
    s.out = out.to_path_buf();
    s.seed = 5;
    s.solver.seed = 5;
    match kind {
        ExperimentKind::TrialForms => s.eps = vec![0.5],
        ExperimentKind::Inequalities => {
            s.radius = Some(4);
            s.corpus_size = 100;
            s.witnesses = 6;
            s.ascent_budget = 20;
        }
        ExperimentKind::PhaseDiagram => {
            s.radius = Some(6);
            s.mu = vec![0.1, 10.0];
        }
        ExperimentKind::CriticalMass => {
            s.radius = Some(6);
            s.mu = vec![0.1, 1.0, 10.0, 100.0];
            s.bisection_tol = 0.3;
            s.witnesses = 6;
            s.ascent_budget = 20;
        }
        ExperimentKind::UnboundedP6 => s.radius = Some(2),
        ExperimentKind::SolitonCheck => s.half_length = 10.0,
    }
    s
}

/// Data files of a run, with the timing column of phase tables removed.
fn data_files(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        if name == "manifest.json" {
            continue;
        }
        let mut body = std::fs::read_to_string(&path).unwrap();
        if body.starts_with("p,mu,classification,energy,runtime_ms") {
            body = body.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string() + "\n").collect();
        }
        out.insert(name, body);
    }
    out
}

#[test]
fn criterion_11_reproducibility() {
    let tmp = tempfile::tempdir().unwrap();
    let mut differing = Vec::new();
    let mut files = 0;
    for kind in ExperimentKind::ALL {
        let a = tmp.path().join(format!("{kind}-a"));
        let b = tmp.path().join(format!("{kind}-b"));
        run(&small_spec(kind, &a)).unwrap();
        run(&small_spec(kind, &b)).unwrap();
        let (fa, fb) = (data_files(&a), data_files(&b));
        assert!(!fa.is_empty());
        files += fa.len();
        if fa != fb {
            differing.push(kind.to_string());
        }
    }
    report(
        11,
        differing.is_empty(),
        format!("{files} data files over 6 kinds, differing kinds {differing:?}"),
    );
}
