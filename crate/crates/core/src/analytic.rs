//! Closed-form reference quantities: line solitons, the exponential trial
//! family `u_ε` on the honeycomb with its exact integrals, and the critical
//! mass attached to an interpolation constant.
//!
//! The trial integrals assume unit edges. Near `ε -> 0` they are written
//! through `coth`, since `(e^x + 1)/(e^x - 1) = coth(x/2)` avoids the
//! cancellation in `e^x - 1`.

use std::sync::Arc;

use crate::calculus::GraphFunction;
use crate::error::{invalid, Result};
use crate::graph::EdgeKind;
use crate::lattice::{decompose_bridges, HoneycombLattice};

fn coth(x: f64) -> f64 {
    1.0 / x.tanh()
}

/// Scaling data of the line soliton `φ_μ(x) = μ^α C sech(c μ^β x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolitonParams {
    pub p: f64,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Amplitude `C` of the unit-mass profile.
    pub amplitude: f64,
    /// Inverse width `c` of the unit-mass profile.
    pub width: f64,
}

impl SolitonParams {
    /// Exponents for mass `mu`; `C` and `c` are fixed so that `φ_1` has unit
    /// mass and is a critical point of the line energy within the family
    /// `C sech(c x)`.
    ///
    /// With `S_p = ∫ sech^p = B(1/2, p/2)` and `C² = c/2`, the energy of the
    /// family is `c²/6 - S_p 2^{-p/2} c^{p/2-1} / p`, stationary at
    /// `c^{3-p/2} = 3 (p/2 - 1) S_p / (p 2^{p/2})`. For `p = 4` this is the
    /// exact soliton `(√2/4) sech(x/4)`.
    pub fn new(p: f64, mu: f64) -> Result<Self> {
        if !(p > 2.0 && p < 6.0) {
            return Err(invalid(format!("soliton requires 2 < p < 6, got {p}")));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(invalid(format!("mass must be positive, got {mu}")));
        }
        let s_p = statrs::function::beta::beta(0.5, p / 2.0);
        let rhs = 3.0 * (p / 2.0 - 1.0) * s_p / (p * 2f64.powf(p / 2.0));
        let width = rhs.powf(1.0 / (3.0 - p / 2.0));
        Ok(SolitonParams {
            p,
            mu,
            alpha: 2.0 / (6.0 - p),
            beta: (p - 2.0) / (6.0 - p),
            amplitude: (width / 2.0).sqrt(),
            width,
        })
    }

    pub fn peak(&self) -> f64 {
        self.mu.powf(self.alpha) * self.amplitude
    }

    /// Inverse width of `φ_μ` itself.
    pub fn scaled_width(&self) -> f64 {
        self.width * self.mu.powf(self.beta)
    }
}

pub fn soliton_profile(params: &SolitonParams, x: f64) -> f64 {
    let y = params.scaled_width() * x;
    params.peak() / y.cosh()
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("epsilon must be positive, got {eps}")))
    }
}

/// `∫_G |u_ε|^p = 3(e^{pε}+1) / (pε(e^{pε}-1))` on unit edges.
pub fn trial_lp_integral(eps: f64, p: f64) -> Result<f64> {
    check_eps(eps)?;
    if !(p >= 2.0 && p.is_finite()) {
        return Err(invalid(format!("p must be >= 2, got {p}")));
    }
    let x = p * eps;
    Ok(3.0 * coth(x / 2.0) / x)
}

/// `∫_G |u_ε'|² = 3ε(e^{2ε}+1) / (2(e^{2ε}-1))` on unit edges.
pub fn trial_kinetic_integral(eps: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok(1.5 * eps * coth(eps))
}

/// `k_ε` such that `k_ε u_ε` has mass `mu`.
pub fn trial_normalization(eps: f64, mu: f64) -> Result<f64> {
    check_eps(eps)?;
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(invalid(format!("mass must be positive, got {mu}")));
    }
    Ok((2.0 * eps * eps.tanh() * mu / 3.0).sqrt())
}

/// Kinetic and potential terms of `E(k_ε u_ε)`.
pub fn trial_energy_terms(eps: f64, p: f64, mu: f64) -> Result<(f64, f64)> {
    if !(p > 2.0 && p < 6.0) {
        return Err(invalid(format!("trial energy requires 2 < p < 6, got {p}")));
    }
    let k = trial_normalization(eps, mu)?;
    let kinetic = 0.5 * k * k * trial_kinetic_integral(eps)?;
    let potential = k.powf(p) * trial_lp_integral(eps, p)? / p;
    Ok((kinetic, potential))
}

pub fn trial_energy(eps: f64, p: f64, mu: f64) -> Result<f64> {
    let (kin, pot) = trial_energy_terms(eps, p, mu)?;
    Ok(kin - pot)
}

/// `μ_p = (p / (2C))^{2/(p-2)}` for an interpolation constant `C`.
pub fn critical_mass_from_constant(p: f64, c_interp: f64) -> Result<f64> {
    if !(4.0..=6.0).contains(&p) {
        return Err(invalid(format!("critical mass formula needs p in [4, 6], got {p}")));
    }
    if !(c_interp > 0.0 && c_interp.is_finite()) {
        return Err(invalid(format!("constant must be positive, got {c_interp}")));
    }
    Ok((p / (2.0 * c_interp)).powf(2.0 / (p - 2.0)))
}

/// The trial function `u_ε` sampled on a truncated lattice.
///
/// On `L_i` it is `exp(-ε(|x| + |i|))` in the path coordinate `x`; on the
/// bridge `b_j^k` it is `exp(-ε(x + |k| + j))` for `j >= 0` and
/// `exp(-ε(x + |k| + |j + 1|))` for `j < 0`, with the bridge coordinate
/// starting at the end fixed by the bridge convention. Coordinates are in
/// arclength, so on edges of length `l` the integer offsets scale by `l`.
pub fn trial_function(lat: &HoneycombLattice, eps: f64, samples_per_edge: usize) -> Result<GraphFunction> {
    check_eps(eps)?;
    let g = Arc::clone(&lat.graph);
    let l = lat.edge_length;
    let bridges = decompose_bridges(lat);
    let mut bridge_of = vec![None; g.num_edges()];
    for (&k, bs) in &bridges.lines {
        for b in bs {
            bridge_of[b.edge] = Some((k, *b));
        }
    }
    let coord: Vec<(i64, i64)> = (0..g.num_vertices()).map(|v| lat.l_coordinate(v)).collect();
    let vertex_fn = |v: usize| {
        let (i, x) = coord[v];
        (-eps * l * (x.abs() + i.abs()) as f64).exp()
    };
    let point_fn = |e: usize, s: f64| {
        let edge = g.edge(e);
        match edge.kind {
            EdgeKind::Horizontal | EdgeKind::Up => {
                let (i, x0) = coord[edge.tail];
                let x = l * x0 as f64 + s;
                (-eps * (x.abs() + l * i.abs() as f64)).exp()
            }
            _ => {
                let (k, b) = bridge_of[e].expect("every non-path edge is a bridge");
                let t = if b.zero_end == edge.tail { s } else { edge.length - s };
                let offset = if b.j >= 0 { b.j } else { (b.j + 1).abs() };
                (-eps * (t + l * (k.abs() + offset) as f64)).exp()
            }
        }
    };
    GraphFunction::from_fns(Arc::clone(&g), samples_per_edge, vertex_fn, point_fn)
}
