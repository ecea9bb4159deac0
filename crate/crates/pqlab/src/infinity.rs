//! Discrete infinity-harmonic machinery: the slope-midrange stencil
//! operator, punctured Dirichlet solves, and comparison cones.
//!
//! The stencil at a node takes the eight lattice neighbors that carry field
//! values (interior or boundary ring; neighbors outside both are omitted),
//! picks the steepest ascent and descent by difference quotient
//! `(u(y) - u(x)) / |y - x|`, and balances them:
//!
//! ```text
//! u'(x) = (a d_b + b d_a) / (d_a + d_b)
//! ```
//!
//! where `a, b` are the selected values and `d_a, d_b` their distances. The
//! update is exact on affine fields over full stencils and on cones along
//! their axis and diagonal rays; elsewhere it carries the usual second-order
//! consistency defect, which is why the fixed-point diagnostics normalize by
//! the field peak.

use crate::fields::ScalarField;
use crate::geometry::{Domain, Point};
use serde::Serialize;
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum InfHarmError {
    #[error("peak must be positive and finite, got {0}")]
    BadPeak(f64),
    #[error("puncture must sit deeper than 2h inside the domain (rho {rho:.4e}, need > {need:.4e})")]
    PunctureTooShallow { rho: f64, need: f64 },
    #[error("puncture point lies outside the domain interior")]
    PunctureOutside,
    #[error("sweeps did not converge within {sweeps} iterations (last change {last_change:.3e})")]
    NonConvergence { sweeps: usize, last_change: f64 },
}

/// Punctured problem: u = peak at the puncture node, u = 0 on the boundary
/// ring, infinity-harmonic in between.
#[derive(Clone, Debug)]
pub struct InfHarmonicProblem {
    pub domain: Arc<Domain>,
    pub puncture: u32,
    pub peak: f64,
}

impl InfHarmonicProblem {
    pub fn new(
        domain: &Arc<Domain>,
        puncture: Point,
        peak: f64,
    ) -> Result<InfHarmonicProblem, InfHarmError> {
        if !(peak > 0.0 && peak.is_finite()) {
            return Err(InfHarmError::BadPeak(peak));
        }
        let node = domain
            .nearest_interior_node(puncture)
            .ok_or(InfHarmError::PunctureOutside)?;
        let rho = domain.rho[node as usize];
        let need = 2.0 * domain.h;
        if rho <= need {
            return Err(InfHarmError::PunctureTooShallow { rho, need });
        }
        Ok(InfHarmonicProblem { domain: domain.clone(), puncture: node, peak })
    }
}

const SQRT2: f64 = std::f64::consts::SQRT_2;
const OFFSETS: [(isize, isize, f64); 8] = [
    (1, 0, 1.0),
    (-1, 0, 1.0),
    (0, 1, 1.0),
    (0, -1, 1.0),
    (1, 1, SQRT2),
    (1, -1, SQRT2),
    (-1, 1, SQRT2),
    (-1, -1, SQRT2),
];

/// One slope-midrange update at a node, from raw values. Distances enter
/// only as ratios, so the lattice spacing h cancels.
fn midrange_at(d: &Domain, values: &[f64], idx: usize) -> f64 {
    let (ix, iy) = d.ix_iy(idx);
    let ux = values[idx];
    let mut up = f64::NEG_INFINITY;
    let mut dn = f64::INFINITY;
    let mut a = ux;
    let mut da = 1.0;
    let mut b = ux;
    let mut db = 1.0;
    for &(dx, dy, dist) in &OFFSETS {
        let jx = ix as isize + dx;
        let jy = iy as isize + dy;
        if jx < 0 || jy < 0 || jx >= d.nx as isize || jy >= d.ny as isize {
            continue;
        }
        let j = d.idx(jx as usize, jy as usize);
        if !d.interior[j] && !d.boundary[j] {
            continue;
        }
        let slope = (values[j] - ux) / dist;
        if slope > up {
            up = slope;
            a = values[j];
            da = dist;
        }
        if slope < dn {
            dn = slope;
            b = values[j];
            db = dist;
        }
    }
    if up == f64::NEG_INFINITY {
        return ux; // no carrier neighbors at all
    }
    (a * db + b * da) / (da + db)
}

/// Applies the operator at one node of a field (values read as stored, so
/// boundary-ring entries participate with whatever the field carries there).
pub fn midrange(u: &ScalarField, idx: usize) -> f64 {
    midrange_at(u.domain(), u.values(), idx)
}

/// Worst normalized fixed-point defect `|u - midrange(u)| / max|u|` over
/// interior nodes not excluded. Returns 0 for the zero field.
pub fn infharm_defect(u: &ScalarField, exclude: impl Fn(usize) -> bool) -> f64 {
    let d = u.domain();
    let scale = u.max_abs();
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for &i in &d.interior_nodes {
        let i = i as usize;
        if exclude(i) {
            continue;
        }
        worst = worst.max((u.get(i) - midrange(u, i)).abs() / scale);
    }
    worst
}

/// The comparison cone `c (1 - |x - center| / beta)` with beta the largest
/// distance from the center to the boundary ring. Not clamped and not a
/// Dirichlet field: it is a comparison object, positive on parts of the
/// ring whenever the center is off the incenter.
pub fn cone_field(domain: &Arc<Domain>, center: Point, coefficient: f64) -> ScalarField {
    let beta = cone_beta(domain, center);
    ScalarField::from_fn(domain, false, |p| coefficient * (1.0 - p.dist(center) / beta))
}

/// Largest center-to-boundary-ring distance, the cone's base radius.
pub fn cone_beta(domain: &Domain, center: Point) -> f64 {
    let mut beta = 0.0f64;
    for idx in 0..domain.num_nodes() {
        if domain.boundary[idx] {
            beta = beta.max(domain.node_pos(idx).dist(center));
        }
    }
    beta
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct InfHarmConfig {
    pub max_sweeps: usize,
    /// Stop when the largest nodal change in one sweep drops below
    /// `tol_rel * peak`.
    pub tol_rel: f64,
}

impl Default for InfHarmConfig {
    fn default() -> InfHarmConfig {
        InfHarmConfig { max_sweeps: 200_000, tol_rel: 1e-10 }
    }
}

#[derive(Clone, Debug)]
pub struct InfHarmSolution {
    pub field: ScalarField,
    pub sweeps: usize,
    pub last_change: f64,
}

/// Jacobi iteration of the slope-midrange operator with the puncture pinned
/// at `peak`, zero boundary ring, cone initialization.
pub fn infharm_solve(
    problem: &InfHarmonicProblem,
    cfg: &InfHarmConfig,
) -> Result<InfHarmSolution, InfHarmError> {
    let d = &problem.domain;
    let center = d.node_pos(problem.puncture as usize);
    let cone = cone_field(d, center, problem.peak);
    // Dirichlet restriction of the cone: interior values only, ring at zero.
    let mut u = ScalarField::zeros(d, true);
    for &i in &d.interior_nodes {
        let i = i as usize;
        u.set_interior(i, cone.get(i).max(0.0));
    }
    u.set_interior(problem.puncture as usize, problem.peak);

    let mut next = u.clone();
    let mut last_change = f64::INFINITY;
    for sweep in 1..=cfg.max_sweeps {
        let mut change = 0.0f64;
        for &i in &d.interior_nodes {
            let i = i as usize;
            if i == problem.puncture as usize {
                continue;
            }
            let v = midrange(&u, i);
            change = change.max((v - u.get(i)).abs());
            next.set_interior(i, v);
        }
        std::mem::swap(&mut u, &mut next);
        last_change = change;
        if change <= cfg.tol_rel * problem.peak {
            return Ok(InfHarmSolution { field: u, sweeps: sweep, last_change });
        }
    }
    Err(InfHarmError::NonConvergence { sweeps: cfg.max_sweeps, last_change })
}
