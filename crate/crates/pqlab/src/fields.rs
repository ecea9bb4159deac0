//! Nodal scalar fields over a domain lattice, their piecewise-constant
//! gradients, and the quadratures used by every functional.
//!
//! Conventions:
//! * values live on the full lattice, are zero at nodes outside
//!   interior + boundary, and zero on the boundary when the field is
//!   Dirichlet;
//! * gradient integrals run over active triangles (area h^2/2 each) with
//!   one-point quadrature;
//! * L^r integrals use the lumped nodal rule with weights h^2/6 per
//!   incident active triangle;
//! * all reductions run in fixed row-major pairwise-tree order, so results
//!   are bit-identical across runs.

use crate::geometry::{Domain, Point};
use crate::math::{log_power_sum, pairwise_sum, powe, LogVal};
use serde::Serialize;
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum FieldError {
    #[error("value vector length {got} does not match lattice size {want}")]
    LengthMismatch { got: usize, want: usize },
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
    #[error("operation requires a nonzero field")]
    ZeroField,
    #[error("fields live on different domains")]
    DomainMismatch,
}

/// A scalar field sampled at lattice nodes.
#[derive(Clone, Debug)]
pub struct ScalarField {
    domain: Arc<Domain>,
    values: Vec<f64>,
    dirichlet: bool,
}

impl ScalarField {
    pub fn zeros(domain: &Arc<Domain>, dirichlet: bool) -> ScalarField {
        ScalarField { domain: domain.clone(), values: vec![0.0; domain.num_nodes()], dirichlet }
    }

    /// Samples `f` at node positions; nodes outside the domain masks (and
    /// boundary nodes of Dirichlet fields) are forced to zero.
    pub fn from_fn(
        domain: &Arc<Domain>,
        dirichlet: bool,
        mut f: impl FnMut(Point) -> f64,
    ) -> ScalarField {
        let mut u = ScalarField::zeros(domain, dirichlet);
        for idx in 0..domain.num_nodes() {
            if domain.interior[idx] || (!dirichlet && domain.boundary[idx]) {
                u.values[idx] = f(domain.node_pos(idx));
            }
        }
        u
    }

    pub fn from_values(
        domain: &Arc<Domain>,
        dirichlet: bool,
        values: Vec<f64>,
    ) -> Result<ScalarField, FieldError> {
        if values.len() != domain.num_nodes() {
            return Err(FieldError::LengthMismatch { got: values.len(), want: domain.num_nodes() });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite(bad));
        }
        let mut u = ScalarField { domain: domain.clone(), values, dirichlet };
        u.enforce_masks();
        Ok(u)
    }

    /// The distance field as a Dirichlet field.
    pub fn rho(domain: &Arc<Domain>) -> ScalarField {
        ScalarField { domain: domain.clone(), values: domain.rho.clone(), dirichlet: true }
    }

    fn enforce_masks(&mut self) {
        for idx in 0..self.domain.num_nodes() {
            if !self.domain.interior[idx] && (self.dirichlet || !self.domain.boundary[idx]) {
                self.values[idx] = 0.0;
            }
        }
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_dirichlet(&self) -> bool {
        self.dirichlet
    }

    #[inline]
    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// Sets an interior node value; other nodes are mask-protected.
    pub fn set_interior(&mut self, idx: usize, v: f64) {
        debug_assert!(self.domain.interior[idx]);
        self.values[idx] = v;
    }

    pub fn scale_in_place(&mut self, t: f64) {
        for v in &mut self.values {
            *v *= t;
        }
    }

    pub fn scaled(&self, t: f64) -> ScalarField {
        let mut u = self.clone();
        u.scale_in_place(t);
        u
    }

    pub fn abs_in_place(&mut self) {
        for v in &mut self.values {
            *v = v.abs();
        }
    }

    /// `self - s * dir` over interior nodes.
    pub fn descend(&self, dir: &ScalarField, s: f64) -> ScalarField {
        debug_assert!(Arc::ptr_eq(&self.domain, &dir.domain));
        let mut out = self.clone();
        for &i in &self.domain.interior_nodes {
            let i = i as usize;
            out.values[i] = self.values[i] - s * dir.values[i];
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Plain nodal dot product over the lattice (deterministic order).
    pub fn dot(&self, other: &ScalarField) -> f64 {
        debug_assert!(Arc::ptr_eq(&self.domain, &other.domain));
        let terms: Vec<f64> = self
            .domain
            .interior_nodes
            .iter()
            .map(|&i| self.values[i as usize] * other.values[i as usize])
            .collect();
        pairwise_sum(&terms)
    }
}

/// Constant per-triangle gradients of a field.
pub struct CellGradients {
    domain: Arc<Domain>,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

impl CellGradients {
    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    #[inline]
    pub fn magnitude(&self, k: usize) -> f64 {
        (self.gx[k] * self.gx[k] + self.gy[k] * self.gy[k]).sqrt()
    }

    /// Largest gradient magnitude over active triangles.
    pub fn max_magnitude(&self) -> f64 {
        let mut m = 0.0f64;
        for k in 0..self.gx.len() {
            let g2 = self.gx[k] * self.gx[k] + self.gy[k] * self.gy[k];
            if g2 > m {
                m = g2;
            }
        }
        m.sqrt()
    }
}

/// One-point-per-triangle gradients of the P1 interpolant.
pub fn gradients(u: &ScalarField) -> CellGradients {
    let domain = u.domain().clone();
    let inv_h = 1.0 / domain.h;
    let n = domain.triangles.len();
    let mut gx = vec![0.0f64; n];
    let mut gy = vec![0.0f64; n];
    for (k, tri) in domain.triangles.iter().enumerate() {
        let (cx, cy) = tri.grad_coeffs();
        let mut sx = 0.0;
        let mut sy = 0.0;
        for j in 0..3 {
            let v = u.values[tri.nodes[j] as usize];
            sx += cx[j] * v;
            sy += cy[j] * v;
        }
        gx[k] = sx * inv_h;
        gy[k] = sy * inv_h;
    }
    CellGradients { domain, gx, gy }
}

/// A norm with its exact logarithm from the stabilized evaluation.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Norm {
    pub value: f64,
    pub ln: f64,
}

impl Norm {
    fn from_log(v: LogVal) -> Norm {
        Norm { value: v.value(), ln: v.ln }
    }
}

/// `integral |grad u|^m` over active triangles, stabilized.
pub fn grad_power_sum(g: &CellGradients, m: f64, scratch: &mut Vec<f64>) -> LogVal {
    let area = g.domain.h * g.domain.h / 2.0;
    let gx = &g.gx;
    let gy = &g.gy;
    log_power_sum(
        (0..gx.len()).map(|k| (area, (gx[k] * gx[k] + gy[k] * gy[k]).sqrt())),
        m,
        scratch,
    )
}

/// `|| grad u ||_m` with its logarithm.
pub fn grad_norm(u: &ScalarField, m: f64) -> Norm {
    let g = gradients(u);
    let mut scratch = Vec::new();
    Norm::from_log(grad_power_sum(&g, m, &mut scratch).powf(1.0 / m))
}

/// `sum_i w_i |u_i|^r` with the lumped nodal weights, stabilized.
pub fn lp_power_sum(u: &ScalarField, r: f64, scratch: &mut Vec<f64>) -> LogVal {
    let d = u.domain();
    let w = &d.node_weight;
    let vals = &u.values;
    log_power_sum(
        (0..vals.len()).filter(|&i| w[i] > 0.0).map(|i| (w[i], vals[i].abs())),
        r,
        scratch,
    )
}

/// `|| u ||_r` with its logarithm.
pub fn lp_norm(u: &ScalarField, r: f64) -> Norm {
    let mut scratch = Vec::new();
    Norm::from_log(lp_power_sum(u, r, &mut scratch).powf(1.0 / r))
}

/// The set of nodes attaining `max |u|` within relative tolerance 1e-12.
#[derive(Clone, Debug)]
pub struct MaxSet {
    pub max_value: f64,
    /// Ascending node indices; empty only for the zero field.
    pub nodes: Vec<u32>,
    pub primary: Option<u32>,
    pub diameter: f64,
}

impl MaxSet {
    pub fn spread_exceeds(&self, h: f64) -> bool {
        self.diameter > 2.0 * h
    }

    pub fn summary(&self, domain: &Domain) -> MaxSetSummary {
        let primary_pos = self.primary.map(|i| {
            let p = domain.node_pos(i as usize);
            (p.x, p.y)
        });
        MaxSetSummary {
            max_value: self.max_value,
            count: self.nodes.len(),
            primary: self.primary,
            primary_pos,
            diameter: self.diameter,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MaxSetSummary {
    pub max_value: f64,
    pub count: usize,
    pub primary: Option<u32>,
    pub primary_pos: Option<(f64, f64)>,
    pub diameter: f64,
}

/// Max of |u| with its attaining set (relative tolerance 1e-12).
pub fn sup_norm(u: &ScalarField) -> MaxSet {
    let d = u.domain();
    let mut max = 0.0f64;
    for idx in 0..d.num_nodes() {
        if d.in_domain(idx) {
            max = max.max(u.values[idx].abs());
        }
    }
    if max == 0.0 {
        return MaxSet { max_value: 0.0, nodes: Vec::new(), primary: None, diameter: 0.0 };
    }
    let cut = max * (1.0 - 1e-12);
    let mut nodes = Vec::new();
    for idx in 0..d.num_nodes() {
        if d.in_domain(idx) && u.values[idx].abs() >= cut {
            nodes.push(idx as u32);
        }
    }
    let primary = nodes[0];
    let mut diameter = 0.0f64;
    // The tie set is tiny in practice; cap the pairwise scan defensively.
    let scan = nodes.len().min(512);
    for a in 0..scan {
        let pa = d.node_pos(nodes[a] as usize);
        for b in (a + 1)..scan {
            diameter = diameter.max(pa.dist(d.node_pos(nodes[b] as usize)));
        }
    }
    if nodes.len() > scan {
        diameter = f64::INFINITY;
    }
    MaxSet { max_value: max, nodes, primary: Some(primary), diameter }
}

/// Right-hand derivative of `||.||_inf^p` at `u` in direction `v`:
/// `p * max { |u(x)|^(p-2) u(x) v(x) : x in MaxSet(u) }`.
pub fn sup_gateaux(u: &ScalarField, v: &ScalarField, p: f64) -> Result<f64, FieldError> {
    if !Arc::ptr_eq(u.domain(), v.domain()) {
        return Err(FieldError::DomainMismatch);
    }
    let maxset = sup_norm(u);
    if maxset.primary.is_none() {
        return Err(FieldError::ZeroField);
    }
    let mut best = f64::NEG_INFINITY;
    for &i in &maxset.nodes {
        let ui = u.values[i as usize];
        let term = powe(ui.abs(), p - 2.0) * ui * v.values[i as usize];
        best = best.max(term);
    }
    Ok(p * best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, Shape};

    fn unit_square(h: f64) -> Arc<Domain> {
        build_domain(
            Shape::Rectangle { min: Point::new(0.0, 0.0), max: Point::new(1.0, 1.0) },
            h,
        )
        .unwrap()
    }

    fn unit_disk(h: f64) -> Arc<Domain> {
        build_domain(Shape::Disk { center: Point::new(0.0, 0.0), radius: 1.0 }, h).unwrap()
    }

    #[test]
    fn linear_fields_reproduce_exact_gradients() {
        let d = unit_square(1.0 / 8.0);
        let u = ScalarField::from_fn(&d, false, |p| 0.7 + 2.0 * p.x - 3.0 * p.y);
        let g = gradients(&u);
        for k in 0..d.triangles.len() {
            let tri = &d.triangles[k];
            if tri.nodes.iter().all(|&n| d.in_domain(n as usize)) {
                assert!((g.gx[k] - 2.0).abs() < 1e-12, "gx {} at {k}", g.gx[k]);
                assert!((g.gy[k] + 3.0).abs() < 1e-12, "gy {} at {k}", g.gy[k]);
            }
        }
    }

    #[test]
    fn dirichlet_constant_is_flat_away_from_boundary() {
        let d = unit_square(1.0 / 8.0);
        let u = ScalarField::from_fn(&d, true, |_| 1.0);
        let g = gradients(&u);
        for (k, tri) in d.triangles.iter().enumerate() {
            let touches_boundary = tri.nodes.iter().any(|&n| d.boundary[n as usize]);
            if !touches_boundary {
                assert_eq!(g.magnitude(k), 0.0);
            }
        }
    }

    #[test]
    fn unit_constant_has_unit_lp_norm_on_square() {
        // Non-Dirichlet extension of 1: the lumped rule integrates it to
        // exactly the quadrature mass, so the norm is quad_area^{1/p}.
        let d = unit_square(1.0 / 16.0);
        let u = ScalarField::from_fn(&d, false, |_| 1.0);
        let n = lp_norm(&u, 3.0);
        let expect = d.quad_area.powf(1.0 / 3.0);
        assert!((n.value - expect).abs() < 1e-12, "{} vs {}", n.value, expect);
    }

    #[test]
    fn distance_field_gradient_is_near_unit() {
        let d = unit_square(1.0 / 32.0);
        let rho = ScalarField::rho(&d);
        let n = grad_norm(&rho, 2.0);
        assert!((n.value - 1.0).abs() < 0.08, "{}", n.value);
    }

    #[test]
    fn norms_scale_exactly_across_twelve_decades() {
        let d = unit_disk(1.0 / 16.0);
        let u = ScalarField::from_fn(&d, true, |p| (1.0 - p.x * p.x - p.y * p.y).max(0.0));
        for m in [2.0, 7.5, 64.0, 128.0] {
            let base_g = grad_norm(&u, m);
            let base_l = lp_norm(&u, m);
            for t in [1e-6, 0.37, 1.0, 4096.0, 1e6] {
                let ut = u.scaled(t);
                let ng = grad_norm(&ut, m);
                let nl = lp_norm(&ut, m);
                assert!(
                    (ng.value / (t * base_g.value) - 1.0).abs() < 1e-12,
                    "grad m={m} t={t}: {} vs {}",
                    ng.value,
                    t * base_g.value
                );
                assert!(
                    (nl.value / (t * base_l.value) - 1.0).abs() < 1e-12,
                    "lp m={m} t={t}"
                );
            }
        }
    }

    #[test]
    fn holder_bound_against_sup_norm() {
        let d = unit_disk(1.0 / 16.0);
        let u = ScalarField::from_fn(&d, true, |p| (0.3 + p.x - 0.2 * p.y).sin());
        let sup = sup_norm(&u).max_value;
        for r in [1.0, 2.0, 8.0, 64.0] {
            let n = lp_norm(&u, r).value;
            let cap = sup * d.quad_area.powf(1.0 / r);
            assert!(n <= cap * (1.0 + 1e-12), "r={r}: {n} vs {cap}");
        }
    }

    #[test]
    fn disk_distance_field_high_power_norm() {
        // Continuum value of ||rho||_256 on the unit disk:
        // (2*pi/(257*258))^(1/256) = 0.964456. The lumped grid value sits
        // within O(h) of it; both are ~3.6% below the sup norm, not 3%.
        let d = unit_disk(1.0 / 64.0);
        let rho = ScalarField::rho(&d);
        let n = lp_norm(&rho, 256.0);
        assert!((n.value - 0.964456).abs() < 0.012, "{}", n.value);
        assert!((n.value - 1.0).abs() < 0.04, "{}", n.value);
    }

    #[test]
    fn maxset_tracks_ties_and_primary() {
        let d = unit_square(1.0 / 8.0);
        let mut u = ScalarField::zeros(&d, true);
        let a = d.idx(3, 3);
        let b = d.idx(5, 6);
        u.set_interior(a, 2.0);
        u.set_interior(b, -2.0);
        let m = sup_norm(&u);
        assert_eq!(m.max_value, 2.0);
        assert_eq!(m.nodes, vec![a as u32, b as u32]);
        assert_eq!(m.primary, Some(a.min(b) as u32));
        assert!(m.spread_exceeds(d.h));

        let z = ScalarField::zeros(&d, true);
        let mz = sup_norm(&z);
        assert!(mz.nodes.is_empty() && mz.primary.is_none());
    }

    #[test]
    fn sup_gateaux_worked_example() {
        // Unique maximizer u(k)=2, direction v(k)=5, p=3:
        // 3 * (|2|^(3-2) * 2) * 5 = 60. With v = u: 3 * |2|^3 = 24.
        let d = unit_square(1.0 / 8.0);
        let mut u = ScalarField::zeros(&d, true);
        let k = d.idx(4, 4);
        u.set_interior(k, 2.0);
        let mut v = ScalarField::zeros(&d, true);
        v.set_interior(k, 5.0);
        assert!((sup_gateaux(&u, &v, 3.0).unwrap() - 60.0).abs() < 1e-12);
        assert!((sup_gateaux(&u, &u, 3.0).unwrap() - 24.0).abs() < 1e-12);
        let z = ScalarField::zeros(&d, true);
        assert!(matches!(sup_gateaux(&z, &v, 3.0), Err(FieldError::ZeroField)));
    }

    #[test]
    fn sup_gateaux_matches_one_sided_difference() {
        let d = unit_disk(1.0 / 16.0);
        let u = ScalarField::from_fn(&d, true, |p| {
            (1.0 - p.x * p.x - p.y * p.y).max(0.0) * (1.0 + 0.1 * p.x)
        });
        let v = ScalarField::from_fn(&d, true, |p| (2.0 * p.x + 0.5 * p.y).cos());
        for p in [2.5, 3.0, 6.0] {
            let analytic = sup_gateaux(&u, &v, p).unwrap();
            let eps = 1e-6;
            let up = ScalarField::from_values(
                &d,
                true,
                u.values().iter().zip(v.values()).map(|(a, b)| a + eps * b).collect(),
            )
            .unwrap();
            let f1 = sup_norm(&up).max_value.powf(p);
            let f0 = sup_norm(&u).max_value.powf(p);
            let fd = (f1 - f0) / eps;
            assert!(
                (fd - analytic).abs() <= 1e-4 * analytic.abs().max(1.0),
                "p={p}: fd {fd} vs {analytic}"
            );
        }
    }

    #[test]
    fn repeated_reductions_are_bit_identical() {
        let d = unit_disk(1.0 / 16.0);
        let u = ScalarField::from_fn(&d, true, |p| (13.0 * p.x).sin() + (7.0 * p.y).cos());
        let a = grad_norm(&u, 17.0);
        let b = grad_norm(&u, 17.0);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        let c = lp_norm(&u, 9.0);
        let e = lp_norm(&u, 9.0);
        assert_eq!(c.value.to_bits(), e.value.to_bits());
    }

    #[test]
    fn from_values_validates_and_sanitizes() {
        let d = unit_square(1.0 / 8.0);
        let n = d.num_nodes();
        assert!(matches!(
            ScalarField::from_values(&d, true, vec![0.0; n - 1]),
            Err(FieldError::LengthMismatch { .. })
        ));
        let mut vals = vec![1.0; n];
        vals[0] = f64::NAN;
        assert!(matches!(
            ScalarField::from_values(&d, true, vals),
            Err(FieldError::NonFinite(0))
        ));
        let u = ScalarField::from_values(&d, true, vec![1.0; n]).unwrap();
        // Outside and boundary nodes were zeroed.
        for idx in 0..n {
            if !d.interior[idx] {
                assert_eq!(u.get(idx), 0.0);
            }
        }
    }
}
