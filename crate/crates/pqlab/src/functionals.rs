//! Problem parameters, the two-exponent energy, its nodal gradient, and the
//! Nehari / weak-form residual diagnostics.
//!
//! For exponents p, q > 2 (p != q), load exponent r and weight lambda, the
//! energy of a Dirichlet field u is
//!
//! ```text
//! E(u) = (1/p) |grad u|_p^p + (1/q) |grad u|_q^q - (lambda/p) |u|_r^p
//! ```
//!
//! with `|u|_r` replaced by the sup norm in SUP mode. Stationarity couples
//! the divergence form `(|grad u|^(p-2) + |grad u|^(q-2)) grad u` against
//! either the L^r load `lambda |u|_r^(p-r) |u|^(r-2) u` or, in SUP mode, a
//! point load of weight `lambda |u(x*)|^(p-2) u(x*)` at the maximizer x*.

use crate::fields::{
    gradients, lp_power_sum, sup_norm, CellGradients, FieldError, ScalarField,
};
use crate::math::{pairwise_sum, powe, LogVal};
use serde::Serialize;

/// Load exponent: a finite r in [1, inf) or the sup norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum LoadExponent {
    Finite(f64),
    Sup,
}

impl LoadExponent {
    pub fn is_sup(self) -> bool {
        matches!(self, LoadExponent::Sup)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            LoadExponent::Finite(r) => Some(r),
            LoadExponent::Sup => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// p < q: the energy is bounded below; least-energy states are global
    /// minimizers with negative energy.
    PBelowQ,
    /// q < p: least-energy states minimize over the Nehari set.
    QBelowP,
}

#[derive(Debug, thiserror::Error)]
pub enum ParamError {
    #[error("gradient exponents must satisfy p > 2 and q > 2, got p={p}, q={q}")]
    ExponentOutOfRange { p: f64, q: f64 },
    #[error("p and q must differ")]
    EqualExponents,
    #[error("load exponent r must lie in [1, inf), got {0}")]
    BadLoadExponent(f64),
    #[error("lambda must be positive and finite, got {0}")]
    BadLambda(f64),
    #[error("operation requires a finite load exponent r >= 2, got {0:?}")]
    NeedsSmoothLoad(LoadExponent),
}

/// Validated problem data for one Dirichlet problem.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProblemParams {
    pub p: f64,
    pub q: f64,
    pub r: LoadExponent,
    pub lambda: f64,
}

impl ProblemParams {
    pub fn new(p: f64, q: f64, r: LoadExponent, lambda: f64) -> Result<ProblemParams, ParamError> {
        if !(p > 2.0 && q > 2.0 && p.is_finite() && q.is_finite()) {
            return Err(ParamError::ExponentOutOfRange { p, q });
        }
        if p == q {
            return Err(ParamError::EqualExponents);
        }
        if let LoadExponent::Finite(r) = r {
            if !(r >= 1.0 && r.is_finite()) {
                return Err(ParamError::BadLoadExponent(r));
            }
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(ParamError::BadLambda(lambda));
        }
        Ok(ProblemParams { p, q, r, lambda })
    }

    pub fn regime(self) -> Regime {
        if self.p < self.q {
            Regime::PBelowQ
        } else {
            Regime::QBelowP
        }
    }

    /// The natural-space exponent max(p, q).
    pub fn xexp(self) -> f64 {
        self.p.max(self.q)
    }

    pub fn with_load(self, r: LoadExponent) -> ProblemParams {
        ProblemParams { r, ..self }
    }
}

/// The three homogeneous ingredients of the energy and the Nehari relation,
/// kept in log form: `a = |grad u|_p^p`, `b = |grad u|_q^q`,
/// `c = lambda * |u|_r^p` (sup norm in SUP mode).
#[derive(Clone, Copy, Debug)]
pub struct NehariParts {
    pub a_pow: LogVal,
    pub b_pow: LogVal,
    pub c_load: LogVal,
}

/// Computes the parts from existing gradients (one pass over triangles per
/// exponent, one over nodes).
pub fn nehari_parts_with(g: &CellGradients, u: &ScalarField, params: &ProblemParams) -> NehariParts {
    let mut scratch = Vec::new();
    let a_pow = crate::fields::grad_power_sum(g, params.p, &mut scratch);
    let b_pow = crate::fields::grad_power_sum(g, params.q, &mut scratch);
    let load_ln = match params.r {
        LoadExponent::Finite(r) => lp_power_sum(u, r, &mut scratch).ln * (params.p / r),
        LoadExponent::Sup => sup_norm(u).max_value.ln() * params.p,
    };
    let c_load = LogVal { ln: load_ln + params.lambda.ln() };
    NehariParts { a_pow, b_pow, c_load }
}

pub fn nehari_parts(u: &ScalarField, params: &ProblemParams) -> NehariParts {
    nehari_parts_with(&gradients(u), u, params)
}

/// Energy split into its three terms, with log copies for scale tracking.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnergyBreakdown {
    pub term_p: f64,
    pub term_q: f64,
    pub term_load: f64,
    pub total: f64,
    pub ln_term_p: f64,
    pub ln_term_q: f64,
    pub ln_term_load: f64,
}

impl EnergyBreakdown {
    pub fn from_parts(parts: &NehariParts, params: &ProblemParams) -> EnergyBreakdown {
        let ln_term_p = parts.a_pow.ln - params.p.ln();
        let ln_term_q = parts.b_pow.ln - params.q.ln();
        let ln_term_load = parts.c_load.ln - params.p.ln();
        let term_p = ln_term_p.exp();
        let term_q = ln_term_q.exp();
        let term_load = ln_term_load.exp();
        EnergyBreakdown {
            term_p,
            term_q,
            term_load,
            total: term_p + term_q - term_load,
            ln_term_p,
            ln_term_q,
            ln_term_load,
        }
    }
}

/// `E(u)` for the given parameters.
pub fn energy(u: &ScalarField, params: &ProblemParams) -> EnergyBreakdown {
    EnergyBreakdown::from_parts(&nehari_parts(u, params), params)
}

/// Relative distance of u from the Nehari relation
/// `|grad u|_p^p + |grad u|_q^q = lambda |u|_r^p`, from log-space parts.
pub fn nehari_residual_from_parts(parts: &NehariParts) -> f64 {
    ((parts.a_pow.ln - parts.c_load.ln).exp() + (parts.b_pow.ln - parts.c_load.ln).exp() - 1.0)
        .abs()
}

pub fn nehari_residual(u: &ScalarField, params: &ProblemParams) -> Result<f64, FieldError> {
    let parts = nehari_parts(u, params);
    if parts.c_load.is_zero() {
        return Err(FieldError::ZeroField);
    }
    Ok(nehari_residual_from_parts(&parts))
}

/// Shared scatter loop for divergence-form nodal vectors:
/// `D_k = sum_T area c(|g|) g . dg/du_k`, zero on boundary rows.
fn assemble_with(u: &ScalarField, coef_of_mag: impl Fn(f64) -> f64) -> ScalarField {
    let d = u.domain();
    let g = gradients(u);
    let mut out = ScalarField::zeros(d, true);
    let area = d.h * d.h / 2.0;
    let inv_h = 1.0 / d.h;
    let mut acc = vec![0.0f64; d.num_nodes()];
    for (k, tri) in d.triangles.iter().enumerate() {
        let gx = g.gx[k];
        let gy = g.gy[k];
        let mag = (gx * gx + gy * gy).sqrt();
        if mag == 0.0 {
            continue;
        }
        let coef = area * coef_of_mag(mag);
        let (cx, cy) = tri.grad_coeffs();
        for j in 0..3 {
            acc[tri.nodes[j] as usize] += coef * (gx * cx[j] + gy * cy[j]) * inv_h;
        }
    }
    for &i in &d.interior_nodes {
        out.set_interior(i as usize, acc[i as usize]);
    }
    out
}

/// Divergence part of the nodal energy gradient, both exponents combined.
pub fn assemble_divergence(u: &ScalarField, params: &ProblemParams) -> ScalarField {
    let pm2 = params.p - 2.0;
    let qm2 = params.q - 2.0;
    assemble_with(u, |mag| powe(mag, pm2) + powe(mag, qm2))
}

/// Single-exponent divergence `sum_T area |g|^(m-2) g . dg/du_k`, the
/// derivative of `|grad u|_m^m / m`.
pub(crate) fn assemble_m_divergence(u: &ScalarField, m: f64) -> ScalarField {
    let mm2 = m - 2.0;
    assemble_with(u, |mag| powe(mag, mm2))
}

/// Emits `exp(ln_factor) w_i |u_i|^(r-2) u_i` for interior nodes with
/// `u_i != 0`. Falls back to per-node log arithmetic whenever the factored
/// form could overflow, which happens for large r once `|u|_r` strays from
/// one (the factor is then an extreme power of it).
pub(crate) fn scatter_load(
    u: &ScalarField,
    r: f64,
    ln_factor: f64,
    mut emit: impl FnMut(usize, f64),
) {
    let d = u.domain();
    let values = u.values();
    let rm2 = r - 2.0;
    let factor = ln_factor.exp();
    let u_max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if u_max == 0.0 {
        return;
    }
    let fast = factor.is_finite()
        && factor > 0.0
        && (ln_factor + (r - 1.0) * u_max.ln()) < 600.0;
    for &i in &d.interior_nodes {
        let i = i as usize;
        let ui = values[i];
        if ui == 0.0 {
            continue;
        }
        let v = if fast {
            factor * d.node_weight[i] * powe(ui.abs(), rm2) * ui
        } else {
            let ln_mag = ln_factor + d.node_weight[i].ln() + (r - 1.0) * ui.abs().ln();
            ln_mag.exp().copysign(ui)
        };
        emit(i, v);
    }
}

/// Nodal gradient of the full energy (finite load exponent r >= 2 only).
pub fn grad_energy(u: &ScalarField, params: &ProblemParams) -> Result<ScalarField, ParamError> {
    let r = match params.r {
        LoadExponent::Finite(r) if r >= 2.0 => r,
        other => return Err(ParamError::NeedsSmoothLoad(other)),
    };
    let mut out = assemble_divergence(u, params);
    let mut scratch = Vec::new();
    let s_pow = lp_power_sum(u, r, &mut scratch);
    if s_pow.is_zero() {
        return Ok(out); // zero field: load gradient vanishes (r >= 2)
    }
    // lambda * |u|_r^(p-r), kept in log form until the per-node scatter.
    let ln_factor = params.lambda.ln() + s_pow.ln * ((params.p - r) / r);
    scatter_load(u, r, ln_factor, |i, load| {
        let cur = out.get(i);
        out.set_interior(i, cur - load);
    });
    Ok(out)
}

/// Worst normalized defect of the weak form over a set of test fields.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct WeakResidual {
    pub max_rel: f64,
    /// True when the maximizer set is spread wider than 2h (SUP mode), so
    /// the point-load location is ambiguous.
    pub flagged: bool,
}

/// Evaluates `<E'(u), v>` routes independently of `grad_energy`: the
/// divergence side by per-triangle quadrature of `(...) grad u . grad v`,
/// the load side from the L^r sum or the point mass at the maximizer.
/// Residuals are normalized by `lambda |u|_inf^(p-1) |v|_inf`.
pub fn weak_residual(
    u: &ScalarField,
    params: &ProblemParams,
    tests: &[ScalarField],
) -> Result<WeakResidual, FieldError> {
    let d = u.domain();
    let maxset = sup_norm(u);
    let Some(primary) = maxset.primary else {
        return Err(FieldError::ZeroField);
    };
    let g_u = gradients(u);
    let area = d.h * d.h / 2.0;
    let pm2 = params.p - 2.0;
    let qm2 = params.q - 2.0;
    // Per-triangle divergence coefficients, reused across test fields.
    let coef: Vec<f64> = (0..d.triangles.len())
        .map(|k| {
            let mag = g_u.magnitude(k);
            if mag == 0.0 {
                0.0
            } else {
                area * (powe(mag, pm2) + powe(mag, qm2))
            }
        })
        .collect();

    let u_inf = maxset.max_value;
    let mut scratch = Vec::new();
    let ln_load_factor = params.r.finite().map(|r| {
        let s_pow = lp_power_sum(u, r, &mut scratch);
        params.lambda.ln() + s_pow.ln * ((params.p - r) / r)
    });

    let mut max_rel = 0.0f64;
    let mut terms = Vec::new();
    for v in tests {
        if !std::sync::Arc::ptr_eq(v.domain(), d) {
            return Err(FieldError::DomainMismatch);
        }
        let v_inf = sup_norm(v).max_value;
        if v_inf == 0.0 {
            continue;
        }
        let g_v = gradients(v);
        terms.clear();
        for k in 0..coef.len() {
            terms.push(coef[k] * (g_u.gx[k] * g_v.gx[k] + g_u.gy[k] * g_v.gy[k]));
        }
        let lhs = pairwise_sum(&terms);
        let rhs = match params.r {
            LoadExponent::Finite(r) => {
                terms.clear();
                scatter_load(u, r, ln_load_factor.unwrap(), |i, lv| {
                    terms.push(lv * v.get(i));
                });
                pairwise_sum(&terms)
            }
            LoadExponent::Sup => {
                let ux = u.get(primary as usize);
                params.lambda * powe(ux.abs(), pm2) * ux * v.get(primary as usize)
            }
        };
        let scale = params.lambda * powe(u_inf, params.p - 1.0) * v_inf;
        max_rel = max_rel.max((lhs - rhs).abs() / scale);
    }
    Ok(WeakResidual { max_rel, flagged: params.r.is_sup() && maxset.spread_exceeds(d.h) })
}

/// Standard weak-form test set: `n_hats` hat functions at quasi-uniformly
/// strided interior nodes (golden-ratio stride, deterministic), plus the
/// candidate itself and the distance field.
pub fn standard_test_set(u: &ScalarField, n_hats: usize) -> Vec<ScalarField> {
    let d = u.domain();
    let n = d.interior_nodes.len();
    let phi = 0.618_033_988_749_894_9_f64;
    let mut picked = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut j = 1usize;
    while picked.len() < n_hats.min(n) && j < 8 * n_hats + 64 {
        let frac = (j as f64 * phi).fract();
        let k = ((frac * n as f64) as usize).min(n - 1);
        if seen.insert(k) {
            picked.push(d.interior_nodes[k]);
        }
        j += 1;
    }
    let mut tests = Vec::with_capacity(picked.len() + 2);
    for node in picked {
        let mut hat = ScalarField::zeros(d, true);
        hat.set_interior(node as usize, 1.0);
        tests.push(hat);
    }
    tests.push(u.clone());
    tests.push(ScalarField::rho(d));
    tests
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, Point, Shape};
    use std::sync::Arc;

    fn disk(h: f64) -> Arc<crate::geometry::Domain> {
        build_domain(Shape::Disk { center: Point::new(0.0, 0.0), radius: 1.0 }, h).unwrap()
    }

    fn bump(d: &Arc<crate::geometry::Domain>) -> ScalarField {
        ScalarField::from_fn(d, true, |p| (1.0 - p.x * p.x - p.y * p.y).max(0.0) * (1.1 + 0.3 * p.x))
    }

    #[test]
    fn params_are_validated() {
        assert!(ProblemParams::new(2.0, 3.0, LoadExponent::Finite(2.0), 1.0).is_err());
        assert!(ProblemParams::new(3.0, 3.0, LoadExponent::Finite(2.0), 1.0).is_err());
        assert!(ProblemParams::new(3.0, 4.0, LoadExponent::Finite(0.5), 1.0).is_err());
        assert!(ProblemParams::new(3.0, 4.0, LoadExponent::Finite(2.0), -1.0).is_err());
        let p = ProblemParams::new(4.0, 3.0, LoadExponent::Sup, 2.0).unwrap();
        assert_eq!(p.regime(), Regime::QBelowP);
        assert_eq!(p.xexp(), 4.0);
        let p = ProblemParams::new(3.0, 4.0, LoadExponent::Finite(2.0), 2.0).unwrap();
        assert_eq!(p.regime(), Regime::PBelowQ);
    }

    #[test]
    fn residual_combiner_arithmetic() {
        // a=2, b=3, c=5 is on the relation; a=2, b=3, c=10 misses by half.
        let parts = NehariParts {
            a_pow: LogVal::from_value(2.0),
            b_pow: LogVal::from_value(3.0),
            c_load: LogVal::from_value(5.0),
        };
        assert!(nehari_residual_from_parts(&parts) < 1e-14);
        let parts = NehariParts {
            a_pow: LogVal::from_value(2.0),
            b_pow: LogVal::from_value(3.0),
            c_load: LogVal::from_value(10.0),
        };
        assert!((nehari_residual_from_parts(&parts) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn energy_matches_norm_arithmetic() {
        let d = disk(1.0 / 12.0);
        let u = bump(&d);
        let params = ProblemParams::new(4.0, 3.0, LoadExponent::Finite(2.5), 1.7).unwrap();
        let e = energy(&u, &params);
        let a = crate::fields::grad_norm(&u, 4.0).value.powi(4);
        let b = crate::fields::grad_norm(&u, 3.0).value.powi(3);
        let c = crate::fields::lp_norm(&u, 2.5).value.powi(4) * 1.7;
        let want = a / 4.0 + b / 3.0 - c / 4.0;
        assert!((e.total - want).abs() < 1e-12 * want.abs().max(1.0), "{} vs {want}", e.total);
        assert!((e.term_p - a / 4.0).abs() < 1e-12 * a.max(1.0));
        // Log copies agree with the linear ones.
        assert!((e.ln_term_p.exp() - e.term_p).abs() < 1e-12 * e.term_p);
    }

    #[test]
    fn ray_scaling_identity() {
        // For any u, t > 0:
        // |grad(tu)|_p^p + |grad(tu)|_q^q - lambda|tu|_r^p
        //   = t^q [ |grad u|_q^q - t^(p-q) (lambda|u|_r^p - |grad u|_p^p) ].
        let d = disk(1.0 / 12.0);
        let u = bump(&d);
        let params = ProblemParams::new(4.5, 3.0, LoadExponent::Finite(3.0), 2.3).unwrap();
        let base = nehari_parts(&u, &params);
        let (a, b, c) = (base.a_pow.value(), base.b_pow.value(), base.c_load.value());
        for t in [0.31, 1.0, 3.7] {
            let st = nehari_parts(&u.scaled(t), &params);
            let lhs = st.a_pow.value() + st.b_pow.value() - st.c_load.value();
            let rhs = t.powf(params.q) * (b - t.powf(params.p - params.q) * (c - a));
            assert!(
                (lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0),
                "t={t}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn gradient_matches_central_difference() {
        let d = disk(1.0 / 10.0);
        let u = bump(&d);
        for (p, q, r) in [(4.0, 3.0, 2.0), (3.0, 5.0, 4.0), (5.5, 3.5, 2.0)] {
            let params = ProblemParams::new(p, q, LoadExponent::Finite(r), 1.9).unwrap();
            let grad = grad_energy(&u, &params).unwrap();
            let v = ScalarField::from_fn(&d, true, |pt| (3.0 * pt.x - pt.y).cos());
            let analytic = grad.dot(&v);
            let eps = 1e-6;
            let up = u.descend(&v, -eps);
            let um = u.descend(&v, eps);
            let fd = (energy(&up, &params).total - energy(&um, &params).total) / (2.0 * eps);
            assert!(
                (fd - analytic).abs() <= 1e-6 * analytic.abs().max(1.0),
                "({p},{q},{r}): fd {fd} vs {analytic}"
            );
        }
    }

    #[test]
    fn gradient_requires_smooth_finite_load() {
        let d = disk(1.0 / 10.0);
        let u = bump(&d);
        let sup = ProblemParams::new(4.0, 3.0, LoadExponent::Sup, 1.0).unwrap();
        assert!(grad_energy(&u, &sup).is_err());
        let rough = ProblemParams::new(4.0, 3.0, LoadExponent::Finite(1.5), 1.0).unwrap();
        assert!(grad_energy(&u, &rough).is_err());
    }

    #[test]
    fn gradient_vanishes_on_boundary_rows() {
        let d = disk(1.0 / 10.0);
        let u = bump(&d);
        let params = ProblemParams::new(4.0, 3.0, LoadExponent::Finite(2.0), 1.9).unwrap();
        let grad = grad_energy(&u, &params).unwrap();
        for idx in 0..d.num_nodes() {
            if !d.interior[idx] {
                assert_eq!(grad.get(idx), 0.0);
            }
        }
    }

    #[test]
    fn weak_residual_with_candidate_reduces_to_nehari() {
        let d = disk(1.0 / 12.0);
        let u = bump(&d);
        let params = ProblemParams::new(4.0, 3.0, LoadExponent::Sup, 2.0).unwrap();
        let weak = weak_residual(&u, &params, &[u.clone()]).unwrap();
        let nehari = nehari_residual(&u, &params).unwrap();
        // residual(v=u) = |a + b - c| / c = nehari residual, both exact here.
        assert!(
            (weak.max_rel - nehari).abs() < 1e-10 * nehari.max(1e-10),
            "{} vs {}",
            weak.max_rel,
            nehari
        );
    }

    #[test]
    fn hat_tests_agree_with_assembled_gradient() {
        // The per-triangle quadrature route and the assembled nodal vector
        // must agree on hat functions: <A(u), hat_k> = D_k.
        let d = disk(1.0 / 12.0);
        let u = bump(&d);
        let params = ProblemParams::new(4.0, 3.0, LoadExponent::Sup, 2.0).unwrap();
        let div = assemble_divergence(&u, &params);
        let g_u = gradients(&u);
        let area = d.h * d.h / 2.0;
        for &k in d.interior_nodes.iter().step_by(17) {
            let mut hat = ScalarField::zeros(&d, true);
            hat.set_interior(k as usize, 1.0);
            let g_v = gradients(&hat);
            let mut acc = 0.0;
            for t in 0..d.triangles.len() {
                let mag = g_u.magnitude(t);
                if mag > 0.0 {
                    let coef = area * (powe(mag, params.p - 2.0) + powe(mag, params.q - 2.0));
                    acc += coef * (g_u.gx[t] * g_v.gx[t] + g_u.gy[t] * g_v.gy[t]);
                }
            }
            let want = div.get(k as usize);
            assert!(
                (acc - want).abs() <= 1e-10 * want.abs().max(1e-12),
                "node {k}: {acc} vs {want}"
            );
        }
    }

    #[test]
    fn standard_test_set_shape() {
        let d = disk(1.0 / 12.0);
        let u = bump(&d);
        let tests = standard_test_set(&u, 20);
        assert_eq!(tests.len(), 22);
        // All hats sit at distinct interior nodes.
        let mut nonzero = std::collections::HashSet::new();
        for t in &tests[..20] {
            let idx = (0..d.num_nodes()).find(|&i| t.get(i) != 0.0).unwrap();
            assert!(d.interior[idx]);
            assert!(nonzero.insert(idx));
        }
    }
}
