//! Rayleigh quotient minimization: lambda_r(m) = min |grad u|_m^m / |u|_r^m
//! over nonzero Dirichlet fields, its normalized minimizers, and the finite-r
//! ladder used to estimate lambda_inf(m) = min |grad u|_m^m / |u|_inf^m.
//!
//! The descent is projected gradient on the r-normalized quotient: step, take
//! absolute values, renormalize to |u|_r = 1. Taking |u| never increases the
//! quotient (per-triangle gradient components are single nodal differences,
//! so ||a|-|b|| <= |a-b| componentwise) and keeps iterates in the positive
//! cone where first eigenfunctions live. Steps use a Barzilai-Borwein guess
//! inside a backtracking Armijo loop with a short non-monotone reference
//! window; the quotient plateaus long before the iterate settles, so the
//! stopping rule watches the quotient, not the field.

use crate::fields::{grad_power_sum, gradients, lp_power_sum, ScalarField};
use crate::functionals::{assemble_m_divergence, scatter_load};
use crate::geometry::Domain;
use crate::math::pairwise_sum;
use crate::solver::SolverConfig;
use serde::Serialize;
use std::collections::HashMap;
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum EigenError {
    #[error("rayleigh descent did not converge within {iterations} iterations (lambda {last_lambda:.6e})")]
    NonConvergence { iterations: usize, last_lambda: f64 },
    #[error("gradient exponent m must satisfy m >= 2, got {0}")]
    BadExponent(f64),
    #[error("load exponent r must satisfy r >= 2 on the gradient path, got {0}")]
    BadLoad(f64),
}

/// A converged Rayleigh minimizer with |eigenfield|_r = 1.
#[derive(Clone, Debug)]
pub struct EigenResult {
    pub lambda: f64,
    pub ln_lambda: f64,
    pub eigenfield: ScalarField,
    pub iterations: usize,
    /// Max-norm of the quotient gradient at the returned iterate.
    pub residual: f64,
}

/// State carried through one quotient evaluation: the normalized field and
/// its |grad .|_m^m value (which equals the quotient when |u|_r = 1).
struct Normalized {
    field: ScalarField,
    ln_lambda: f64,
}

/// Quotient gradient at an r-normalized iterate:
/// `G = m (div_m(u) - lambda w |u|^(r-2) u)`, zero on boundary rows.
fn quotient_grad(u: &ScalarField, m: f64, r: f64, lambda_ln: f64) -> ScalarField {
    let mut g = assemble_m_divergence(u, m);
    let mut load = vec![0.0f64; u.domain().num_nodes()];
    // |u|_r = 1 here, so the load factor is exactly lambda.
    scatter_load(u, r, lambda_ln, |i, v| load[i] = v);
    for &i in &u.domain().interior_nodes {
        let i = i as usize;
        let v = m * (g.get(i) - load[i]);
        g.set_interior(i, v);
    }
    g
}

pub fn rayleigh_min(
    domain: &Arc<Domain>,
    m: f64,
    r: f64,
    cfg: &SolverConfig,
    init: Option<&ScalarField>,
) -> Result<EigenResult, EigenError> {
    if !(m >= 2.0 && m.is_finite()) {
        return Err(EigenError::BadExponent(m));
    }
    if !(r >= 2.0 && r.is_finite()) {
        return Err(EigenError::BadLoad(r));
    }
    let mut scratch = Vec::new();
    let seed = match init {
        Some(f) => f.clone(),
        None => ScalarField::rho(domain),
    };

    let eval = |u: ScalarField, scratch: &mut Vec<f64>| -> Normalized {
        let mut u = u;
        u.abs_in_place();
        let s = lp_power_sum(&u, r, scratch);
        assert!(!s.is_zero(), "eigen iterate collapsed to zero");
        u.scale_in_place((-s.ln / r).exp());
        let ln_lambda = grad_power_sum(&gradients(&u), m, scratch).ln;
        Normalized { field: u, ln_lambda }
    };

    let mut cur = eval(seed, &mut scratch);
    let mut best_ln = cur.ln_lambda;
    let mut best_field = cur.field.clone();

    // Non-monotone Armijo reference: the quotient max over a short window.
    // Plain monotone Armijo defeats the Barzilai-Borwein step, which makes
    // nonmonotone progress by design.
    let mut window: Vec<f64> = vec![cur.ln_lambda.exp()];
    let mut step = (-cur.ln_lambda).exp().min(1e12); // 1 / lambda estimate
    let mut prev: Option<(ScalarField, ScalarField)> = None; // (field, grad)
    let mut since_improve = 0usize;
    let mut iterations = 0usize;

    while iterations < cfg.max_iters && since_improve < cfg.stall_window {
        iterations += 1;
        let grad = quotient_grad(&cur.field, m, r, cur.ln_lambda);
        let gg = grad.dot(&grad);
        if gg == 0.0 {
            since_improve = cfg.stall_window; // exactly stationary
            break;
        }
        // Barzilai-Borwein guess from the previous (field, grad) pair.
        if let Some((pf, pg)) = &prev {
            let du: Vec<f64> = domain
                .interior_nodes
                .iter()
                .map(|&i| cur.field.get(i as usize) - pf.get(i as usize))
                .collect();
            let dg: Vec<f64> = domain
                .interior_nodes
                .iter()
                .map(|&i| grad.get(i as usize) - pg.get(i as usize))
                .collect();
            let prod: Vec<f64> = du.iter().zip(&dg).map(|(a, b)| a * b).collect();
            let uu = pairwise_sum(&du.iter().map(|a| a * a).collect::<Vec<_>>());
            let ug = pairwise_sum(&prod);
            if ug > 0.0 && uu.is_finite() {
                step = (uu / ug).clamp(1e-18, 1e18);
            }
        }
        let reference = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut accepted = None;
        let mut s = step;
        for _ in 0..cfg.max_backtracks {
            let trial = eval(cur.field.descend(&grad, s), &mut scratch);
            if trial.ln_lambda.exp() <= reference - cfg.armijo_c1 * s * gg {
                accepted = Some(trial);
                break;
            }
            s *= cfg.backtrack;
        }
        // Keep the shrunken scale when every trial was rejected, otherwise
        // the next iteration replays the same oversized step.
        step = s;
        let Some(next) = accepted else {
            since_improve += 1;
            continue;
        };
        prev = Some((std::mem::replace(&mut cur.field, next.field), grad));
        cur.ln_lambda = next.ln_lambda;
        window.push(cur.ln_lambda.exp());
        if window.len() > cfg.stall_window {
            window.remove(0);
        }
        if cur.ln_lambda < best_ln {
            // Stall counting is relative: drops below tol_energy do not
            // count as progress.
            if cur.ln_lambda < best_ln - cfg.tol_energy {
                since_improve = 0;
            } else {
                since_improve += 1;
            }
            best_ln = cur.ln_lambda;
            best_field = cur.field.clone();
        } else {
            since_improve += 1;
        }
    }
    if since_improve < cfg.stall_window {
        return Err(EigenError::NonConvergence { iterations, last_lambda: best_ln.exp() });
    }

    // Exact final normalization and fresh diagnostics on the kept iterate.
    let fin = eval(best_field, &mut scratch);
    let grad = quotient_grad(&fin.field, m, r, fin.ln_lambda);
    let residual = fin.field.domain().interior_nodes.iter()
        .map(|&i| grad.get(i as usize).abs())
        .fold(0.0f64, f64::max);
    Ok(EigenResult {
        lambda: fin.ln_lambda.exp(),
        ln_lambda: fin.ln_lambda,
        eigenfield: fin.field,
        iterations,
        residual,
    })
}

/// One row of the finite-r trend toward lambda_inf(m). `lambda_norm` is
/// `|Omega|^(m/r) lambda`, the form that is nonincreasing in r exactly.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TrendRow {
    pub r: f64,
    pub lambda: f64,
    pub ln_lambda: f64,
    pub lambda_norm: f64,
}

/// lambda_inf(m) estimated from the finite-r ladder; `estimate` is the
/// r = 128 value, `proxy_gap` the relative gap between the last two rungs.
#[derive(Clone, Debug, Serialize)]
pub struct InfEstimate {
    pub m: f64,
    pub estimate: f64,
    pub ln_estimate: f64,
    /// estimate^(1/m), the quantity that approaches the reciprocal inradius.
    pub root: f64,
    /// (|Omega|^-1 estimate)^(1/m), monotone in m for exact minima.
    pub norm_root: f64,
    pub trend: Vec<TrendRow>,
    pub proxy_gap: f64,
}

/// Warm-start ladder in r. Entries are computed in this order, each seeded
/// by the previous eigenfield, so any (m, r) value has one canonical
/// computation path regardless of query order.
pub const R_LADDER: [f64; 9] = [2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0];

const TREND_RS: [f64; 5] = [8.0, 16.0, 32.0, 64.0, 128.0];

/// Memoized eigen solves for one domain and one solver configuration.
pub struct EigenCache {
    domain: Arc<Domain>,
    cfg: SolverConfig,
    map: HashMap<(u64, u64), EigenResult>,
}

impl EigenCache {
    pub fn new(domain: Arc<Domain>, cfg: SolverConfig) -> EigenCache {
        EigenCache { domain, cfg, map: HashMap::new() }
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    /// lambda_r(m) and its minimizer. Ladder values warm-start from the
    /// previous rung; off-ladder r solves cold from the distance field.
    pub fn result(&mut self, m: f64, r: f64) -> Result<&EigenResult, EigenError> {
        let key = (m.to_bits(), r.to_bits());
        if !self.map.contains_key(&key) {
            if let Some(pos) = R_LADDER.iter().position(|&x| x == r) {
                for &rr in &R_LADDER[..=pos] {
                    let k = (m.to_bits(), rr.to_bits());
                    if self.map.contains_key(&k) {
                        continue;
                    }
                    let init = R_LADDER[..R_LADDER.iter().position(|&x| x == rr).unwrap()]
                        .last()
                        .and_then(|prev_r| self.map.get(&(m.to_bits(), prev_r.to_bits())))
                        .map(|res| res.eigenfield.clone());
                    let res = rayleigh_min(&self.domain, m, rr, &self.cfg, init.as_ref())?;
                    self.map.insert(k, res);
                }
            } else {
                let res = rayleigh_min(&self.domain, m, r, &self.cfg, None)?;
                self.map.insert(key, res);
            }
        }
        Ok(self.map.get(&key).unwrap())
    }

    pub fn lambda(&mut self, m: f64, r: f64) -> Result<f64, EigenError> {
        Ok(self.result(m, r)?.lambda)
    }

    /// The finite-r proxy for lambda_inf(m): ladder values at r in
    /// {8, ..., 128}, the last of which is the estimate.
    pub fn inf_estimate(&mut self, m: f64) -> Result<InfEstimate, EigenError> {
        self.result(m, 128.0)?;
        let area = self.domain.quad_area;
        let mut trend = Vec::with_capacity(TREND_RS.len());
        for &r in &TREND_RS {
            let res = &self.map[&(m.to_bits(), r.to_bits())];
            trend.push(TrendRow {
                r,
                lambda: res.lambda,
                ln_lambda: res.ln_lambda,
                lambda_norm: (res.ln_lambda + (m / r) * area.ln()).exp(),
            });
        }
        let last = trend[trend.len() - 1];
        let prev = trend[trend.len() - 2];
        Ok(InfEstimate {
            m,
            estimate: last.lambda,
            ln_estimate: last.ln_lambda,
            root: (last.ln_lambda / m).exp(),
            norm_root: ((last.ln_lambda - area.ln()) / m).exp(),
            trend,
            proxy_gap: ((last.ln_lambda - prev.ln_lambda).exp() - 1.0).abs(),
        })
    }
}
