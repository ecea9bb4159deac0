//! Least-energy solves for the two-exponent Dirichlet problem.
//!
//! Two regimes, split by the sign of p - q:
//!
//! * q < p: nontrivial states live on the Nehari set
//!   `|grad u|_p^p + |grad u|_q^q = lambda |u|_r^p`; the solver runs
//!   projected gradient descent on it. Every accepted step is a descend,
//!   absolute value, optional conditioning rescale, then an exact ray
//!   projection back onto the set. The rescale is invisible to the
//!   projection (the projected point of w and of w/s coincide), so it is
//!   pure floating-point hygiene, logged in `scale_log`.
//! * p < q: the energy is coercive and bounded below; plain descent from a
//!   ray minimum of a positive seed finds the negative-energy minimizer.
//!
//! Existence is gated first: lambda must clear the relevant eigenvalue
//! threshold by a 0.1% margin or the solve refuses to start.

use crate::eigen::{EigenCache, EigenError};
use crate::fields::{
    grad_norm, gradients, lp_norm, sup_norm, FieldError, MaxSetSummary, ScalarField,
};
use crate::functionals::{
    grad_energy, nehari_parts, nehari_parts_with, nehari_residual_from_parts, standard_test_set,
    weak_residual, EnergyBreakdown, LoadExponent, NehariParts, ParamError, ProblemParams, Regime,
    WeakResidual,
};
use crate::geometry::Domain;
use crate::math::{log_sub_exp, pairwise_sum, LogVal};
use rand::{Rng, SeedableRng};
use serde::Serialize;
use std::sync::Arc;

#[derive(Clone, Debug, Serialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Relative energy decrease below which an iteration counts as stalled.
    pub tol_energy: f64,
    /// Gradient max-norm target, recorded but not required for convergence.
    pub tol_grad: f64,
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub max_backtracks: u32,
    /// Consecutive stalled iterations that declare convergence.
    pub stall_window: usize,
    pub restarts: u32,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> SolverConfig {
        SolverConfig {
            max_iters: 20_000,
            tol_energy: 1e-9,
            tol_grad: 1e-8,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
            stall_window: 10,
            restarts: 3,
            seed: 7,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error("existence gate refused: {reason} (lambda {lambda:.6e}, threshold {threshold:.6e})")]
    GateRefused { threshold: f64, lambda: f64, reason: String },
    #[error("Nehari projection infeasible: lambda |v|^p must exceed |grad v|_p^p")]
    NotProjectable,
    #[error("Nehari projection factor out of floating range (ln t = {ln_t:.3e})")]
    ProjectionOverflow { ln_t: f64 },
    #[error("projection stayed infeasible through {halvings} step halvings at iteration {iter}")]
    ProjectionInfeasible { iter: usize, halvings: u32 },
    #[error("no seed produced a feasible starting point")]
    NoFeasibleSeed,
    #[error("descent did not converge within {iterations} iterations (best energy {best_energy:.6e})")]
    NonConvergence { iterations: usize, best_energy: f64 },
    #[error("every load exponent in the schedule was refused by the existence gate")]
    AllRungsRefused,
}

/// Existence gate verdict. `margin` is `lambda/threshold - 1`.
#[derive(Clone, Debug, Serialize)]
pub enum GateDecision {
    Proceed { threshold: f64, margin: f64 },
    Refuse { threshold: f64, lambda: f64, reason: String },
}

/// Refuses lambda within 0.1% of the eigenvalue threshold: lambda_r(p) for
/// finite load, the finite-r estimate of lambda_inf(p) in SUP mode.
const GATE_MARGIN: f64 = 1e-3;

pub fn existence_gate(
    params: &ProblemParams,
    cache: &mut EigenCache,
) -> Result<GateDecision, EigenError> {
    let (threshold, name) = match params.r {
        LoadExponent::Finite(r) => {
            // The distance field's quotient bounds lambda_r(p) from above, so
            // a lambda clearing that bound with margin proceeds without the
            // eigen solve. Only the ambiguous band pays for the eigenvalue.
            let rho = ScalarField::rho(cache.domain());
            let ln_quick = params.p * (grad_norm(&rho, params.p).ln - lp_norm(&rho, r).ln);
            if params.lambda.ln() > ln_quick + GATE_MARGIN.ln_1p() {
                let threshold = ln_quick.exp();
                return Ok(GateDecision::Proceed {
                    threshold,
                    margin: params.lambda / threshold - 1.0,
                });
            }
            (cache.lambda(params.p, r)?, "lambda_r(p)")
        }
        LoadExponent::Sup => {
            // The finite-r proxy overshoots lambda_inf(p) by roughly
            // (|u|_inf / |u|_128)^p, which is severe at large p. The
            // normalized roots increase toward the cap from below, so
            // |Omega| cap^p is a rigorous upper bound of the true threshold;
            // take whichever estimate is tighter.
            let est = cache.inf_estimate(params.p)?.estimate;
            let d = cache.domain();
            let ln_cap_bound = d.quad_area.ln() + params.p * d.lambda_inf_cap().ln();
            (est.min(ln_cap_bound.exp()), "lambda_inf_estimate(p)")
        }
    };
    if params.lambda <= threshold * (1.0 + GATE_MARGIN) {
        Ok(GateDecision::Refuse {
            threshold,
            lambda: params.lambda,
            reason: format!("lambda below {name}"),
        })
    } else {
        Ok(GateDecision::Proceed { threshold, margin: params.lambda / threshold - 1.0 })
    }
}

/// ln t for the ray projection onto the Nehari set: `t^(p-q) = b / (c - a)`.
/// None when `c <= a` (the ray never meets the set) or `b = 0`.
pub(crate) fn project_ln_t(parts: &NehariParts, p: f64, q: f64) -> Option<f64> {
    let gap = log_sub_exp(parts.c_load.ln, parts.a_pow.ln)?;
    if parts.b_pow.is_zero() {
        return None;
    }
    Some((parts.b_pow.ln - gap) / (p - q))
}

/// Projects v onto the Nehari set of the given parameters, returning the ray
/// factor t and the projected field. The map is scale-invariant:
/// `nehari_project(s v) = nehari_project(v)` for any s > 0.
pub fn nehari_project(
    v: &ScalarField,
    params: &ProblemParams,
) -> Result<(f64, ScalarField), SolveError> {
    let parts = nehari_parts(v, params);
    let Some(ln_t) = project_ln_t(&parts, params.p, params.q) else {
        return Err(SolveError::NotProjectable);
    };
    if ln_t.abs() > 690.0 {
        return Err(SolveError::ProjectionOverflow { ln_t });
    }
    let t = ln_t.exp();
    Ok((t, v.scaled(t)))
}

/// One row of the iteration trace.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub energy: f64,
    pub nehari_residual: f64,
    pub step: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RestartSummary {
    pub label: String,
    pub feasible: bool,
    pub converged: bool,
    pub energy: Option<f64>,
    pub iterations: usize,
}

/// One rung of the load-exponent continuation.
#[derive(Clone, Debug, Serialize)]
pub struct RStep {
    pub r: f64,
    pub threshold: f64,
    pub skipped: bool,
    pub energy: Option<f64>,
    pub iterations: usize,
    pub nehari_residual: Option<f64>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ReportNorms {
    pub grad_p: f64,
    pub grad_q: f64,
    pub grad_inf: f64,
    /// |u|_r for finite load, |u|_inf in SUP mode.
    pub load: f64,
    pub ln_grad_p: f64,
    pub ln_grad_q: f64,
    pub ln_load: f64,
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct ReportFlags {
    /// Maximizer set spread wider than 2h: point-load location ambiguous.
    pub multi_maximizer: bool,
    /// Some continuation rung was refused by the gate and skipped.
    pub rung_refused: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub field: ScalarField,
    pub params: ProblemParams,
    pub regime: Regime,
    pub energy: EnergyBreakdown,
    pub norms: ReportNorms,
    pub maxset: MaxSetSummary,
    pub nehari_residual: f64,
    pub weak: WeakResidual,
    pub iterations: usize,
    /// Cumulative log of the conditioning rescales applied before
    /// projections; the projected iterates themselves are unaffected.
    pub scale_log: f64,
    /// Ray factor of the final SUP-mode Nehari projection (1 otherwise).
    pub projection_t: f64,
    /// `|grad(u_k - u_{k-1})|_q / |grad u_k|_q` over the last two rungs.
    pub cauchy_gap: Option<f64>,
    /// `|u|_r / |u|_inf - 1` at the last finite rung.
    pub sup_gap: Option<f64>,
    pub r_steps: Vec<RStep>,
    pub restarts: Vec<RestartSummary>,
    pub flags: ReportFlags,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

/// Outcome of one descent run from one seed.
struct Inner {
    field: ScalarField,
    energy: EnergyBreakdown,
    iterations: usize,
    converged: bool,
    scale_log: f64,
    trace: Vec<TraceRow>,
}

struct Evaluated {
    field: ScalarField,
    parts: NehariParts,
    energy: EnergyBreakdown,
}

fn evaluate(field: ScalarField, params: &ProblemParams) -> Evaluated {
    let parts = nehari_parts(&field, params);
    let energy = EnergyBreakdown::from_parts(&parts, params);
    Evaluated { field, parts, energy }
}

/// Barzilai-Borwein trial step from consecutive (field, gradient) pairs,
/// falling back to the previous step when the curvature estimate is unusable.
fn bb_step(
    domain: &Domain,
    cur: &ScalarField,
    grad: &ScalarField,
    prev: &Option<(ScalarField, ScalarField)>,
    fallback: f64,
) -> f64 {
    let Some((pf, pg)) = prev else { return fallback };
    let du: Vec<f64> = domain
        .interior_nodes
        .iter()
        .map(|&i| cur.get(i as usize) - pf.get(i as usize))
        .collect();
    let dg: Vec<f64> = domain
        .interior_nodes
        .iter()
        .map(|&i| grad.get(i as usize) - pg.get(i as usize))
        .collect();
    let uu = pairwise_sum(&du.iter().map(|a| a * a).collect::<Vec<_>>());
    let ug = pairwise_sum(&du.iter().zip(&dg).map(|(a, b)| a * b).collect::<Vec<_>>());
    if ug > 0.0 && uu.is_finite() && uu > 0.0 {
        (uu / ug).clamp(1e-18, 1e18)
    } else {
        fallback
    }
}

/// Projected descent on the Nehari set (q < p). `start` must already lie on
/// the set. Monotone Armijo: every accepted energy is no larger than the
/// previous one.
fn descend_on_nehari(
    start: Evaluated,
    params: &ProblemParams,
    cfg: &SolverConfig,
) -> Result<Inner, SolveError> {
    let domain = start.field.domain().clone();
    let (p, q) = (params.p, params.q);
    let mut cur = start;
    let mut trace = Vec::new();
    let mut prev: Option<(ScalarField, ScalarField)> = None;
    let mut step = f64::NAN; // set from the first gradient below
    let mut scale_log = 0.0f64;
    let mut since_stall = 0usize;
    let mut iterations = 0usize;
    let mut converged = false;

    while iterations < cfg.max_iters {
        iterations += 1;
        let grad = grad_energy(&cur.field, params)?;
        let gg = grad.dot(&grad);
        if gg == 0.0 {
            converged = true;
            break;
        }
        if !step.is_finite() {
            // First iteration: move at most ~10% of the field scale.
            step = 0.1 * cur.field.max_abs() / grad.max_abs().max(1e-300);
        }
        step = bb_step(&domain, &cur.field, &grad, &prev, step);

        let mut s = step;
        let mut accepted: Option<(Evaluated, f64)> = None;
        let mut fallback: Option<(Evaluated, f64)> = None;
        let mut saw_feasible = false;
        for _bt in 0..cfg.max_backtracks {
            let mut w = cur.field.descend(&grad, s);
            w.abs_in_place();
            let g_w = gradients(&w);
            let m_inf = g_w.max_magnitude();
            if m_inf == 0.0 {
                s *= cfg.backtrack;
                continue;
            }
            // Conditioning rescale before projection; projection-invariant.
            let (parts, w) = if !(0.5..=2.0).contains(&m_inf) {
                w.scale_in_place(1.0 / m_inf);
                scale_log += m_inf.ln();
                let g_w = gradients(&w);
                (nehari_parts_with(&g_w, &w, params), w)
            } else {
                (nehari_parts_with(&g_w, &w, params), w)
            };
            let Some(ln_t) = project_ln_t(&parts, p, q) else {
                // Overshot the cone boundary; halving always re-enters it
                // near the (feasible) iterate, so just keep shrinking.
                s *= cfg.backtrack;
                continue;
            };
            saw_feasible = true;
            if ln_t.abs() > 690.0 {
                s *= cfg.backtrack;
                continue;
            }
            // Norms of the projected point follow from homogeneity; the
            // field itself is only materialized for retained trials.
            let proj_parts = NehariParts {
                a_pow: LogVal { ln: parts.a_pow.ln + p * ln_t },
                b_pow: LogVal { ln: parts.b_pow.ln + q * ln_t },
                c_load: LogVal { ln: parts.c_load.ln + p * ln_t },
            };
            let energy = EnergyBreakdown::from_parts(&proj_parts, params);
            if energy.total <= cur.energy.total - cfg.armijo_c1 * s * gg {
                let field = w.scaled(ln_t.exp());
                accepted = Some((Evaluated { field, parts: proj_parts, energy }, s));
                break;
            }
            if energy.total < cur.energy.total
                && fallback.as_ref().map_or(true, |(f, _)| energy.total < f.energy.total)
            {
                let field = w.scaled(ln_t.exp());
                fallback = Some((Evaluated { field, parts: proj_parts, energy }, s));
            }
            s *= cfg.backtrack;
        }
        step = s.max(1e-300);
        if !saw_feasible {
            // Infeasibility survived every halving of the search: the ray
            // through the iterate no longer meets the constraint set at any
            // tested scale, which a healthy feasible point cannot produce.
            return Err(SolveError::ProjectionInfeasible {
                iter: iterations,
                halvings: cfg.max_backtracks as u32,
            });
        }
        let next = match (accepted, fallback) {
            (Some(a), _) => Some(a),
            (None, Some(f)) => Some(f), // strict decrease, Armijo quota unmet
            (None, None) => None,
        };
        let Some((next, used)) = next else {
            since_stall += 1;
            if since_stall >= cfg.stall_window {
                converged = true;
                break;
            }
            continue;
        };
        debug_assert!(next.energy.total <= cur.energy.total);
        let drop = cur.energy.total - next.energy.total;
        if drop <= cfg.tol_energy * next.energy.total.abs().max(1e-300) {
            since_stall += 1;
        } else {
            since_stall = 0;
        }
        trace.push(TraceRow {
            iter: iterations,
            energy: next.energy.total,
            nehari_residual: nehari_residual_from_parts(&next.parts),
            step: used,
        });
        prev = Some((std::mem::replace(&mut cur.field, next.field), grad));
        cur.parts = next.parts;
        cur.energy = next.energy;
        if since_stall >= cfg.stall_window {
            converged = true;
            break;
        }
    }
    Ok(Inner {
        field: cur.field,
        energy: cur.energy,
        iterations,
        converged,
        scale_log,
        trace,
    })
}

/// Plain monotone descent for the coercive regime p < q.
fn descend_free(
    start: Evaluated,
    params: &ProblemParams,
    cfg: &SolverConfig,
) -> Result<Inner, SolveError> {
    let domain = start.field.domain().clone();
    let mut cur = start;
    let mut trace = Vec::new();
    let mut prev: Option<(ScalarField, ScalarField)> = None;
    let mut step = f64::NAN;
    let mut since_stall = 0usize;
    let mut iterations = 0usize;
    let mut converged = false;

    while iterations < cfg.max_iters {
        iterations += 1;
        let grad = grad_energy(&cur.field, params)?;
        let gg = grad.dot(&grad);
        if gg == 0.0 {
            converged = true;
            break;
        }
        if !step.is_finite() {
            step = 0.1 * cur.field.max_abs() / grad.max_abs().max(1e-300);
        }
        step = bb_step(&domain, &cur.field, &grad, &prev, step);

        let mut s = step;
        let mut accepted: Option<(Evaluated, f64)> = None;
        let mut fallback: Option<(Evaluated, f64)> = None;
        for _ in 0..cfg.max_backtracks {
            let mut w = cur.field.descend(&grad, s);
            w.abs_in_place();
            let trial = evaluate(w, params);
            if trial.energy.total <= cur.energy.total - cfg.armijo_c1 * s * gg {
                accepted = Some((trial, s));
                break;
            }
            if trial.energy.total < cur.energy.total
                && fallback.as_ref().map_or(true, |(f, _)| trial.energy.total < f.energy.total)
            {
                fallback = Some((trial, s));
            }
            s *= cfg.backtrack;
        }
        step = s.max(1e-300);
        let Some((next, used)) = accepted.or(fallback) else {
            since_stall += 1;
            if since_stall >= cfg.stall_window {
                converged = true;
                break;
            }
            continue;
        };
        debug_assert!(next.energy.total <= cur.energy.total);
        let drop = cur.energy.total - next.energy.total;
        if drop <= cfg.tol_energy * next.energy.total.abs().max(1e-300) {
            since_stall += 1;
        } else {
            since_stall = 0;
        }
        trace.push(TraceRow {
            iter: iterations,
            energy: next.energy.total,
            nehari_residual: nehari_residual_from_parts(&next.parts),
            step: used,
        });
        prev = Some((std::mem::replace(&mut cur.field, next.field), grad));
        cur.parts = next.parts;
        cur.energy = next.energy;
        if since_stall >= cfg.stall_window {
            converged = true;
            break;
        }
    }
    Ok(Inner {
        field: cur.field,
        energy: cur.energy,
        iterations,
        converged,
        scale_log: 0.0,
        trace,
    })
}

/// Named seed fields for the restart loop: the distance field, the
/// eigenfield of the gate eigenvalue, then deterministic noisy bumps.
fn seed_fields(
    params: &ProblemParams,
    domain: &Arc<Domain>,
    cfg: &SolverConfig,
    cache: &mut EigenCache,
) -> Result<Vec<(String, ScalarField)>, SolveError> {
    let total = (cfg.restarts as usize).max(1);
    let mut seeds = vec![("rho".to_string(), ScalarField::rho(domain))];
    if total >= 2 {
        // Past the estimate ceiling r = 128 the eigen descent crawls, and a
        // seed only has to be projectable, not exact; cap the seed rung.
        let r_for_seed = params.r.finite().unwrap_or(128.0).min(128.0);
        let eig = cache.result(params.p, r_for_seed)?.eigenfield.clone();
        seeds.push(("eigenfield".to_string(), eig));
    }
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(cfg.seed);
    for k in 0..total.saturating_sub(2) {
        let mut noisy = ScalarField::rho(domain);
        for &i in &domain.interior_nodes {
            let i = i as usize;
            let v = noisy.get(i) * (1.0 + 0.5 * rng.random_range(-1.0..=1.0));
            noisy.set_interior(i, v);
        }
        seeds.push((format!("noise-{k}"), noisy));
    }
    Ok(seeds)
}

fn build_report(
    field: ScalarField,
    params: &ProblemParams,
    iterations: usize,
    scale_log: f64,
    projection_t: f64,
    restarts: Vec<RestartSummary>,
    trace: Vec<TraceRow>,
    r_steps: Vec<RStep>,
    cauchy_gap: Option<f64>,
    sup_gap: Option<f64>,
    rung_refused: bool,
) -> Result<SolveReport, SolveError> {
    let parts = nehari_parts(&field, params);
    if parts.c_load.is_zero() {
        return Err(SolveError::Field(FieldError::ZeroField));
    }
    let energy = EnergyBreakdown::from_parts(&parts, params);
    let g = gradients(&field);
    let np = grad_norm(&field, params.p);
    let nq = grad_norm(&field, params.q);
    let maxset = sup_norm(&field);
    let load = match params.r {
        LoadExponent::Finite(r) => lp_norm(&field, r),
        LoadExponent::Sup => crate::fields::Norm {
            value: maxset.max_value,
            ln: maxset.max_value.ln(),
        },
    };
    let norms = ReportNorms {
        grad_p: np.value,
        grad_q: nq.value,
        grad_inf: g.max_magnitude(),
        load: load.value,
        ln_grad_p: np.ln,
        ln_grad_q: nq.ln,
        ln_load: load.ln,
    };
    let weak = weak_residual(&field, params, &standard_test_set(&field, 20))?;
    let flags = ReportFlags {
        multi_maximizer: maxset.spread_exceeds(field.domain().h),
        rung_refused,
    };
    Ok(SolveReport {
        regime: params.regime(),
        params: *params,
        energy,
        norms,
        maxset: maxset.summary(field.domain()),
        nehari_residual: nehari_residual_from_parts(&parts),
        weak,
        iterations,
        scale_log,
        projection_t,
        cauchy_gap,
        sup_gap,
        r_steps,
        restarts,
        flags,
        trace,
        field,
    })
}

/// Least-energy solve at a finite load exponent r >= 2.
///
/// With `init` the solve runs once from that field (continuation warm
/// start); otherwise it runs the configured restarts and keeps the lowest
/// converged energy.
pub fn solve_least_energy(
    params: &ProblemParams,
    domain: &Arc<Domain>,
    cfg: &SolverConfig,
    cache: &mut EigenCache,
    init: Option<&ScalarField>,
) -> Result<SolveReport, SolveError> {
    match params.r {
        LoadExponent::Finite(r) if r >= 2.0 => {}
        other => return Err(SolveError::Param(ParamError::NeedsSmoothLoad(other))),
    }
    debug_assert!(Arc::ptr_eq(domain, cache.domain()));
    match existence_gate(params, cache)? {
        GateDecision::Refuse { threshold, lambda, reason } => {
            return Err(SolveError::GateRefused { threshold, lambda, reason });
        }
        GateDecision::Proceed { .. } => {}
    }

    let project_seed = |f: &ScalarField| -> Option<Evaluated> {
        let (_, projected) = nehari_project(f, params).ok()?;
        Some(evaluate(projected, params))
    };

    let mut summaries: Vec<RestartSummary> = Vec::new();
    let mut best: Option<Inner> = None;
    let mut total_iters = 0usize;
    let run_batch = |named: &[(String, ScalarField)],
                         summaries: &mut Vec<RestartSummary>,
                         best: &mut Option<Inner>,
                         total_iters: &mut usize|
     -> Result<(), SolveError> {
        for (label, seed) in named {
            let Some(start) = project_seed(seed) else {
                summaries.push(RestartSummary {
                    label: label.clone(),
                    feasible: false,
                    converged: false,
                    energy: None,
                    iterations: 0,
                });
                continue;
            };
            let run = match params.regime() {
                Regime::QBelowP => descend_on_nehari(start, params, cfg),
                Regime::PBelowQ => descend_free(start, params, cfg),
            };
            match run {
                Ok(inner) => {
                    *total_iters += inner.iterations;
                    summaries.push(RestartSummary {
                        label: label.clone(),
                        feasible: true,
                        converged: inner.converged,
                        energy: Some(inner.energy.total),
                        iterations: inner.iterations,
                    });
                    let better = match &*best {
                        None => inner.converged,
                        Some(b) => inner.converged && inner.energy.total < b.energy.total,
                    };
                    if better {
                        *best = Some(inner);
                    }
                }
                Err(SolveError::ProjectionInfeasible { .. }) => {
                    summaries.push(RestartSummary {
                        label: label.clone(),
                        feasible: false,
                        converged: false,
                        energy: None,
                        iterations: 0,
                    });
                }
                Err(e) => return Err(e),
            }
        }
        Ok(())
    };

    match init {
        Some(f) => {
            let warm = vec![("warm".to_string(), f.clone())];
            run_batch(&warm, &mut summaries, &mut best, &mut total_iters)?;
            if best.is_none() {
                // A warm field can sit outside the feasible cone of the new
                // load exponent (c > a is scale invariant, so no rescale
                // rescues it). Fall back to the standard restart seeds; the
                // eigenfield one is always projectable once the gate passed.
                let named = seed_fields(params, domain, cfg, cache)?;
                run_batch(&named, &mut summaries, &mut best, &mut total_iters)?;
            }
        }
        None => {
            let named = seed_fields(params, domain, cfg, cache)?;
            run_batch(&named, &mut summaries, &mut best, &mut total_iters)?;
        }
    }
    let Some(win) = best else {
        if summaries.iter().all(|s| !s.feasible) {
            return Err(SolveError::NoFeasibleSeed);
        }
        return Err(SolveError::NonConvergence {
            iterations: total_iters,
            best_energy: summaries
                .iter()
                .filter_map(|s| s.energy)
                .fold(f64::INFINITY, f64::min),
        });
    };
    build_report(
        win.field,
        params,
        total_iters,
        win.scale_log,
        1.0,
        summaries,
        win.trace,
        Vec::new(),
        None,
        None,
        false,
    )
}

pub const DEFAULT_R_SCHEDULE: [f64; 7] = [2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0];

/// Load-exponent continuation toward `params.r` (normally SUP): solve the
/// schedule left to right, warm-starting each rung from the previous field,
/// then evaluate the final field under the target load. For a SUP target the
/// final field is ray-projected onto the SUP Nehari set and the factor
/// recorded as `projection_t`.
pub fn continue_in_r(
    params: &ProblemParams,
    domain: &Arc<Domain>,
    cfg: &SolverConfig,
    cache: &mut EigenCache,
    schedule: Option<&[f64]>,
) -> Result<SolveReport, SolveError> {
    let sched: Vec<f64> = match schedule {
        Some(s) => s.to_vec(),
        None => DEFAULT_R_SCHEDULE.to_vec(),
    };
    for w in sched.windows(2) {
        if !(w[0] < w[1]) {
            return Err(SolveError::Param(ParamError::BadLoadExponent(w[1])));
        }
    }
    if sched.is_empty() || sched[0] < 2.0 {
        return Err(SolveError::Param(ParamError::BadLoadExponent(
            sched.first().copied().unwrap_or(f64::NAN),
        )));
    }

    let mut r_steps: Vec<RStep> = Vec::new();
    let mut trace: Vec<TraceRow> = Vec::new();
    let mut total_iters = 0usize;
    let mut scale_log = 0.0f64;
    let mut rung_refused = false;
    let mut prev_field: Option<ScalarField> = None;
    let mut field: Option<(f64, ScalarField)> = None; // (r, solution)

    for &r in &sched {
        let pr = params.with_load(LoadExponent::Finite(r));
        match existence_gate(&pr, cache)? {
            GateDecision::Refuse { threshold, .. } => {
                rung_refused = true;
                r_steps.push(RStep {
                    r,
                    threshold,
                    skipped: true,
                    energy: None,
                    iterations: 0,
                    nehari_residual: None,
                });
            }
            GateDecision::Proceed { threshold, .. } => {
                let init = field.as_ref().map(|(_, f)| f.clone());
                let rep = solve_least_energy(&pr, domain, cfg, cache, init.as_ref())?;
                total_iters += rep.iterations;
                scale_log += rep.scale_log;
                trace.extend_from_slice(&rep.trace);
                r_steps.push(RStep {
                    r,
                    threshold,
                    skipped: false,
                    energy: Some(rep.energy.total),
                    iterations: rep.iterations,
                    nehari_residual: Some(rep.nehari_residual),
                });
                prev_field = field.take().map(|(_, f)| f);
                field = Some((r, rep.field));
            }
        }
    }

    let Some((r_last, u_last)) = field else {
        return Err(SolveError::AllRungsRefused);
    };
    let cauchy_gap = prev_field.map(|pf| {
        let diff = u_last.descend(&pf, 1.0);
        grad_norm(&diff, params.q).value / grad_norm(&u_last, params.q).value
    });
    let sup = sup_norm(&u_last);
    let sup_gap = Some((lp_norm(&u_last, r_last).value / sup.max_value - 1.0).abs());

    let (projection_t, u_fin) = if params.r.is_sup() {
        nehari_project(&u_last, params)?
    } else {
        (1.0, u_last)
    };
    build_report(
        u_fin,
        params,
        total_iters,
        scale_log,
        projection_t,
        Vec::new(),
        trace,
        r_steps,
        cauchy_gap,
        sup_gap,
        rung_refused,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, Point, Shape};

    fn disk(h: f64) -> Arc<Domain> {
        build_domain(Shape::Disk { center: Point::new(0.0, 0.0), radius: 1.0 }, h).unwrap()
    }

    fn bump(d: &Arc<Domain>) -> ScalarField {
        ScalarField::from_fn(d, true, |p| {
            (1.0 - p.x * p.x - p.y * p.y).max(0.0) * (1.0 + 0.2 * p.x)
        })
    }

    fn logval(x: f64) -> LogVal {
        LogVal::from_value(x)
    }

    #[test]
    fn projection_factor_arithmetic() {
        // t^(p-q) = b/(c-a). With p=4, q=3: a=3, b=2, c=5 gives t=1;
        // a=3, b=2, c=4 gives t=2.
        let parts = NehariParts { a_pow: logval(3.0), b_pow: logval(2.0), c_load: logval(5.0) };
        let t = project_ln_t(&parts, 4.0, 3.0).unwrap().exp();
        assert!((t - 1.0).abs() < 1e-14);
        let parts = NehariParts { a_pow: logval(3.0), b_pow: logval(2.0), c_load: logval(4.0) };
        let t = project_ln_t(&parts, 4.0, 3.0).unwrap().exp();
        assert!((t - 2.0).abs() < 1e-14);
        // Infeasible ray: c <= a.
        let parts = NehariParts { a_pow: logval(5.0), b_pow: logval(2.0), c_load: logval(4.0) };
        assert!(project_ln_t(&parts, 4.0, 3.0).is_none());
    }

    #[test]
    fn projection_lands_on_the_set_and_is_scale_invariant() {
        let d = disk(1.0 / 12.0);
        let v = bump(&d);
        let params =
            ProblemParams::new(5.0, 3.0, LoadExponent::Finite(2.5), 2000.0).unwrap();
        let (t, proj) = nehari_project(&v, &params).unwrap();
        assert!(t > 0.0);
        let res = crate::functionals::nehari_residual(&proj, &params).unwrap();
        assert!(res <= 1e-12, "residual {res}");
        // Idempotence: reprojecting moves nothing.
        let (t2, _) = nehari_project(&proj, &params).unwrap();
        assert!((t2 - 1.0).abs() <= 1e-12, "t2 {t2}");
        // Scale invariance of the map, and t(s v) = t(v)/s.
        let (ts, proj_s) = nehari_project(&v.scaled(8.0), &params).unwrap();
        assert!((ts - t / 8.0).abs() <= 1e-12 * t, "ts {ts}");
        for i in 0..d.num_nodes() {
            let a = proj.get(i);
            let b = proj_s.get(i);
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-12));
        }
    }

    #[test]
    fn gate_refuses_below_threshold() {
        let d = disk(1.0 / 12.0);
        let mut cache = EigenCache::new(d.clone(), SolverConfig::default());
        let lam = cache.lambda(3.5, 2.0).unwrap();
        let low =
            ProblemParams::new(3.5, 3.0, LoadExponent::Finite(2.0), 0.9 * lam).unwrap();
        assert!(matches!(
            existence_gate(&low, &mut cache).unwrap(),
            GateDecision::Refuse { .. }
        ));
        let just_under =
            ProblemParams::new(3.5, 3.0, LoadExponent::Finite(2.0), lam * 1.0005).unwrap();
        assert!(matches!(
            existence_gate(&just_under, &mut cache).unwrap(),
            GateDecision::Refuse { .. }
        ));
        let ok = ProblemParams::new(3.5, 3.0, LoadExponent::Finite(2.0), 2.0 * lam).unwrap();
        match existence_gate(&ok, &mut cache).unwrap() {
            GateDecision::Proceed { threshold, margin } => {
                // A comfortable lambda may clear the gate on the distance
                // field's quotient alone; the reported threshold is then an
                // upper bound of the eigenvalue, never below it.
                assert!(threshold >= lam * (1.0 - 1e-12), "threshold {threshold} below {lam}");
                assert!(margin > 0.0);
                assert!((margin - (2.0 * lam / threshold - 1.0)).abs() < 1e-9);
            }
            GateDecision::Refuse { .. } => panic!("refused a comfortable lambda"),
        }
    }

    #[test]
    fn nehari_solve_small_disk() {
        let d = disk(1.0 / 12.0);
        let cfg = SolverConfig::default();
        let mut cache = EigenCache::new(d.clone(), cfg.clone());
        let lam_q = cache.lambda(3.0, 2.0).unwrap();
        let lam_p = cache.lambda(4.0, 2.0).unwrap();
        let lambda = 2.0 * lam_p.max(lam_q);
        let params = ProblemParams::new(4.0, 3.0, LoadExponent::Finite(2.0), lambda).unwrap();
        let rep = solve_least_energy(&params, &d, &cfg, &mut cache, None).unwrap();
        assert!(rep.nehari_residual <= 1e-8, "residual {}", rep.nehari_residual);
        assert!(rep.energy.total > 0.0, "Nehari minimum has positive energy");
        // Energy identity on the set: E = (1/q - 1/p) |grad u|_q^q.
        let b = rep.norms.ln_grad_q * 3.0;
        let want = (1.0 / 3.0 - 1.0 / 4.0) * b.exp();
        assert!(
            (rep.energy.total - want).abs() <= 1e-8 * want.abs(),
            "{} vs {want}",
            rep.energy.total
        );
        // Load-norm floor: |u|_r >= (lambda_r(q)/lambda)^(1/(p-q)).
        let floor = (lam_q / lambda).powf(1.0 / (4.0 - 3.0));
        assert!(rep.norms.load >= floor * (1.0 - 1e-6), "{} vs {floor}", rep.norms.load);
        // Energy floor: E >= (1/q - 1/p) lambda_r(q) (lambda_r(q)/lambda)^(q/(p-q)).
        let e_floor = (1.0 / 3.0 - 1.0 / 4.0) * lam_q * (lam_q / lambda).powf(3.0);
        assert!(rep.energy.total >= e_floor * (1.0 - 1e-6));
        // Monotone energy along the winning trace.
        for w in rep.trace.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-12 * w[0].energy.abs());
        }
        assert!(!rep.flags.multi_maximizer);
    }

    #[test]
    fn coercive_solve_small_disk() {
        let d = disk(1.0 / 12.0);
        let cfg = SolverConfig::default();
        let mut cache = EigenCache::new(d.clone(), cfg.clone());
        let lam_p = cache.lambda(3.0, 3.0).unwrap();
        let params =
            ProblemParams::new(3.0, 4.0, LoadExponent::Finite(3.0), 2.0 * lam_p).unwrap();
        let rep = solve_least_energy(&params, &d, &cfg, &mut cache, None).unwrap();
        assert!(rep.energy.total < 0.0, "coercive minimum is negative, got {}", rep.energy.total);
        // Free descent stalls on energy, so first-order identities hold only
        // to the square root of the energy tolerance.
        assert!(rep.nehari_residual <= 1e-3, "residual {}", rep.nehari_residual);
        for w in rep.trace.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-12 * w[0].energy.abs());
        }
    }

    #[test]
    fn warm_start_runs_single_restart() {
        let d = disk(1.0 / 12.0);
        let cfg = SolverConfig::default();
        let mut cache = EigenCache::new(d.clone(), cfg.clone());
        let lam = cache.lambda(4.0, 2.0).unwrap();
        let params = ProblemParams::new(4.0, 3.0, LoadExponent::Finite(2.0), 3.0 * lam).unwrap();
        let cold = solve_least_energy(&params, &d, &cfg, &mut cache, None).unwrap();
        assert_eq!(cold.restarts.len(), cfg.restarts as usize);
        let warm = solve_least_energy(&params, &d, &cfg, &mut cache, Some(&cold.field)).unwrap();
        assert_eq!(warm.restarts.len(), 1);
        assert!(warm.iterations <= cold.iterations);
        assert!((warm.energy.total - cold.energy.total).abs() <= 1e-6 * cold.energy.total.abs());
    }
}
