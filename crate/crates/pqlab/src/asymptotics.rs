//! Large-exponent sweeps: drive p upward with q = Q p locked, the load in
//! SUP mode, and lambda following one of two growth rules, then compare the
//! measured profiles against the closed-form limits.
//!
//! With cap = 1/max(rho) (the reciprocal discrete inradius) and
//! `kappa = (cap / Lambda)^(1/(1-Q))`:
//!
//! * power rule `lambda_p = Lambda^p`, Q in (0,1): sup and gradient limits
//!   are exactly `kappa / cap` and `kappa`, the profile collapses onto
//!   `kappa rho`.
//! * power rule, Q > 1: one-sided bounds: `|u|_inf >= 1/cap`,
//!   `|grad u|_inf <= kappa`, envelope `u <= kappa rho`.
//! * renormalized rule `lambda_p = c |Omega| cap^p`, c > 1: the limit family
//!   at the threshold itself; limits are `1/cap` and `1` with envelope
//!   coefficient one, for every admissible Q.

use crate::eigen::{EigenCache, EigenError};
use crate::fields::ScalarField;
use crate::functionals::{LoadExponent, ParamError, ProblemParams};
use crate::geometry::Domain;
use crate::solver::{
    continue_in_r, existence_gate, GateDecision, SolveError, SolverConfig,
};
use serde::Serialize;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum LambdaRule {
    /// `lambda_p = lambda_sup^p`.
    Power { lambda_sup: f64 },
    /// `lambda_p = c |Omega| cap^p`, the renormalized threshold family.
    Renorm { c: f64 },
}

#[derive(Debug, thiserror::Error)]
pub enum AsympError {
    #[error("exponent ratio Q must lie in (0,1) or (1,inf), got {0}")]
    BadRatio(f64),
    #[error("{0}")]
    BadRule(String),
    #[error("p list must be ascending with p > 2 and Q p > 2, offending entry {0}")]
    BadPList(f64),
    #[error("lambda_sup {lambda_sup} sits below the domain cap {cap}; the sweep family degenerates")]
    LambdaBelowCap { lambda_sup: f64, cap: f64 },
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// One full sweep request.
#[derive(Clone, Debug, Serialize)]
pub struct SweepSpec {
    /// Q = q/p, held fixed along the sweep.
    pub q_ratio: f64,
    pub rule: LambdaRule,
    pub p_list: Vec<f64>,
    /// Load-exponent schedule for the inner SUP continuation.
    pub r_schedule: Vec<f64>,
}

pub const DEFAULT_P_LIST: [f64; 5] = [8.0, 12.0, 16.0, 24.0, 32.0];
pub const DEFAULT_SWEEP_R_SCHEDULE: [f64; 9] =
    [2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0];

impl SweepSpec {
    pub fn new(q_ratio: f64, rule: LambdaRule) -> Result<SweepSpec, AsympError> {
        let spec = SweepSpec {
            q_ratio,
            rule,
            p_list: DEFAULT_P_LIST.to_vec(),
            r_schedule: DEFAULT_SWEEP_R_SCHEDULE.to_vec(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_p_list(mut self, p_list: Vec<f64>) -> Result<SweepSpec, AsympError> {
        self.p_list = p_list;
        self.validate()?;
        Ok(self)
    }

    pub fn with_r_schedule(mut self, r_schedule: Vec<f64>) -> SweepSpec {
        self.r_schedule = r_schedule;
        self
    }

    pub fn validate(&self) -> Result<(), AsympError> {
        let q = self.q_ratio;
        if !(q.is_finite() && q > 0.0 && q != 1.0) {
            return Err(AsympError::BadRatio(q));
        }
        match self.rule {
            LambdaRule::Power { lambda_sup } => {
                if !(lambda_sup > 0.0 && lambda_sup.is_finite()) {
                    return Err(AsympError::BadRule(format!(
                        "lambda_sup must be positive and finite, got {lambda_sup}"
                    )));
                }
            }
            LambdaRule::Renorm { c } => {
                if !(c > 1.0 && c.is_finite()) {
                    return Err(AsympError::BadRule(format!(
                        "renormalization factor must exceed 1, got {c}"
                    )));
                }
            }
        }
        let mut prev = 2.0;
        for &p in &self.p_list {
            if !(p > 2.0 && p * q > 2.0 && p > prev && p.is_finite()) {
                return Err(AsympError::BadPList(p));
            }
            prev = p;
        }
        if self.p_list.is_empty() {
            return Err(AsympError::BadPList(f64::NAN));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LimitKind {
    /// Closed-form limits hold with equality.
    Equality,
    /// Only one-sided bounds are available.
    BoundsOnly,
}

/// Closed-form p -> inf predictions for a sweep family on a given domain.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PredictedLimits {
    /// Limit (Equality) or upper bound (BoundsOnly) of `|grad u|_inf`.
    pub grad_sup: f64,
    /// Limit of `|u|_inf` when the family pins it exactly.
    pub u_sup: Option<f64>,
    /// Lower bound of `lim inf |u|_inf`, valid in both kinds.
    pub u_sup_lower: f64,
    /// `u <= envelope_coeff * rho` in the limit.
    pub envelope_coeff: f64,
    pub kind: LimitKind,
}

pub fn predicted_limits(spec: &SweepSpec, domain: &Domain) -> Result<PredictedLimits, AsympError> {
    spec.validate()?;
    let cap = domain.lambda_inf_cap();
    match spec.rule {
        LambdaRule::Power { lambda_sup } => {
            if lambda_sup < cap * (1.0 - 1e-9) {
                return Err(AsympError::LambdaBelowCap { lambda_sup, cap });
            }
            let kappa = (cap / lambda_sup).powf(1.0 / (1.0 - spec.q_ratio));
            if spec.q_ratio < 1.0 {
                Ok(PredictedLimits {
                    grad_sup: kappa,
                    u_sup: Some(kappa / cap),
                    u_sup_lower: kappa / cap,
                    envelope_coeff: kappa,
                    kind: LimitKind::Equality,
                })
            } else {
                Ok(PredictedLimits {
                    grad_sup: kappa,
                    u_sup: None,
                    u_sup_lower: 1.0 / cap,
                    envelope_coeff: kappa,
                    kind: LimitKind::BoundsOnly,
                })
            }
        }
        LambdaRule::Renorm { .. } => Ok(PredictedLimits {
            grad_sup: 1.0,
            u_sup: Some(1.0 / cap),
            u_sup_lower: 1.0 / cap,
            envelope_coeff: 1.0,
            kind: LimitKind::Equality,
        }),
    }
}

/// Measurements from one exponent of the sweep.
#[derive(Clone, Debug, Serialize)]
pub struct PStep {
    pub p: f64,
    pub q: f64,
    pub lambda: f64,
    pub ln_lambda: f64,
    pub u_sup: f64,
    pub grad_sup: f64,
    pub energy: f64,
    pub nehari_residual: f64,
    pub weak_max_rel: f64,
    pub sup_gap: Option<f64>,
    pub cauchy_gap: Option<f64>,
    pub projection_t: f64,
    pub iterations: usize,
    /// Position of the field maximizer.
    pub maximizer: Option<(f64, f64)>,
    /// `rho_max - rho(maximizer)`: zero when the peak sits on an incenter.
    pub rho_gap_at_max: f64,
    /// `max_x (u - envelope_coeff rho)(x)`.
    pub envelope_violation: f64,
    /// `envelope_coeff rho(x*) - u(x*)` at the maximizer x*.
    pub envelope_gap_at_max: f64,
    /// Strict positivity on the half-inradius core.
    pub positive_core: bool,
    pub multi_maximizer: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub spec: SweepSpec,
    pub cap: f64,
    pub predicted: PredictedLimits,
    pub steps: Vec<PStep>,
    /// (p, gate threshold) of exponents refused outright.
    pub skipped: Vec<(f64, f64)>,
    /// Linear-in-1/p Richardson extrapolation from the last two steps.
    pub extrap_u_sup: Option<f64>,
    pub extrap_grad_sup: Option<f64>,
    /// Relative error of the extrapolations against equality-kind targets.
    pub err_u_sup: Option<f64>,
    pub err_grad_sup: Option<f64>,
    /// Disclosure of the limit-estimate method behind `extrap_*`.
    pub extrapolation: &'static str,
    #[serde(skip)]
    pub final_field: Option<ScalarField>,
    /// Fields aligned with `steps`, for rendering; not serialized.
    #[serde(skip)]
    pub step_fields: Vec<ScalarField>,
    pub domain_hash: String,
}

fn richardson(p1: f64, v1: f64, p2: f64, v2: f64) -> f64 {
    // First-order fit in 1/p through the last two points. The sequences
    // here are p-th roots of p-th powers, so their finite-p error is
    // multiplicative, v(p) = L K^(1/p); fitting ln v is exact for that
    // family. Falls back to the additive fit v(p) = L + C/p when a value
    // is not positive.
    if v1 > 0.0 && v2 > 0.0 {
        ((p2 * v2.ln() - p1 * v1.ln()) / (p2 - p1)).exp()
    } else {
        (p2 * v2 - p1 * v1) / (p2 - p1)
    }
}

pub fn run_sweep(
    spec: &SweepSpec,
    domain: &Arc<Domain>,
    cfg: &SolverConfig,
    cache: &mut EigenCache,
) -> Result<ConvergenceReport, AsympError> {
    spec.validate()?;
    let cap = domain.lambda_inf_cap();
    let predicted = predicted_limits(spec, domain)?;
    let rho_max = domain.rho_max();
    let mut steps: Vec<PStep> = Vec::new();
    let mut skipped = Vec::new();
    let mut final_field = None;
    let mut step_fields = Vec::new();

    for &p in &spec.p_list {
        let q = spec.q_ratio * p;
        let ln_lambda = match spec.rule {
            LambdaRule::Power { lambda_sup } => p * lambda_sup.ln(),
            LambdaRule::Renorm { c } => c.ln() + domain.quad_area.ln() + p * cap.ln(),
        };
        let lambda = ln_lambda.exp();
        let params = ProblemParams::new(p, q, LoadExponent::Sup, lambda)?;
        match existence_gate(&params, cache)? {
            GateDecision::Refuse { threshold, .. } => {
                skipped.push((p, threshold));
                continue;
            }
            GateDecision::Proceed { .. } => {}
        }
        let rep = continue_in_r(&params, domain, cfg, cache, Some(&spec.r_schedule))?;

        let coeff = predicted.envelope_coeff;
        let mut violation = f64::NEG_INFINITY;
        for idx in 0..domain.num_nodes() {
            violation = violation.max(rep.field.get(idx) - coeff * domain.rho[idx]);
        }
        let (maximizer, rho_gap_at_max, envelope_gap_at_max) = match rep.maxset.primary {
            Some(star) => {
                let star = star as usize;
                (
                    rep.maxset.primary_pos,
                    rho_max - domain.rho[star],
                    coeff * domain.rho[star] - rep.field.get(star),
                )
            }
            None => (None, f64::NAN, f64::NAN),
        };
        let mut positive_core = true;
        for &i in &domain.interior_nodes {
            let i = i as usize;
            if domain.rho[i] >= 0.5 * rho_max && rep.field.get(i) <= 0.0 {
                positive_core = false;
                break;
            }
        }
        steps.push(PStep {
            p,
            q,
            lambda,
            ln_lambda,
            u_sup: rep.norms.load,
            grad_sup: rep.norms.grad_inf,
            energy: rep.energy.total,
            nehari_residual: rep.nehari_residual,
            weak_max_rel: rep.weak.max_rel,
            sup_gap: rep.sup_gap,
            cauchy_gap: rep.cauchy_gap,
            projection_t: rep.projection_t,
            iterations: rep.iterations,
            maximizer,
            rho_gap_at_max,
            envelope_violation: violation,
            envelope_gap_at_max,
            positive_core,
            multi_maximizer: rep.flags.multi_maximizer,
        });
        step_fields.push(rep.field.clone());
        final_field = Some(rep.field);
    }

    let (extrap_u_sup, extrap_grad_sup) = if steps.len() >= 2 {
        let a = &steps[steps.len() - 2];
        let b = &steps[steps.len() - 1];
        (
            Some(richardson(a.p, a.u_sup, b.p, b.u_sup)),
            Some(richardson(a.p, a.grad_sup, b.p, b.grad_sup)),
        )
    } else {
        (None, None)
    };
    let err_u_sup = match (predicted.u_sup, extrap_u_sup) {
        (Some(target), Some(got)) => Some((got - target).abs() / target),
        _ => None,
    };
    let err_grad_sup = match (predicted.kind, extrap_grad_sup) {
        (LimitKind::Equality, Some(got)) => {
            Some((got - predicted.grad_sup).abs() / predicted.grad_sup)
        }
        _ => None,
    };

    Ok(ConvergenceReport {
        spec: spec.clone(),
        cap,
        predicted,
        steps,
        skipped,
        extrap_u_sup,
        extrap_grad_sup,
        err_u_sup,
        err_grad_sup,
        extrapolation: "first-order in 1/p on ln v",
        final_field,
        step_fields,
        domain_hash: format!("{:016x}", domain.hash()),
    })
}

/// Cross-checks between a sweep and the geometry, and optionally against a
/// reference sweep on the same domain (the renormalized family), which the
/// final profile must match after rescaling by the envelope coefficients.
#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyReport {
    /// Final maximizer sits within the incenter plateau: rho(x*) within 2h
    /// of max rho.
    pub incenter_ok: bool,
    pub rho_gap_at_max: f64,
    /// max |u - factor u_ref| / |u|_inf over nodes, when comparable.
    pub proportionality_gap: Option<f64>,
    /// True when a non-unique incenter forced envelope-only checking.
    pub downgraded: bool,
}

pub fn check_mutual_consistency(
    report: &ConvergenceReport,
    domain: &Domain,
    reference: Option<&ConvergenceReport>,
) -> ConsistencyReport {
    let last = report.steps.last();
    let rho_gap = last.map(|s| s.rho_gap_at_max).unwrap_or(f64::NAN);
    let incenter_ok = rho_gap.is_finite() && rho_gap <= 2.0 * domain.h;
    let unique = domain.rho_maximizers().unique;
    let mut downgraded = false;
    let proportionality_gap = match (reference, &report.final_field) {
        (Some(r), Some(u)) => {
            if !unique {
                downgraded = true;
                None
            } else if let Some(v) = &r.final_field {
                let factor = report.predicted.envelope_coeff / r.predicted.envelope_coeff;
                let peak = u.max_abs();
                if peak == 0.0 {
                    None
                } else {
                    let mut worst = 0.0f64;
                    for idx in 0..domain.num_nodes() {
                        worst = worst.max((u.get(idx) - factor * v.get(idx)).abs());
                    }
                    Some(worst / peak)
                }
            } else {
                None
            }
        }
        _ => None,
    };
    ConsistencyReport { incenter_ok, rho_gap_at_max: rho_gap, proportionality_gap, downgraded }
}
