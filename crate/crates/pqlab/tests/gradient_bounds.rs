//! A priori gradient bounds at sup-load solutions, plus a smoke run of the
//! load-exponent continuation in both exponent orderings.

mod common;

use pqlab::{continue_in_r, grad_norm, EigenCache, LoadExponent, ProblemParams, SolverConfig};

const SLACK: f64 = 1.10;

#[test]
fn gradient_bound_with_q_below_p() {
    let d = common::disk(1.0 / 24.0);
    let cfg = SolverConfig::default();
    let mut cache = EigenCache::new(d.clone(), cfg.clone());
    let (p, q) = (4.0, 3.0);
    let lam_inf = cache.inf_estimate(p).unwrap().estimate;
    let lambda = 2.0 * lam_inf;
    let params = ProblemParams::new(p, q, LoadExponent::Sup, lambda).unwrap();

    let rep = continue_in_r(&params, &d, &cfg, &mut cache, None).unwrap();

    // ||grad u||_q <= |Omega|^{1/q} (lam_inf(p)/(lambda - lam_inf(p)))^{1/(p-q)}.
    let bound = d.quad_area.powf(1.0 / q) * (lam_inf / (lambda - lam_inf)).powf(1.0 / (p - q));
    let got = grad_norm(&rep.field, q).value;
    assert!(got <= bound * SLACK, "gradient norm {got} vs bound {bound}");

    // Continuation bookkeeping: the threshold can sit above lambda at small
    // r (those rungs get skipped), but the tail of the schedule must run.
    let last = rep.r_steps.last().unwrap();
    assert!(!last.skipped, "final rung refused");
    assert_eq!(rep.flags.rung_refused, rep.r_steps.iter().any(|s| s.skipped));
    assert!(rep.cauchy_gap.is_some() && rep.sup_gap.is_some());
    assert!(rep.projection_t > 0.0 && (rep.projection_t - 1.0).abs() < 0.5);
    assert!(rep.nehari_residual <= 1e-10, "final set membership {}", rep.nehari_residual);
    // The point-load weak form sees the finite-r truncation of the proxy
    // field; on this coarse grid with the default schedule that is ~1e-2.
    assert!(rep.weak.max_rel <= 5e-2, "weak residual {}", rep.weak.max_rel);
}

#[test]
fn gradient_bound_with_p_below_q() {
    let d = common::disk(1.0 / 24.0);
    let cfg = SolverConfig::default();
    let mut cache = EigenCache::new(d.clone(), cfg.clone());
    let (p, q) = (3.0, 4.0);
    let lam_inf = cache.inf_estimate(p).unwrap().estimate;
    let lambda = 2.0 * lam_inf;
    let params = ProblemParams::new(p, q, LoadExponent::Sup, lambda).unwrap();

    let rep = continue_in_r(&params, &d, &cfg, &mut cache, None).unwrap();

    // ||grad u||_q <= |Omega|^{1/q} (lambda/lam_inf(p))^{1/(q-p)}.
    let bound = d.quad_area.powf(1.0 / q) * (lambda / lam_inf).powf(1.0 / (q - p));
    let got = grad_norm(&rep.field, q).value;
    assert!(got <= bound * SLACK, "gradient norm {got} vs bound {bound}");

    assert!(rep.energy.total < 0.0, "coercive regime minimum is negative");
    assert!(rep.cauchy_gap.is_some() && rep.sup_gap.is_some());
}
