//! Property suite for the constraint-set projection: residual after
//! projecting, idempotence, the scaling law t(s v) = t(v)/s, and the energy
//! identity on the set.

mod common;

use std::sync::{Arc, OnceLock};

use common::{bump_field, Bump};
use pqlab::{
    energy, grad_norm, lp_norm, nehari_parts, nehari_project, nehari_residual, sup_norm, Domain,
    LoadExponent, ProblemParams,
};
use proptest::prelude::*;

fn fixture() -> &'static Arc<Domain> {
    static D: OnceLock<Arc<Domain>> = OnceLock::new();
    D.get_or_init(|| common::disk(1.0 / 12.0))
}

fn bumps() -> impl Strategy<Value = Vec<Bump>> {
    prop::collection::vec(
        (
            -0.55..0.55f64,
            -0.55..0.55f64,
            0.15..0.5f64,
            prop_oneof![0.2..1.0f64, -1.0..-0.2f64],
        )
            .prop_map(|(cx, cy, width, amp)| Bump { cx, cy, width, amp }),
        1..4,
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]
    #[test]
    fn projection_laws(
        bs in bumps(),
        q in 2.05..15.5f64,
        gap in 0.3..8.0f64,
        mult in 1.5..50.0f64,
        ln10_s in -3.0..3.0f64,
        r_pick in 0usize..4,
    ) {
        let p = (q + gap).min(16.0);
        prop_assume!(p - q >= 0.25);
        let d = fixture();
        let Some(v) = bump_field(d, &bs) else { return Ok(()); };
        let r = [
            LoadExponent::Finite(2.0),
            LoadExponent::Finite(2.5),
            LoadExponent::Finite(4.0),
            LoadExponent::Sup,
        ][r_pick];

        // Force feasibility: lambda ||v||_r^p = mult * ||grad v||_p^p.
        let load_ln = match r {
            LoadExponent::Finite(rr) => lp_norm(&v, rr).ln,
            LoadExponent::Sup => sup_norm(&v).max_value.ln(),
        };
        let lambda = (mult.ln() + p * (grad_norm(&v, p).ln - load_ln)).exp();
        prop_assume!(lambda.is_finite() && lambda > 0.0);
        let params = ProblemParams::new(p, q, r, lambda).unwrap();

        let (t, w) = nehari_project(&v, &params).unwrap();
        prop_assert!(t > 0.0 && t.is_finite());

        let res = nehari_residual(&w, &params).unwrap();
        prop_assert!(res <= 1e-10, "projection residual {res}");

        let (t2, _) = nehari_project(&w, &params).unwrap();
        prop_assert!((t2 - 1.0).abs() <= 1e-12, "idempotence t2 {t2}");

        let s = (ln10_s * std::f64::consts::LN_10).exp();
        let (ts, _) = nehari_project(&v.scaled(s), &params).unwrap();
        prop_assert!(
            (ts * s / t - 1.0).abs() <= 1e-12,
            "scaling law: t {t}, t(s v) {ts}, s {s}"
        );

        let parts = nehari_parts(&w, &params);
        let identity = (1.0 / params.q - 1.0 / params.p) * parts.b_pow.ln.exp();
        let e = energy(&w, &params).total;
        prop_assert!(
            (e - identity).abs() <= 1e-8 * identity.abs().max(1e-300),
            "energy {e} vs identity {identity}"
        );
    }
}
