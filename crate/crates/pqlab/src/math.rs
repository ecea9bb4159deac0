//! Stabilized floating-point helpers shared by the norm and energy kernels.
//!
//! Power sums with exponents up to 128 overflow or lose all precision when
//! evaluated naively. Every quadrature here factors out the largest term,
//! sums ratios `<= 1`, and carries the natural logarithm of the result
//! alongside the linear value so downstream formulas (Nehari scale factor,
//! residual ratios) can stay in log space.

/// A nonnegative quantity represented by its natural logarithm.
/// `ln = -inf` encodes zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogVal {
    pub ln: f64,
}

impl LogVal {
    pub const ZERO: LogVal = LogVal { ln: f64::NEG_INFINITY };

    pub fn from_value(v: f64) -> LogVal {
        debug_assert!(v >= 0.0, "LogVal encodes nonnegative quantities");
        LogVal { ln: v.ln() }
    }

    pub fn value(self) -> f64 {
        self.ln.exp()
    }

    pub fn is_zero(self) -> bool {
        self.ln == f64::NEG_INFINITY
    }

    /// self^e in log space.
    pub fn powf(self, e: f64) -> LogVal {
        LogVal { ln: self.ln * e }
    }

    pub fn mul(self, other: LogVal) -> LogVal {
        LogVal { ln: self.ln + other.ln }
    }

    pub fn div(self, other: LogVal) -> LogVal {
        LogVal { ln: self.ln - other.ln }
    }

    pub fn scale(self, c: f64) -> LogVal {
        debug_assert!(c > 0.0);
        LogVal { ln: self.ln + c.ln() }
    }
}

/// log(exp(a) + exp(b)) without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// log(exp(a) - exp(b)); requires a > b.
pub fn log_sub_exp(a: f64, b: f64) -> Option<f64> {
    if b == f64::NEG_INFINITY {
        return Some(a);
    }
    if a <= b {
        return None;
    }
    Some(a + (-((b - a).exp())).ln_1p())
}

/// x^e with a fast path for small integer exponents.
#[inline]
pub fn powe(x: f64, e: f64) -> f64 {
    let ei = e as i32;
    if ei as f64 == e && (-256..=256).contains(&ei) {
        x.powi(ei)
    } else {
        x.powf(e)
    }
}

/// Sum of a slice in a fixed midpoint-split pairwise tree.
///
/// The reduction order depends only on the slice layout, never on thread
/// count or chunk scheduling, so repeated runs are bit-identical; the tree
/// also keeps rounding error O(log n) instead of O(n).
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Stabilized power sum: given terms `w_k * x_k^m` described by weights and
/// magnitudes, returns log(sum w_k x_k^m) computed as
/// `m*log(xmax) + log(sum w_k (x_k/xmax)^m)`.
///
/// `terms` receives a scratch buffer for the ratio terms so hot loops can
/// reuse allocations.
pub fn log_power_sum(
    magnitudes: impl Iterator<Item = (f64, f64)>,
    m: f64,
    scratch: &mut Vec<f64>,
) -> LogVal {
    scratch.clear();
    let mut xmax = 0.0f64;
    for (w, x) in magnitudes {
        debug_assert!(w >= 0.0 && x >= 0.0);
        scratch.push(w);
        scratch.push(x);
        if x > xmax {
            xmax = x;
        }
    }
    if xmax == 0.0 {
        return LogVal::ZERO;
    }
    let inv = 1.0 / xmax;
    // Rewrite the scratch in place: w * (x/xmax)^m per term.
    let n = scratch.len() / 2;
    for k in 0..n {
        let w = scratch[2 * k];
        let x = scratch[2 * k + 1];
        scratch[k] = w * powe(x * inv, m);
    }
    scratch.truncate(n);
    let s = pairwise_sum(scratch);
    LogVal { ln: m * xmax.ln() + s.ln() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_add_sub_roundtrip() {
        let a = 3.0f64.ln();
        let b = 2.0f64.ln();
        assert!((log_add_exp(a, b).exp() - 5.0).abs() < 1e-12);
        assert!((log_sub_exp(a, b).unwrap().exp() - 1.0).abs() < 1e-12);
        assert!(log_sub_exp(b, a).is_none());
        assert_eq!(log_add_exp(f64::NEG_INFINITY, b), b);
    }

    #[test]
    fn pairwise_matches_exact_sum() {
        // 1 + 1/2 + ... + 1/n against the analytically accumulated value.
        let xs: Vec<f64> = (1..=10_000).map(|k| 1.0 / k as f64).collect();
        let mut kahan = 0.0f64;
        let mut c = 0.0f64;
        for &x in &xs {
            let y = x - c;
            let t = kahan + y;
            c = (t - kahan) - y;
            kahan = t;
        }
        assert!((pairwise_sum(&xs) - kahan).abs() < 1e-12);
    }

    #[test]
    fn pairwise_is_layout_deterministic() {
        let xs: Vec<f64> = (0..4097).map(|k| ((k * 2654435761u64 as usize) % 1000) as f64 * 1e-3).collect();
        let a = pairwise_sum(&xs);
        let b = pairwise_sum(&xs);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn power_sum_survives_extreme_exponents() {
        // Two terms, weights 1: x = {1e-8, 2e-8}, m = 128.
        // Exact: (2e-8)^128 * (1 + 0.5^128); log is -128*ln(5e7)... via direct algebra.
        let mut scratch = Vec::new();
        let s = log_power_sum([(1.0, 1e-8), (1.0, 2e-8)].into_iter(), 128.0, &mut scratch);
        let expect = 128.0 * (2e-8f64).ln() + (1.0 + 0.5f64.powi(128)).ln();
        assert!((s.ln - expect).abs() < 1e-10);

        let z = log_power_sum(std::iter::empty(), 8.0, &mut scratch);
        assert!(z.is_zero());
    }

    #[test]
    fn powe_integer_fast_path_matches_powf() {
        for &(x, e) in &[(1.7f64, 3.0f64), (0.3, 128.0), (2.0, 64.0), (1.1, 2.5)] {
            let got = powe(x, e);
            let want = x.powf(e);
            assert!((got / want - 1.0).abs() < 1e-14, "{x}^{e}: {got} vs {want}");
        }
    }
}
