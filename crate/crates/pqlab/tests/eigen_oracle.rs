//! Cross-checks the Rayleigh minimizer against an independent five-point
//! finite-difference Laplacian driven by inverse power iteration, and both
//! against the closed-form disk value.

mod common;

use pqlab::{EigenCache, SolverConfig};

/// Five-point Dirichlet Laplacian on the unit disk, nodes on a uniform grid
/// over [-1,1]^2, active iff strictly inside the circle.
struct FdDisk {
    n: usize,
    h: f64,
    active: Vec<bool>,
}

impl FdDisk {
    fn new(cells: usize) -> FdDisk {
        let n = cells + 1;
        let h = 2.0 / cells as f64;
        let mut active = vec![false; n * n];
        for iy in 0..n {
            let y = -1.0 + iy as f64 * h;
            for ix in 0..n {
                let x = -1.0 + ix as f64 * h;
                active[iy * n + ix] = x * x + y * y < 1.0 - 1e-12;
            }
        }
        FdDisk { n, h, active }
    }

    /// out = -Laplacian_h(u) with zero Dirichlet data outside the mask.
    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        let ih2 = 1.0 / (self.h * self.h);
        for iy in 1..n - 1 {
            for ix in 1..n - 1 {
                let k = iy * n + ix;
                if !self.active[k] {
                    out[k] = 0.0;
                    continue;
                }
                let c = u[k];
                let sum = u[k - 1] + u[k + 1] + u[k - n] + u[k + n];
                out[k] = (4.0 * c - sum) * ih2;
            }
        }
        for k in 0..n * n {
            if !self.active[k] {
                out[k] = 0.0;
            }
        }
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..a.len() {
            if self.active[k] {
                s += a[k] * b[k];
            }
        }
        s
    }

    /// Unpreconditioned CG for A x = b on the active mask.
    fn cg(&self, b: &[f64], x: &mut [f64], tol: f64, max_iters: usize) {
        let m = self.n * self.n;
        let mut r = vec![0.0; m];
        let mut ap = vec![0.0; m];
        self.apply(x, &mut ap);
        for k in 0..m {
            r[k] = if self.active[k] { b[k] - ap[k] } else { 0.0 };
        }
        let mut p = r.clone();
        let mut rr = self.dot(&r, &r);
        let b_norm = self.dot(b, b).sqrt().max(1e-300);
        for _ in 0..max_iters {
            if rr.sqrt() <= tol * b_norm {
                break;
            }
            self.apply(&p, &mut ap);
            let alpha = rr / self.dot(&p, &ap);
            for k in 0..m {
                if self.active[k] {
                    x[k] += alpha * p[k];
                    r[k] -= alpha * ap[k];
                }
            }
            let rr_new = self.dot(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            for k in 0..m {
                if self.active[k] {
                    p[k] = r[k] + beta * p[k];
                }
            }
        }
    }

    /// Smallest eigenvalue by inverse power iteration.
    fn principal_eigenvalue(&self) -> f64 {
        let m = self.n * self.n;
        let mut v: Vec<f64> = (0..m).map(|k| if self.active[k] { 1.0 } else { 0.0 }).collect();
        let nv = self.dot(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
        let mut lam = f64::INFINITY;
        let mut av = vec![0.0; m];
        for _ in 0..60 {
            let mut x = v.clone();
            self.cg(&v, &mut x, 1e-10, 20_000);
            let nx = self.dot(&x, &x).sqrt();
            x.iter_mut().for_each(|t| *t /= nx);
            self.apply(&x, &mut av);
            let new = self.dot(&x, &av) / self.dot(&x, &x);
            let done = (new - lam).abs() <= 1e-12 * new;
            lam = new;
            v = x;
            if done {
                break;
            }
        }
        lam
    }
}

#[test]
fn fd_oracle_agrees_with_rayleigh_minimizer() {
    let j01_sq = 5.783185962946785;

    // The staircase Dirichlet boundary biases the five-point value by O(h);
    // extrapolating across a halved spacing cancels the first-order term.
    let fd_coarse = FdDisk::new(96).principal_eigenvalue();
    let fd_fine = FdDisk::new(192).principal_eigenvalue();
    let fd = 2.0 * fd_fine - fd_coarse;
    assert!(
        (fd_fine - j01_sq).abs() / j01_sq <= 1e-2,
        "five-point value {fd_fine} vs closed form {j01_sq}"
    );
    assert!(
        (fd - j01_sq).abs() / j01_sq <= 2.5e-3,
        "extrapolated five-point value {fd} vs closed form {j01_sq}"
    );

    let d = common::disk(1.0 / 96.0);
    let cfg = SolverConfig::default();
    let mut cache = EigenCache::new(d.clone(), cfg);
    let lam = cache.lambda(2.0, 2.0).unwrap();
    assert!(
        (lam - j01_sq).abs() / j01_sq <= 5e-3,
        "triangulated value {lam} vs closed form {j01_sq}"
    );
    assert!(
        (lam - fd).abs() / fd <= 1e-2,
        "discretizations disagree: five-point {fd}, triangulated {lam}"
    );
}
