// Scratch timing probe for the heavy paths. Not part of the test suite.

use pqlab::solve_least_energy;
use std::time::Instant;

use pqlab::{
    build_domain, continue_in_r, run_sweep, EigenCache, LambdaRule, LoadExponent, Point,
    ProblemParams, Shape, SolverConfig, SweepSpec,
};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(String::as_str).unwrap_or("eigen");

    match which {
        "eigen" => {
            let t0 = Instant::now();
            let d = build_domain(
                Shape::Disk { center: Point::new(0.0, 0.0), radius: 1.0 },
                1.0 / 128.0,
            )
            .unwrap();
            println!("domain h=1/128 disk: {:?} ({} interior)", t0.elapsed(), d.interior_count());
            let cfg = SolverConfig::default();
            let mut cache = EigenCache::new(d.clone(), cfg);
            let t0 = Instant::now();
            let lam = cache.lambda(2.0, 2.0).unwrap();
            let j01 = 2.404825557695773f64;
            println!(
                "lambda_2(2) disk = {lam:.6} vs {:.6}, rel {:.2e}, {:?}",
                j01 * j01,
                (lam - j01 * j01).abs() / (j01 * j01),
                t0.elapsed()
            );
        }
        "trend" => {
            let h: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1.0 / 48.0);
            let d = build_domain(
                Shape::Disk { center: Point::new(0.0, 0.0), radius: 1.0 },
                h,
            )
            .unwrap();
            let cfg = SolverConfig::default();
            let mut cache = EigenCache::new(d.clone(), cfg);
            for m in [8.0, 16.0, 32.0] {
                let t0 = Instant::now();
                let est = cache.inf_estimate(m).unwrap();
                println!(
                    "m={m}: est {:.6} norm_root {:.6} cap {:.6} gap {:.2e} {:?}",
                    est.estimate,
                    est.norm_root,
                    d.lambda_inf_cap(),
                    est.proxy_gap,
                    t0.elapsed()
                );
            }
        }
        "eigrungs" => {
            let h: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1.0 / 64.0);
            let m: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(16.0);
            let iters: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(20_000);
            let d = build_domain(
                Shape::Disk { center: Point::new(0.0, 0.0), radius: 1.0 },
                h,
            )
            .unwrap();
            let rmax: f64 = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(512.0);
            let mut cfg = SolverConfig::default();
            cfg.max_iters = iters;
            let mut cache = EigenCache::new(d.clone(), cfg.clone());
            for r in [2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0] {
                if r > rmax {
                    break;
                }
                let t0 = Instant::now();
                match cache.result(m, r) {
                    Ok(res) => println!(
                        "m={m} r={r}: lambda {:.6} iters {} res {:.2e} {:?}",
                        res.lambda, res.iterations, res.residual, t0.elapsed()
                    ),
                    Err(e) => {
                        println!("m={m} r={r}: ERR {e} {:?}", t0.elapsed());
                        break;
                    }
                }
            }
        }
        "rungs" => {
            let h: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1.0 / 64.0);
            let d = build_domain(
                Shape::Disk { center: Point::new(0.0, 0.0), radius: 1.0 },
                h,
            )
            .unwrap();
            let cfg = SolverConfig::default();
            let mut cache = EigenCache::new(d.clone(), cfg.clone());
            let lam = cache.lambda(4.0, 2.0).unwrap();
            let lambda = 2.0 * lam;
            let mut prev: Option<pqlab::ScalarField> = None;
            for r in [2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0] {
                let pr =
                    ProblemParams::new(4.0, 3.0, LoadExponent::Finite(r), lambda).unwrap();
                let t0 = Instant::now();
                match solve_least_energy(&pr, &d, &cfg, &mut cache, prev.as_ref()) {
                    Ok(rep) => {
                        println!(
                            "r={r}: E {:.6} res {:.2e} iters {} restarts {:?} {:?}",
                            rep.energy.total,
                            rep.nehari_residual,
                            rep.iterations,
                            rep.restarts
                                .iter()
                                .map(|s| format!(
                                    "{}:{}{}",
                                    s.label,
                                    if s.feasible { "f" } else { "-" },
                                    if s.converged { "c" } else { "-" }
                                ))
                                .collect::<Vec<_>>(),
                            t0.elapsed()
                        );
                        prev = Some(rep.field);
                    }
                    Err(e) => {
                        println!("r={r}: ERROR {e:?} after {:?}", t0.elapsed());
                    }
                }
            }
        }
        "rladder" => {
            let h: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1.0 / 64.0);
            let d = build_domain(
                Shape::Disk { center: Point::new(0.0, 0.0), radius: 1.0 },
                h,
            )
            .unwrap();
            let cfg = SolverConfig::default();
            let mut cache = EigenCache::new(d.clone(), cfg.clone());
            let lam2 = cache.lambda(4.0, 2.0).unwrap();
            let est = cache.inf_estimate(4.0).unwrap().estimate;
            for (label, base) in [("2*lam_2(4)", lam2), ("2*est_inf(4)", est)] {
                let params =
                    ProblemParams::new(4.0, 3.0, LoadExponent::Sup, 2.0 * base).unwrap();
                let t0 = Instant::now();
                let rep = continue_in_r(&params, &d, &cfg, &mut cache, None).unwrap();
                let skipped: Vec<f64> =
                    rep.r_steps.iter().filter(|s| s.skipped).map(|s| s.r).collect();
                println!(
                    "limit-r p=4 q=3 {label}: cauchy {:.3e} sup_gap {:.3e} t {:.4} res {:.2e} iters {} skipped {:?} {:?}",
                    rep.cauchy_gap.unwrap(),
                    rep.sup_gap.unwrap(),
                    rep.projection_t,
                    rep.nehari_residual,
                    rep.iterations,
                    skipped,
                    t0.elapsed()
                );
            }
        }
        "c6probe" => {
            use pqlab::fields::{grad_norm, lp_norm, sup_norm};
            let h: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1.0 / 64.0);
            let d = build_domain(
                Shape::Disk { center: Point::new(0.0, 0.0), radius: 1.0 },
                h,
            )
            .unwrap();
            let cfg = SolverConfig::default();
            let mut cache = EigenCache::new(d.clone(), cfg.clone());
            let lam2 = cache.lambda(4.0, 2.0).unwrap();
            let est = cache.inf_estimate(4.0).unwrap().estimate;
            for (label, base) in [("2*lam_2(4)", lam2), ("2*est_inf(4)", est)] {
                let lambda = 2.0 * base;
                let mut fields: Vec<(f64, pqlab::ScalarField)> = Vec::new();
                for r in [2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0] {
                    let pr =
                        ProblemParams::new(4.0, 3.0, LoadExponent::Finite(r), lambda).unwrap();
                    let init = fields.last().map(|(_, f)| f.clone());
                    match solve_least_energy(&pr, &d, &cfg, &mut cache, init.as_ref()) {
                        Ok(rep) => {
                            let gq = grad_norm(&rep.field, 3.0).value;
                            let lr = lp_norm(&rep.field, r).value;
                            let sup = sup_norm(&rep.field).max_value;
                            let floor = h.powf(2.0 / r);
                            println!(
                                "  {label} r={r}: |grad|_q {gq:.5} |u|_r {lr:.5} sup {sup:.5} ratio {:.5} floor {floor:.5} iters {}",
                                lr / sup,
                                rep.iterations
                            );
                            fields.push((r, rep.field));
                        }
                        Err(e) => println!("  {label} r={r}: refused/err {e:?}"),
                    }
                }
                if fields.len() >= 2 {
                    let (_, ref ulast) = fields[fields.len() - 1];
                    let (_, ref uprev) = fields[fields.len() - 2];
                    let glast = grad_norm(ulast, 3.0).value;
                    let gprev = grad_norm(uprev, 3.0).value;
                    let raw = grad_norm(&ulast.descend(uprev, 1.0), 3.0).value / glast;
                    let shape = {
                        let scaled = uprev.scaled(glast / gprev);
                        grad_norm(&ulast.descend(&scaled, 1.0), 3.0).value / glast
                    };
                    println!(
                        "{label}: raw cauchy {raw:.4e} shape cauchy {shape:.4e} scale ratio {:.4}",
                        glast / gprev
                    );
                }
            }
        }
        "deep" => {
            let h: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1.0 / 64.0);
            let rmax: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(2048.0);
            let d = build_domain(
                Shape::Disk { center: Point::new(0.0, 0.0), radius: 1.0 },
                h,
            )
            .unwrap();
            let cfg = SolverConfig::default();
            let mut cache = EigenCache::new(d.clone(), cfg.clone());
            let mut sched = vec![2.0f64];
            while *sched.last().unwrap() < rmax {
                let next = sched.last().unwrap() * 2.0;
                sched.push(next);
            }
            let p = 32.0f64;
            let lambda = (p * 2.0f64.ln()).exp();
            let params = ProblemParams::new(p, 16.0, LoadExponent::Sup, lambda).unwrap();
            let t0 = Instant::now();
            let rep = continue_in_r(&params, &d, &cfg, &mut cache, Some(&sched)).unwrap();
            let mut viol = f64::NEG_INFINITY;
            for idx in 0..d.num_nodes() {
                viol = viol.max(rep.field.get(idx) - 0.25 * d.rho[idx]);
            }
            println!(
                "deep p=32 rmax={rmax}: u_sup {:.5} grad_sup {:.5} sup_gap {:.4e} t {:.4} envviol {:.4e} iters {} {:?}",
                rep.norms.load,
                rep.norms.grad_inf,
                rep.sup_gap.unwrap(),
                rep.projection_t,
                viol,
                rep.iterations,
                t0.elapsed()
            );
        }
        "renorm" => {
            let h: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1.0 / 64.0);
            let plist: Vec<f64> = args
                .get(3)
                .map(|s| s.split(',').map(|x| x.parse().unwrap()).collect())
                .unwrap_or_else(|| vec![8.0, 16.0, 32.0]);
            let sched: Vec<f64> = args
                .get(4)
                .map(|s| s.split(',').map(|x| x.parse().unwrap()).collect())
                .unwrap_or_else(|| vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 512.0]);
            let d = build_domain(
                Shape::Disk { center: Point::new(0.0, 0.0), radius: 1.0 },
                h,
            )
            .unwrap();
            let cfg = SolverConfig::default();
            let mut cache = EigenCache::new(d.clone(), cfg.clone());
            let spec = SweepSpec::new(0.5, LambdaRule::Renorm { c: 2.0 })
                .unwrap()
                .with_p_list(plist)
                .unwrap()
                .with_r_schedule(sched);
            let t0 = Instant::now();
            let rep = run_sweep(&spec, &d, &cfg, &mut cache).unwrap();
            println!("renorm total {:?} skipped {:?}", t0.elapsed(), rep.skipped);
            for s in &rep.steps {
                println!(
                    "  p={}: u_sup {:.5} grad_sup {:.5} supgap {:?} t {:.3} iters {} envviol {:.2e}",
                    s.p, s.u_sup, s.grad_sup, s.sup_gap, s.projection_t, s.iterations,
                    s.envelope_violation
                );
            }
            println!(
                "  extrap u_sup {:?} grad {:?} predicted {:?} err_u {:?} err_g {:?}",
                rep.extrap_u_sup, rep.extrap_grad_sup, rep.predicted, rep.err_u_sup,
                rep.err_grad_sup
            );
        }
        "sweep" => {
            let h: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1.0 / 64.0);
            let plist: Vec<f64> = args
                .get(3)
                .map(|s| s.split(',').map(|x| x.parse().unwrap()).collect())
                .unwrap_or_else(|| vec![8.0, 16.0, 32.0]);
            let d = build_domain(
                Shape::Disk { center: Point::new(0.0, 0.0), radius: 1.0 },
                h,
            )
            .unwrap();
            let cfg = SolverConfig::default();
            let mut cache = EigenCache::new(d.clone(), cfg.clone());
            let spec = SweepSpec::new(0.5, LambdaRule::Power { lambda_sup: 2.0 })
                .unwrap()
                .with_p_list(plist)
                .unwrap();
            let t0 = Instant::now();
            let rep = run_sweep(&spec, &d, &cfg, &mut cache).unwrap();
            println!("sweep total {:?}", t0.elapsed());
            for s in &rep.steps {
                println!(
                    "  p={}: u_sup {:.5} grad_sup {:.5} supgap {:?} t {:.3} iters {} envviol {:.2e}",
                    s.p, s.u_sup, s.grad_sup, s.sup_gap, s.projection_t, s.iterations,
                    s.envelope_violation
                );
            }
            println!(
                "  extrap u_sup {:?} grad {:?} predicted {:?} err_u {:?} err_g {:?}",
                rep.extrap_u_sup, rep.extrap_grad_sup, rep.predicted, rep.err_u_sup,
                rep.err_grad_sup
            );
        }
        other => eprintln!("unknown probe {other}"),
    }
}
