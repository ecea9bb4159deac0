//! Batch front door: five subcommands over the laboratory crate, flat
//! key=value configs overridable by flags, deterministic JSON/CSV/SVG/field
//! artifacts, exit codes 0 (ok), 1 (config), 2 (non-convergence), 3 (gate
//! refusal).

mod config;
mod emit;
mod svg;

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use pqlab::{
    build_domain, continue_in_r, run_sweep, solve_least_energy, AsympError, Domain, EigenCache,
    EigenError, GeometryError, InfHarmConfig, InfHarmonicProblem, LambdaRule, LoadExponent,
    ProblemParams, SolveError, SolverConfig, SweepSpec,
};
use serde_json::json;

use config::{parse_shape, ConfigError, RunConfig};
use emit::{fmt17, trace_rows, Emitter};

#[derive(Parser)]
#[command(
    name = "pqlab",
    about = "Least-energy states of the two-exponent Dirichlet problem on grid domains",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Minimize the Rayleigh quotient |grad u|_m^m / |u|_r^m
    Eigen(EigenArgs),
    /// Least-energy solve at a fixed finite load exponent
    Solve(SolveArgs),
    /// Load-exponent continuation toward the sup-norm problem
    LimitR(LimitArgs),
    /// Exponent sweep p -> inf with q = Q p, against closed-form limits
    SweepP(SweepArgs),
    /// Punctured-domain infinity-harmonic profile
    Infharm(InfArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Flat key=value config file; command-line flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// Domain: disk:R[@cx,cy] | square:S | rect:WxH | lshape:S | polygon:x,y;x,y;...
    #[arg(long)]
    domain: Option<String>,
    /// Grid spacing
    #[arg(long)]
    h: Option<f64>,
    /// Output directory (default pqlab-out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of {json,csv,svg,field}; default all
    #[arg(long)]
    formats: Option<String>,
    /// Restart-noise seed
    #[arg(long)]
    seed: Option<u64>,
    /// Number of descent restarts
    #[arg(long)]
    restarts: Option<u32>,
    /// Iteration budget per solve
    #[arg(long)]
    max_iters: Option<u64>,
}

#[derive(Args)]
struct EigenArgs {
    #[command(flatten)]
    common: Common,
    /// Gradient exponent m > 2 (m = 2 allowed for the Laplacian anchor)
    #[arg(long)]
    m: Option<f64>,
    /// Load exponent r for a single minimization
    #[arg(long)]
    r: Option<f64>,
    /// Sweep r over the ladder and report the sup-norm estimate instead
    #[arg(long, default_value_t = false)]
    r_sweep: bool,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    /// Finite load exponent (default 2)
    #[arg(long)]
    r: Option<f64>,
    /// Raw load coefficient
    #[arg(long)]
    lambda: Option<f64>,
    /// Load coefficient as a multiple of the computed threshold lambda_r(p)
    #[arg(long)]
    lambda_mult: Option<f64>,
}

#[derive(Args)]
struct LimitArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Multiple of the sup-norm threshold estimate for exponent p
    #[arg(long)]
    lambda_mult: Option<f64>,
    /// Comma-separated increasing load exponents
    #[arg(long)]
    r_schedule: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Limit ratio q/p, in (0,1) or (1,inf)
    #[arg(long = "Q")]
    q_ratio: Option<f64>,
    /// Power rule lambda_p = Lambda^p
    #[arg(long = "Lambda")]
    lambda_sup: Option<f64>,
    /// Renormalized rule lambda_p = c |Omega| Lambda_inf^p with this c
    #[arg(long = "Lambda-inf", alias = "renorm-c")]
    renorm_c: Option<f64>,
    /// Comma-separated increasing exponent list
    #[arg(long)]
    p_list: Option<String>,
    /// Inner continuation schedule
    #[arg(long)]
    r_schedule: Option<String>,
}

#[derive(Args)]
struct InfArgs {
    #[command(flatten)]
    common: Common,
    /// Pinned peak value at the puncture
    #[arg(long)]
    peak: Option<f64>,
    /// `auto` (distance-function maximizer) or `x,y`
    #[arg(long)]
    puncture: Option<String>,
}

enum CliError {
    Config(String),
    NonConvergence(String),
    GateRefused(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::NonConvergence(_) => 2,
            CliError::GateRefused(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::NonConvergence(m) | CliError::GateRefused(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> CliError {
        CliError::Config(e.0)
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> CliError {
        CliError::Config(e.to_string())
    }
}

impl From<EigenError> for CliError {
    fn from(e: EigenError) -> CliError {
        match e {
            EigenError::NonConvergence { .. } => CliError::NonConvergence(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> CliError {
        match e {
            SolveError::GateRefused { .. } | SolveError::AllRungsRefused => {
                CliError::GateRefused(e.to_string())
            }
            SolveError::Param(_) => CliError::Config(e.to_string()),
            SolveError::Eigen(inner) => CliError::from(inner),
            other => CliError::NonConvergence(other.to_string()),
        }
    }
}

impl From<AsympError> for CliError {
    fn from(e: AsympError) -> CliError {
        match e {
            AsympError::Eigen(inner) => CliError::from(inner),
            AsympError::Solve(inner) => CliError::from(inner),
            other => CliError::Config(other.to_string()),
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // Help/version requests are not errors.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Eigen(a) => cmd_eigen(a),
        Cmd::Solve(a) => cmd_solve(a),
        Cmd::LimitR(a) => cmd_limit_r(a),
        Cmd::SweepP(a) => cmd_sweep_p(a),
        Cmd::Infharm(a) => cmd_infharm(a),
    }
}

/// File entries first, then flags on top, then fixed keys.
fn base_config(command: &str, common: &Common) -> Result<RunConfig, CliError> {
    let mut rc = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    rc.set("command", command);
    rc.set_opt("domain", &common.domain);
    rc.set_opt("h", &common.h);
    rc.set_opt("out", &common.out.as_ref().map(|p| p.display().to_string()));
    rc.set_opt("formats", &common.formats);
    rc.set_opt("seed", &common.seed);
    rc.set_opt("restarts", &common.restarts);
    rc.set_opt("max_iters", &common.max_iters);
    Ok(rc)
}

fn resolve_domain(rc: &RunConfig) -> Result<Arc<Domain>, CliError> {
    let shape = parse_shape(rc.require("domain")?)?;
    let h = rc.require_f64("h")?;
    Ok(build_domain(shape, h)?)
}

fn resolve_solver_config(rc: &RunConfig) -> Result<SolverConfig, CliError> {
    let mut cfg = SolverConfig::default();
    if let Some(v) = rc.u64("seed")? {
        cfg.seed = v;
    }
    if let Some(v) = rc.u64("restarts")? {
        cfg.restarts = v as u32;
    }
    if let Some(v) = rc.u64("max_iters")? {
        cfg.max_iters = v as usize;
    }
    if let Some(v) = rc.f64("tol_energy")? {
        cfg.tol_energy = v;
    }
    if let Some(v) = rc.f64("tol_grad")? {
        cfg.tol_grad = v;
    }
    Ok(cfg)
}

fn emitter(rc: &RunConfig) -> Result<Emitter, CliError> {
    let dir = PathBuf::from(rc.get("out").unwrap_or("pqlab-out"));
    let e = Emitter::new(&dir, &rc.hash(), &rc.canonical(), rc.get("formats"))?;
    e.write_run_listing()?;
    Ok(e)
}

/// Raw lambda wins; otherwise the multiplier scales the given threshold.
fn resolve_lambda(rc: &RunConfig, threshold: f64) -> Result<(f64, Option<f64>), CliError> {
    match (rc.f64("lambda")?, rc.f64("lambda_mult")?) {
        (Some(_), Some(_)) => {
            Err(CliError::Config("give either `lambda` or `lambda_mult`, not both".into()))
        }
        (Some(l), None) => Ok((l, None)),
        (None, Some(k)) => Ok((k * threshold, Some(k))),
        (None, None) => Err(CliError::Config("missing `lambda` or `lambda_mult`".into())),
    }
}

fn schedule_from(rc: &RunConfig, key: &str) -> Result<Option<Vec<f64>>, CliError> {
    Ok(rc.f64_list(key)?)
}

fn cmd_eigen(a: EigenArgs) -> Result<(), CliError> {
    let mut rc = base_config("eigen", &a.common)?;
    rc.set_opt("m", &a.m);
    rc.set_opt("r", &a.r);
    if a.r_sweep {
        rc.set("r_sweep", "true");
    }
    let m = rc.require_f64("m")?;
    let sweep = rc.get("r_sweep").is_some_and(|v| v == "true");
    let domain = resolve_domain(&rc)?;
    let cfg = resolve_solver_config(&rc)?;
    let mut cache = EigenCache::new(domain.clone(), cfg);
    let em = emitter(&rc)?;

    if sweep {
        let est = cache.inf_estimate(m)?;
        em.write_json("eigen.json", "eigen", serde_json::to_value(&est).unwrap())?;
        let rows: Vec<Vec<String>> = est
            .trend
            .iter()
            .map(|t| vec![fmt17(t.r), fmt17(t.lambda), fmt17(t.ln_lambda), fmt17(t.lambda_norm)])
            .collect();
        em.write_csv("eigen_trend.csv", &["r", "lambda", "ln_lambda", "lambda_norm"], &rows)?;
        println!(
            "lambda_inf_estimate({m}) = {} (norm root {}) -> {}",
            est.estimate,
            est.norm_root,
            em.path("").display()
        );
    } else {
        let r = rc.f64("r")?.unwrap_or(2.0);
        let res = cache.result(m, r)?.clone();
        em.write_json(
            "eigen.json",
            "eigen",
            json!({
                "m": m,
                "r": r,
                "lambda": res.lambda,
                "ln_lambda": res.ln_lambda,
                "iterations": res.iterations,
                "residual": res.residual,
            }),
        )?;
        em.write_field("eigenfield.bin", &res.eigenfield)?;
        em.write_svg("eigenfield.svg", &res.eigenfield)?;
        println!(
            "lambda_{r}({m}) = {} after {} iterations -> {}",
            res.lambda,
            res.iterations,
            em.path("").display()
        );
    }
    Ok(())
}

fn cmd_solve(a: SolveArgs) -> Result<(), CliError> {
    let mut rc = base_config("solve", &a.common)?;
    rc.set_opt("p", &a.p);
    rc.set_opt("q", &a.q);
    rc.set_opt("r", &a.r);
    rc.set_opt("lambda", &a.lambda);
    rc.set_opt("lambda_mult", &a.lambda_mult);

    let p = rc.require_f64("p")?;
    let q = rc.require_f64("q")?;
    let r = rc.f64("r")?.unwrap_or(2.0);
    let domain = resolve_domain(&rc)?;
    let cfg = resolve_solver_config(&rc)?;
    let mut cache = EigenCache::new(domain.clone(), cfg.clone());

    let threshold = cache.lambda(p, r)?;
    let (lambda, mult) = resolve_lambda(&rc, threshold)?;
    let params = ProblemParams::new(p, q, LoadExponent::Finite(r), lambda)
        .map_err(|e| CliError::Config(e.to_string()))?;

    let rep = solve_least_energy(&params, &domain, &cfg, &mut cache, None)?;

    let em = emitter(&rc)?;
    em.write_json(
        "solve.json",
        "solve",
        json!({
            "threshold": threshold,
            "lambda_mult": mult,
            "solve": serde_json::to_value(&rep).unwrap(),
        }),
    )?;
    em.write_csv("trace.csv", &["iter", "energy", "nehari_residual", "step"], &trace_rows(&rep.trace))?;
    em.write_field("u.bin", &rep.field)?;
    em.write_svg("u.svg", &rep.field)?;
    println!(
        "energy {} nehari_residual {} weak {} iterations {} -> {}",
        rep.energy.total,
        rep.nehari_residual,
        rep.weak.max_rel,
        rep.iterations,
        em.path("").display()
    );
    Ok(())
}

fn cmd_limit_r(a: LimitArgs) -> Result<(), CliError> {
    let mut rc = base_config("limit-r", &a.common)?;
    rc.set_opt("p", &a.p);
    rc.set_opt("q", &a.q);
    rc.set_opt("lambda", &a.lambda);
    rc.set_opt("lambda_mult", &a.lambda_mult);
    rc.set_opt("r_schedule", &a.r_schedule);

    let p = rc.require_f64("p")?;
    let q = rc.require_f64("q")?;
    let domain = resolve_domain(&rc)?;
    let cfg = resolve_solver_config(&rc)?;
    let mut cache = EigenCache::new(domain.clone(), cfg.clone());

    let threshold = cache.inf_estimate(p)?.estimate;
    let (lambda, mult) = resolve_lambda(&rc, threshold)?;
    let params = ProblemParams::new(p, q, LoadExponent::Sup, lambda)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let schedule = schedule_from(&rc, "r_schedule")?;

    let rep = continue_in_r(&params, &domain, &cfg, &mut cache, schedule.as_deref())?;

    let em = emitter(&rc)?;
    em.write_json(
        "limit_r.json",
        "limit-r",
        json!({
            "threshold": threshold,
            "lambda_mult": mult,
            "solve": serde_json::to_value(&rep).unwrap(),
        }),
    )?;
    em.write_csv("trace.csv", &["iter", "energy", "nehari_residual", "step"], &trace_rows(&rep.trace))?;
    let rows: Vec<Vec<String>> = rep
        .r_steps
        .iter()
        .map(|s| {
            vec![
                fmt17(s.r),
                fmt17(s.threshold),
                s.skipped.to_string(),
                s.energy.map(fmt17).unwrap_or_default(),
                s.iterations.to_string(),
                s.nehari_residual.map(fmt17).unwrap_or_default(),
            ]
        })
        .collect();
    em.write_csv(
        "r_steps.csv",
        &["r", "threshold", "skipped", "energy", "iterations", "nehari_residual"],
        &rows,
    )?;
    em.write_field("u.bin", &rep.field)?;
    em.write_svg("u.svg", &rep.field)?;
    println!(
        "energy {} sup_gap {:?} cauchy_gap {:?} projection_t {} -> {}",
        rep.energy.total,
        rep.sup_gap,
        rep.cauchy_gap,
        rep.projection_t,
        em.path("").display()
    );
    Ok(())
}

fn cmd_sweep_p(a: SweepArgs) -> Result<(), CliError> {
    let mut rc = base_config("sweep-p", &a.common)?;
    rc.set_opt("Q", &a.q_ratio);
    rc.set_opt("Lambda", &a.lambda_sup);
    rc.set_opt("renorm_c", &a.renorm_c);
    rc.set_opt("p_list", &a.p_list);
    rc.set_opt("r_schedule", &a.r_schedule);

    let q_ratio = rc.require_f64("Q")?;
    let rule = match (rc.f64("Lambda")?, rc.f64("renorm_c")?) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config("give either `Lambda` or `renorm_c`, not both".into()))
        }
        (Some(l), None) => LambdaRule::Power { lambda_sup: l },
        (None, Some(c)) => LambdaRule::Renorm { c },
        (None, None) => return Err(CliError::Config("missing `Lambda` or `renorm_c`".into())),
    };
    let domain = resolve_domain(&rc)?;
    let cfg = resolve_solver_config(&rc)?;
    let mut cache = EigenCache::new(domain.clone(), cfg.clone());

    let mut spec = SweepSpec::new(q_ratio, rule)?;
    if let Some(p_list) = rc.f64_list("p_list")? {
        spec = spec.with_p_list(p_list)?;
    }
    if let Some(sched) = rc.f64_list("r_schedule")? {
        spec = spec.with_r_schedule(sched);
    }

    let rep = run_sweep(&spec, &domain, &cfg, &mut cache)?;

    let em = emitter(&rc)?;
    em.write_json("sweep.json", "sweep-p", serde_json::to_value(&rep).unwrap())?;
    let rows: Vec<Vec<String>> = rep
        .steps
        .iter()
        .map(|s| {
            vec![
                fmt17(s.p),
                fmt17(s.q),
                fmt17((s.ln_lambda / s.p).exp()),
                fmt17(s.u_sup),
                fmt17(s.grad_sup),
                s.maximizer.map(|(x, _)| fmt17(x)).unwrap_or_default(),
                s.maximizer.map(|(_, y)| fmt17(y)).unwrap_or_default(),
                fmt17(s.envelope_violation),
                fmt17(s.nehari_residual),
                fmt17(s.weak_max_rel),
                s.sup_gap.map(fmt17).unwrap_or_default(),
                s.cauchy_gap.map(fmt17).unwrap_or_default(),
                s.iterations.to_string(),
            ]
        })
        .collect();
    em.write_csv(
        "sweep.csv",
        &[
            "p",
            "q",
            "lambda_root",
            "u_sup",
            "grad_sup",
            "max_x",
            "max_y",
            "envelope_max",
            "nehari_residual",
            "weak_max_rel",
            "sup_gap",
            "cauchy_gap",
            "iterations",
        ],
        &rows,
    )?;
    for (i, f) in rep.step_fields.iter().enumerate() {
        em.write_svg(&format!("u_p{}.svg", rep.steps[i].p), f)?;
    }
    if let Some(f) = &rep.final_field {
        em.write_field("u_final.bin", f)?;
    }
    println!(
        "extrapolated u_sup {:?} grad_sup {:?} (predicted {:?} / {:?}) -> {}",
        rep.extrap_u_sup,
        rep.extrap_grad_sup,
        rep.predicted.u_sup,
        rep.predicted.grad_sup,
        em.path("").display()
    );
    Ok(())
}

fn cmd_infharm(a: InfArgs) -> Result<(), CliError> {
    let mut rc = base_config("infharm", &a.common)?;
    rc.set_opt("peak", &a.peak);
    rc.set_opt("puncture", &a.puncture);

    let domain = resolve_domain(&rc)?;
    let peak = rc.f64("peak")?.unwrap_or(1.0);
    let puncture_pt = match rc.get("puncture").unwrap_or("auto") {
        "auto" => {
            let set = domain.rho_maximizers();
            domain.node_pos(set.primary as usize)
        }
        xy => {
            let Some((x, y)) = xy.split_once(',') else {
                return Err(CliError::Config(format!("bad puncture `{xy}`: expected auto or x,y")));
            };
            let px: f64 =
                x.trim().parse().map_err(|_| CliError::Config(format!("bad puncture x `{x}`")))?;
            let py: f64 =
                y.trim().parse().map_err(|_| CliError::Config(format!("bad puncture y `{y}`")))?;
            pqlab::Point::new(px, py)
        }
    };

    let problem = InfHarmonicProblem::new(&domain, puncture_pt, peak)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let inf_cfg = InfHarmConfig::default();
    let sol = pqlab::infharm_solve(&problem, &inf_cfg).map_err(|e| match e {
        pqlab::InfHarmError::NonConvergence { .. } => CliError::NonConvergence(e.to_string()),
        other => CliError::Config(other.to_string()),
    })?;
    let pin = domain.node_pos(problem.puncture as usize);
    let defect_pin = pqlab::infharm_defect(&sol.field, |i| i as u32 == problem.puncture);
    let near = 2.0 * domain.h + 1e-12;
    let defect_far =
        pqlab::infharm_defect(&sol.field, |i| domain.node_pos(i).dist(pin) <= near);

    let em = emitter(&rc)?;
    em.write_json(
        "infharm.json",
        "infharm",
        json!({
            "peak": peak,
            "puncture_node": problem.puncture,
            "puncture_pos": [pin.x, pin.y],
            "sweeps": sol.sweeps,
            "last_change": sol.last_change,
            "defect_off_puncture": defect_pin,
            "defect_off_2h": defect_far,
        }),
    )?;
    em.write_field("u.bin", &sol.field)?;
    em.write_svg("u.svg", &sol.field)?;
    println!(
        "sweeps {} last_change {} defect {} -> {}",
        sol.sweeps,
        sol.last_change,
        defect_far,
        em.path("").display()
    );
    Ok(())
}
