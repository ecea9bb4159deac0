//! Numerical laboratory for least-energy states of the two-exponent
//! Dirichlet problem
//!
//! ```text
//! -div[(|grad u|^(p-2) + |grad u|^(q-2)) grad u] = lambda |u|_r^(p-r) |u|^(r-2) u
//! ```
//!
//! on grid-sampled planar domains, including the sup-norm load limit
//! (r -> inf), the large-exponent limit (p -> inf with q/p fixed), and the
//! infinity-harmonic machinery those limits collapse onto.
//!
//! Layout: `geometry` builds grid domains and distance fields; `fields`
//! carries nodal data, gradients and norms; `functionals` the energy, its
//! gradient and the Nehari/weak residuals; `eigen` the Rayleigh quotients
//! gating existence; `solver` the least-energy descent and load-exponent
//! continuation; `asymptotics` the exponent sweeps against closed-form
//! limits; `infinity` the slope-midrange operator; `io` field persistence.
//!
//! All reductions are pairwise-tree sums and the extreme powers run through
//! log-space accumulators, so results are bit-reproducible across runs at
//! every exponent the laboratory accepts.

pub mod asymptotics;
pub mod eigen;
pub mod fields;
pub mod functionals;
pub mod geometry;
pub mod infinity;
pub mod io;
pub mod math;
pub mod solver;

pub use asymptotics::{
    check_mutual_consistency, predicted_limits, run_sweep, AsympError, ConsistencyReport,
    ConvergenceReport, LambdaRule, LimitKind, PStep, PredictedLimits, SweepSpec,
};
pub use eigen::{rayleigh_min, EigenCache, EigenError, EigenResult, InfEstimate, TrendRow};
pub use fields::{
    grad_norm, gradients, lp_norm, sup_norm, CellGradients, FieldError, MaxSet, MaxSetSummary,
    Norm, ScalarField,
};
pub use functionals::{
    assemble_divergence, energy, grad_energy, nehari_parts, nehari_residual, standard_test_set,
    weak_residual, EnergyBreakdown, LoadExponent, NehariParts, ParamError, ProblemParams, Regime,
    WeakResidual,
};
pub use geometry::{build_domain, Domain, GeometryError, Point, Shape};
pub use infinity::{
    cone_beta, cone_field, infharm_defect, infharm_solve, midrange, InfHarmConfig, InfHarmError,
    InfHarmSolution, InfHarmonicProblem,
};
pub use io::{read_field, write_field, write_field_tagged, FieldSidecar, IoError, ARTIFACT_VERSION};
pub use solver::{
    continue_in_r, existence_gate, nehari_project, solve_least_energy, GateDecision, RStep,
    ReportFlags, ReportNorms, RestartSummary, SolveError, SolveReport, SolverConfig, TraceRow,
};
