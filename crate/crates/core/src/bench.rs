//! Experiment corpus, ball minimization and smallest eigenvalues.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{sym_eig, SymMatrix};
use crate::manifold::{Manifold, SphereRetraction};
use crate::objective::{
    builtin_problems, default_lipschitz, find_problem, quadratic_on_ball, quadratic_on_sphere,
    riemannian_grad, riemannian_hess, Objective, Problem, CATALOG_DIVERGENCE_NORM,
};
use crate::optim::{
    run, BacktrackingParams, IterateTrace, Method, NewQNewtonParams, StopCriteria, Termination,
};
use crate::vecops;

/// Caps the worker count of [`run_corpus`].
pub const THREADS_ENV: &str = "MANIFOLD_DESCENT_THREADS";

/// Default fixed learning rate for `r_standard_gd`.
pub const DEFAULT_LR: f64 = 0.001;

/// Restarts allowed beyond the first attempt in [`smallest_eigenvalue`].
pub const EIGEN_RESTARTS: usize = 5;

/// `rgrad_norm` below which a final point counts as critical for flagging.
const CRITICAL_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodName {
    /// Euclidean baselines: ignore the scenario's domain.
    Newton,
    NewQNewton,
    RandomNewton,
    /// Riemannian methods on the scenario's manifold.
    RNewton,
    RNewQNewton,
    RRandomNewton,
    RBacktracking,
    RLocalBacktracking,
    RStandardGd,
}

impl MethodName {
    pub const ALL: [MethodName; 9] = [
        Self::Newton,
        Self::NewQNewton,
        Self::RandomNewton,
        Self::RNewton,
        Self::RNewQNewton,
        Self::RRandomNewton,
        Self::RBacktracking,
        Self::RLocalBacktracking,
        Self::RStandardGd,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Newton => "newton",
            Self::NewQNewton => "new_q_newton",
            Self::RandomNewton => "random_newton",
            Self::RNewton => "r_newton",
            Self::RNewQNewton => "r_new_q_newton",
            Self::RRandomNewton => "r_random_newton",
            Self::RBacktracking => "r_backtracking",
            Self::RLocalBacktracking => "r_local_backtracking",
            Self::RStandardGd => "r_standard_gd",
        }
    }

    /// Runs in the ambient Euclidean space regardless of the scenario.
    pub fn is_euclidean(&self) -> bool {
        matches!(self, Self::Newton | Self::NewQNewton | Self::RandomNewton)
    }
}

impl fmt::Display for MethodName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

/// Hyperparameters and budget for a scenario run.
#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Iteration budget; `None` uses the scenario's default.
    pub iters: Option<usize>,
    pub seed: u64,
    /// Overrides the retraction of sphere scenarios.
    pub retraction: Option<SphereRetraction>,
    pub backtracking: BacktrackingParams,
    pub new_q_newton: NewQNewtonParams,
    pub lr: f64,
    pub grad_tol: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            iters: None,
            seed: 0,
            retraction: None,
            backtracking: BacktrackingParams::default(),
            new_q_newton: NewQNewtonParams::default(),
            lr: DEFAULT_LR,
            grad_tol: StopCriteria::default().grad_tol,
        }
    }
}

impl RunOptions {
    pub fn with_iters(iters: usize, seed: u64) -> Self {
        Self {
            iters: Some(iters),
            seed,
            ..Default::default()
        }
    }

    pub fn method(&self, name: MethodName) -> Method {
        match name {
            MethodName::Newton | MethodName::RNewton => Method::Newton,
            MethodName::RandomNewton | MethodName::RRandomNewton => Method::RandomNewton,
            MethodName::NewQNewton | MethodName::RNewQNewton => {
                Method::NewQNewton(self.new_q_newton.clone())
            }
            MethodName::RBacktracking => Method::Backtracking(self.backtracking),
            MethodName::RLocalBacktracking => Method::LocalBacktracking(self.backtracking),
            MethodName::RStandardGd => Method::StandardGd { lr: self.lr },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// Some step was shortened to fit the retraction ball.
    Clamped,
    /// A Euclidean baseline produced an iterate outside the scenario's domain.
    LeftDomainWould,
    /// The run ended at a critical point whose Hessian is negative definite.
    ConvergedToMaximum,
}

/// One (scenario, method) outcome.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub scenario_id: String,
    pub method: String,
    pub final_point: Vec<f64>,
    pub final_value: f64,
    pub steps: usize,
    pub termination: Termination,
    pub flags: BTreeSet<Flag>,
}

impl ScenarioResult {
    pub fn has_flag(&self, flag: Flag) -> bool {
        self.flags.contains(&flag)
    }
}

/// A finished run with everything needed to audit it.
#[derive(Clone, Debug)]
pub struct ScenarioRun {
    pub result: ScenarioResult,
    pub trace: IterateTrace,
    /// Manifold the method actually iterated on.
    pub manifold: Manifold,
    pub objective: Objective,
    pub method: Method,
}

fn with_retraction(m: Manifold, retraction: Option<SphereRetraction>) -> Manifold {
    match (m, retraction) {
        (Manifold::Sphere { dim, .. }, Some(r)) => Manifold::sphere(dim, r),
        (m, _) => m,
    }
}

/// Attaches the sampled `L(x)` when the objective has no closed form.
fn ensure_lipschitz(m: &Manifold, obj: &Objective) -> Objective {
    if obj.has_lipschitz() {
        return obj.clone();
    }
    let (m, inner) = (m.clone(), obj.clone());
    obj.clone()
        .with_lipschitz(move |x| default_lipschitz(&m, &inner, x).unwrap_or(f64::NAN))
}

/// Runs `method` on `problem`; the lowest-level entry point of this module.
pub fn run_problem(
    problem: &Problem,
    method: MethodName,
    opts: &RunOptions,
) -> Result<ScenarioRun> {
    let domain = with_retraction(problem.manifold.clone(), opts.retraction);
    let manifold = if method.is_euclidean() {
        if !domain.is_flat() {
            return Err(Error::UnsupportedMethod {
                scenario: problem.id.to_string(),
                method: method.to_string(),
            });
        }
        Manifold::euclidean(domain.ambient_dim())
    } else {
        domain.clone()
    };
    let objective = if method == MethodName::RLocalBacktracking {
        ensure_lipschitz(&manifold, &problem.objective)
    } else {
        problem.objective.clone()
    };
    let stop = StopCriteria {
        grad_tol: opts.grad_tol,
        max_iters: opts.iters.unwrap_or(problem.default_iters),
        divergence_norm: problem.divergence_norm,
        ..Default::default()
    };
    let m = opts.method(method);
    let trace = run(&manifold, &objective, &problem.x0, &m, &stop, opts.seed)?;

    let mut flags = BTreeSet::new();
    if trace.any_clamped() {
        flags.insert(Flag::Clamped);
    }
    if method.is_euclidean() && trace.records.iter().any(|r| !domain.contains(&r.point)) {
        flags.insert(Flag::LeftDomainWould);
    }
    let last = trace.last();
    let settled = !matches!(
        trace.termination,
        Termination::Diverged | Termination::NumericalFailure
    );
    if settled
        && last.rgrad_norm <= CRITICAL_TOL
        && is_local_maximum(&manifold, &objective, &last.point)
    {
        flags.insert(Flag::ConvergedToMaximum);
    }
    let result = ScenarioResult {
        scenario_id: problem.id.to_string(),
        method: method.to_string(),
        final_point: last.point.clone(),
        final_value: last.f_value,
        steps: trace.steps(),
        termination: trace.termination,
        flags,
    };
    Ok(ScenarioRun {
        result,
        trace,
        manifold,
        objective,
        method: m,
    })
}

/// Riemannian Hessian on the tangent space is negative definite at `x`.
fn is_local_maximum(m: &Manifold, obj: &Objective, x: &[f64]) -> bool {
    tangent_hessian_eigenvalues(m, obj, x)
        .map(|ev| {
            // a flat direction is not a maximum; rounding leaves it near -ε
            let scale = ev.iter().fold(1.0f64, |m, l| m.max(l.abs()));
            ev.last().is_some_and(|&top| top < -1e-9 * scale)
        })
        .unwrap_or(false)
}

fn tangent_hessian_eigenvalues(m: &Manifold, obj: &Objective, x: &[f64]) -> Result<Vec<f64>> {
    let h = riemannian_hess(m, obj, x)?;
    let h = match m.tangent_basis(x)? {
        Some(basis) => h.congruence(&basis),
        None => h,
    };
    Ok(sym_eig(&h)?.eigenvalues().to_vec())
}

pub fn run_scenario_full(id: &str, method: &str, opts: &RunOptions) -> Result<ScenarioRun> {
    let problem = find_problem(id)?;
    let method = method.parse()?;
    run_problem(&problem, method, opts)
}

/// Runs builtin scenario `id` with `method` for `iters` iterations.
pub fn run_scenario(id: &str, method: &str, iters: usize, seed: u64) -> Result<ScenarioResult> {
    run_scenario_full(id, method, &RunOptions::with_iters(iters, seed)).map(|r| r.result)
}

/// The methods compared on a scenario in the corpus.
pub fn corpus_methods(problem: &Problem) -> &'static [MethodName] {
    use MethodName::*;
    if problem.manifold.is_flat() {
        &[
            Newton,
            NewQNewton,
            RandomNewton,
            RNewton,
            RNewQNewton,
            RBacktracking,
            RLocalBacktracking,
        ]
    } else {
        &[
            RNewton,
            RNewQNewton,
            RRandomNewton,
            RBacktracking,
            RStandardGd,
        ]
    }
}

/// All (scenario, method) cells in report order.
pub fn corpus_cells() -> Vec<(Problem, MethodName)> {
    builtin_problems()
        .into_iter()
        .flat_map(|p| corpus_methods(&p).iter().map(move |&m| (p.clone(), m)))
        .collect()
}

/// `seed ⊕ FNV-1a(scenario_id, method)`.
pub fn cell_seed(seed: u64, scenario_id: &str, method: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let bytes = scenario_id.bytes().chain([0u8]).chain(method.bytes());
    seed ^ bytes.fold(OFFSET, |h, b| (h ^ b as u64).wrapping_mul(PRIME))
}

/// Worker count from [`THREADS_ENV`], if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs every corpus cell, in parallel, returning full runs in report order.
pub fn run_corpus_full(opts: &RunOptions) -> Result<Vec<ScenarioRun>> {
    let cells = corpus_cells();
    let job = || {
        cells
            .par_iter()
            .map(|(problem, method)| {
                let cell = RunOptions {
                    seed: cell_seed(opts.seed, problem.id, method.as_str()),
                    ..opts.clone()
                };
                run_problem(problem, *method, &cell)
            })
            .collect::<Result<Vec<_>>>()
    };
    match thread_cap() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .install(job),
        None => job(),
    }
}

/// Corpus report: one [`ScenarioResult`] per cell with each scenario's
/// default budget.
pub fn run_corpus(seed: u64) -> Result<Vec<ScenarioResult>> {
    let opts = RunOptions {
        seed,
        ..Default::default()
    };
    Ok(run_corpus_full(&opts)?
        .into_iter()
        .map(|r| r.result)
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallMinResult {
    pub interior_result: ScenarioResult,
    pub sphere_result: ScenarioResult,
    pub best: ScenarioResult,
}

fn failed_branch(id: &str, method: MethodName, x0: &[f64], e: &Error) -> ScenarioResult {
    ScenarioResult {
        scenario_id: id.to_string(),
        method: method.to_string(),
        final_point: x0.to_vec(),
        final_value: f64::INFINITY,
        steps: 0,
        termination: Termination::from_step_error(e).unwrap_or(Termination::NumericalFailure),
        flags: BTreeSet::new(),
    }
}

/// Minimizes `obj` over the closed unit ball: once on the open ball from
/// `x0`, once on the sphere from `x0/‖x0‖`, keeping the lower value.
pub fn ball_minimize(
    obj: &Objective,
    x0: &[f64],
    method: MethodName,
    opts: &RunOptions,
) -> Result<BallMinResult> {
    if method.is_euclidean() {
        return Err(Error::UnsupportedMethod {
            scenario: "ball".into(),
            method: method.to_string(),
        });
    }
    let dim = obj.dim();
    if x0.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: x0.len(),
        });
    }
    let iters = opts.iters.unwrap_or(StopCriteria::default().max_iters);
    let branch = |id: &'static str, manifold: Manifold, start: Vec<f64>| {
        let problem = Problem {
            id,
            title: id,
            manifold,
            objective: obj.clone(),
            x0: start.clone(),
            default_iters: iters,
            divergence_norm: CATALOG_DIVERGENCE_NORM,
        };
        match run_problem(&problem, method, opts) {
            Ok(r) => Ok(r.result),
            Err(e @ (Error::InvalidParameter(_) | Error::DimensionMismatch { .. })) => Err(e),
            Err(e) => Ok(failed_branch(id, method, &start, &e)),
        }
    };
    let interior = branch("ball", Manifold::open_ball(dim), x0.to_vec())?;
    let n = vecops::norm(x0);
    let start = if n > 0.0 {
        vecops::scale(x0, 1.0 / n)
    } else {
        let mut e = vec![0.0; dim];
        e[0] = 1.0;
        e
    };
    let retraction = opts.retraction.unwrap_or_default();
    let sphere = branch("sphere", Manifold::sphere(dim, retraction), start)?;
    let best = if sphere.final_value < interior.final_value {
        sphere.clone()
    } else {
        interior.clone()
    };
    Ok(BallMinResult {
        interior_result: interior,
        sphere_result: sphere,
        best,
    })
}

/// Ball minimization of `f_A` from the builtin interior start used by the
/// corpus quadratics.
pub fn ball_minimize_quadratic(
    a: &SymMatrix,
    x0: &[f64],
    method: MethodName,
    opts: &RunOptions,
) -> Result<BallMinResult> {
    let problem = quadratic_on_ball(a.clone(), x0.to_vec());
    ball_minimize(&problem.objective, x0, method, opts)
}

/// Smallest eigenvalue of `A` and a unit eigenvector, as twice the minimum
/// of `f_A` over the sphere.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenEstimate {
    pub lambda1: f64,
    pub vector: Vec<f64>,
    /// Attempts used, including the first.
    pub attempts: usize,
    pub result: ScenarioResult,
}

/// Runs `method` on the sphere from seeded random starts until the final
/// point passes the second-order test (tangent Hessian positive
/// semidefinite), restarting at most [`EIGEN_RESTARTS`] times. Returns the
/// best attempt.
pub fn smallest_eigenvalue(
    a: &SymMatrix,
    method: MethodName,
    opts: &RunOptions,
) -> Result<EigenEstimate> {
    if method.is_euclidean() {
        return Err(Error::UnsupportedMethod {
            scenario: "sphere".into(),
            method: method.to_string(),
        });
    }
    let dim = a.dim();
    let scale = 1.0 + a.spectral_norm()?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<EigenEstimate> = None;
    for attempt in 0..=EIGEN_RESTARTS {
        let start: Vec<f64> = loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if vecops::norm(&v) > 1e-3 {
                break v;
            }
        };
        let mut problem = quadratic_on_sphere(a.clone(), &start);
        problem.default_iters = opts.iters.unwrap_or(StopCriteria::default().max_iters);
        let run_opts = RunOptions {
            seed: opts.seed.wrapping_add(attempt as u64),
            ..opts.clone()
        };
        let run = run_problem(&problem, method, &run_opts)?;
        let last = run.trace.last();
        let estimate = EigenEstimate {
            lambda1: 2.0 * last.f_value,
            vector: last.point.clone(),
            attempts: attempt + 1,
            result: run.result.clone(),
        };
        let minimal = tangent_hessian_eigenvalues(&run.manifold, &run.objective, &last.point)
            .map(|ev| ev.first().is_none_or(|&low| low >= -1e-4 * scale))
            .unwrap_or(false)
            && riemannian_grad(&run.manifold, &run.objective, &last.point)
                .map(|g| vecops::norm(&g) <= 1e-3 * scale)
                .unwrap_or(false);
        let better = best.as_ref().is_none_or(|b| estimate.lambda1 < b.lambda1);
        if better {
            best = Some(estimate);
        }
        if minimal {
            break;
        }
    }
    Ok(best.expect("at least one attempt runs"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{example7_matrix, example8_matrix};

    #[test]
    fn method_names_round_trip() {
        for m in MethodName::ALL {
            assert_eq!(m.as_str().parse::<MethodName>().unwrap(), m);
        }
        assert_eq!(
            "bfgs".parse::<MethodName>(),
            Err(Error::UnknownMethod("bfgs".into()))
        );
    }

    #[test]
    fn unknown_ids_are_reported() {
        assert_eq!(
            run_scenario("example42", "newton", 5, 0),
            Err(Error::UnknownScenario("example42".into()))
        );
        assert!(matches!(
            run_scenario("example7p", "newton", 5, 0),
            Err(Error::UnsupportedMethod { .. })
        ));
    }

    #[test]
    fn cell_seed_is_stable_and_distinguishes_cells() {
        // the separator byte alone: one FNV-1a round over 0x00
        assert_eq!(
            cell_seed(0, "", ""),
            0xcbf2_9ce4_8422_2325u64.wrapping_mul(0x100_0000_01b3)
        );
        assert_eq!(cell_seed(5, "x", "y") ^ cell_seed(0, "x", "y"), 5);
        assert_ne!(
            cell_seed(42, "example7", "newton"),
            cell_seed(42, "example7", "r_newton")
        );
        assert_ne!(
            cell_seed(42, "example7", "newton"),
            cell_seed(42, "example7n", "ewton")
        );
        assert_eq!(cell_seed(42, "a", "b"), cell_seed(42, "a", "b"));
    }

    #[test]
    fn example5_newton_is_singular() {
        let r = run_scenario("example5", "newton", 500, 0).unwrap();
        assert_eq!(r.termination, Termination::SingularMatrix);
        assert_eq!(r.steps, 0);
    }

    #[test]
    fn example7_nqn_reaches_boundary_eigenvector() {
        let r = run_scenario("example7", "r_new_q_newton", 50, 0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let sign = -r.final_point[0].signum();
        assert!((r.final_point[0] - sign * -s).abs() < 1e-6, "{:?}", r);
        assert!((r.final_point[1] - sign * s).abs() < 1e-6, "{:?}", r);
    }

    #[test]
    fn ball_minimize_examples() {
        let opts = RunOptions::with_iters(200, 0);
        let id = SymMatrix::identity(2);
        let r =
            ball_minimize_quadratic(&id, &[0.3, 0.4], MethodName::RBacktracking, &opts).unwrap();
        assert!(r.interior_result.final_value < 1e-8);
        assert!(r.sphere_result.final_value >= 0.5 - 1e-12);
        assert_eq!(r.best, r.interior_result);

        // linear f: minimum −‖c‖ on the boundary at −c/‖c‖
        let c = [3.0, -4.0];
        let lin = Objective::new(
            2,
            move |x| c[0] * x[0] + c[1] * x[1],
            move |_| c.to_vec(),
            |_| SymMatrix::zeros(2),
        );
        let r = ball_minimize(&lin, &[0.1, 0.1], MethodName::RBacktracking, &opts).unwrap();
        assert_eq!(r.best, r.sphere_result);
        assert!((r.best.final_value + 5.0).abs() < 1e-6);

        let ex8 = example8_matrix();
        let x0 = [1.188e-05, 2.188e-05, 3.188e-05];
        let r = ball_minimize_quadratic(
            &ex8,
            &x0,
            MethodName::RBacktracking,
            &RunOptions::with_iters(50, 0),
        )
        .unwrap();
        assert!((r.best.final_value + 112.5).abs() < 0.5);
        assert_eq!(
            r.best.final_value,
            r.interior_result
                .final_value
                .min(r.sphere_result.final_value)
        );
    }

    #[test]
    fn smallest_eigenvalue_examples() {
        let opts = RunOptions::with_iters(500, 1);
        let e = smallest_eigenvalue(&example7_matrix(), MethodName::RBacktracking, &opts).unwrap();
        assert!((e.lambda1 + 2.0).abs() < 1e-4);
        assert!((e.vector[0] + e.vector[1]).abs() < 1e-3);
        let e = smallest_eigenvalue(&example8_matrix(), MethodName::RNewQNewton, &opts).unwrap();
        assert!((e.lambda1 + 225.0).abs() < 0.1);
        let e =
            smallest_eigenvalue(&SymMatrix::identity(4), MethodName::RBacktracking, &opts).unwrap();
        assert!((e.lambda1 - 1.0).abs() < 1e-6);
    }
}
