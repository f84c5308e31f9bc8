use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{
    backtracking_gd_step, local_bgd_step, new_q_newton_step, newton_step, random_newton_step,
    standard_gd_step, IterateTrace, Method, NewQNewtonParams, Step, StopCriteria, Termination,
};
use crate::error::Result;
use crate::manifold::Manifold;
use crate::objective::{riemannian_grad, Objective};
use crate::vecops;

/// One row of an iterate trace. Row 0 is the starting point; row `k` holds
/// `x_k` together with the step that produced it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub iter: usize,
    pub point: Vec<f64>,
    pub f_value: f64,
    pub rgrad_norm: f64,
    pub step_size: f64,
    pub step_norm: f64,
    /// `r(x_{k-1})`, or `r(x_0)` for row 0.
    pub radius_before: f64,
    pub clamped: bool,
}

/// Iterates `method` from `x0` until a stop criterion fires.
///
/// `seed` drives every random choice (Random Newton's `κ`, random
/// regularizers); deterministic methods ignore it.
pub fn run(
    m: &Manifold,
    obj: &Objective,
    x0: &[f64],
    method: &Method,
    stop: &StopCriteria,
    seed: u64,
) -> Result<IterateTrace> {
    method.validate()?;
    stop.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let method = match method {
        Method::NewQNewton(p) if p.random_deltas => Method::NewQNewton(NewQNewtonParams {
            deltas: (0..=m.intrinsic_dim())
                .map(|_| 1.0 - rng.gen::<f64>())
                .collect(),
            random_deltas: false,
            ..p.clone()
        }),
        other => other.clone(),
    };

    let mut x = x0.to_vec();
    let mut gnorm = vecops::norm(&riemannian_grad(m, obj, &x)?);
    let mut records = vec![StepRecord {
        iter: 0,
        point: x.clone(),
        f_value: obj.value(&x),
        rgrad_norm: gnorm,
        step_size: 0.0,
        step_norm: 0.0,
        radius_before: m.radius(&x)?,
        clamped: false,
    }];

    let termination = loop {
        if !gnorm.is_finite() {
            break Termination::NumericalFailure;
        }
        if gnorm <= stop.grad_tol {
            break Termination::StoppedAtCriticalPoint;
        }
        let iter = records.len();
        if iter > stop.max_iters {
            break Termination::MaxIterations;
        }
        let radius = m.radius(&x)?;
        let step = match take_step(m, obj, &x, &method, &mut rng) {
            Ok(s) => s,
            Err(e) => match Termination::from_step_error(&e) {
                Some(t) => break t,
                None => return Err(e),
            },
        };
        if !vecops::all_finite(&step.point) {
            break Termination::NumericalFailure;
        }
        if !m.contains(&step.point) {
            break Termination::LeftDomain;
        }
        x = step.point;
        let f = obj.value(&x);
        gnorm = vecops::norm(&riemannian_grad(m, obj, &x)?);
        records.push(StepRecord {
            iter,
            point: x.clone(),
            f_value: f,
            rgrad_norm: gnorm,
            step_size: step.step_size,
            step_norm: step.step_norm,
            radius_before: radius,
            clamped: step.clamped,
        });
        if !f.is_finite() {
            break Termination::NumericalFailure;
        }
        if vecops::norm(&x) > stop.divergence_norm {
            break Termination::Diverged;
        }
        if stop.step_tol > 0.0 && step.step_norm <= stop.step_tol {
            break Termination::StepTolerance;
        }
    };
    Ok(IterateTrace {
        records,
        termination,
    })
}

fn take_step(
    m: &Manifold,
    obj: &Objective,
    x: &[f64],
    method: &Method,
    rng: &mut ChaCha8Rng,
) -> Result<Step> {
    match method {
        Method::Backtracking(p) => backtracking_gd_step(m, obj, x, p),
        Method::LocalBacktracking(p) => local_bgd_step(m, obj, x, p),
        Method::NewQNewton(p) => new_q_newton_step(m, obj, x, p),
        Method::Newton => newton_step(m, obj, x),
        Method::RandomNewton => random_newton_step(m, obj, x, rng),
        Method::StandardGd { lr } => standard_gd_step(m, obj, x, *lr),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::linalg::SymMatrix;
    use crate::optim::BacktrackingParams;

    fn stop(iters: usize) -> StopCriteria {
        StopCriteria {
            max_iters: iters,
            ..Default::default()
        }
    }

    #[test]
    fn trace_starts_with_initial_point() {
        let e = Manifold::euclidean(2);
        let obj = Objective::quadratic(SymMatrix::diagonal(&[1.0, 3.0]));
        let t = run(
            &e,
            &obj,
            &[1.0, 1.0],
            &Method::Backtracking(Default::default()),
            &stop(5),
            0,
        )
        .unwrap();
        assert_eq!(t.records[0].point, vec![1.0, 1.0]);
        assert_eq!(t.records[0].iter, 0);
        assert_eq!(t.records.len(), 6);
        assert_eq!(t.termination, Termination::MaxIterations);
        for w in t.records.windows(2) {
            assert!(w[1].f_value < w[0].f_value);
        }
    }

    #[test]
    fn stops_at_critical_point() {
        let e = Manifold::euclidean(1);
        let obj = Objective::quadratic(SymMatrix::identity(1));
        let t = run(&e, &obj, &[4.0], &Method::Newton, &stop(10), 0).unwrap();
        assert_eq!(t.termination, Termination::StoppedAtCriticalPoint);
        assert_eq!(t.steps(), 1);
    }

    #[test]
    fn singular_hessian_ends_the_run() {
        let e = Manifold::euclidean(1);
        let lin = Objective::new(1, |x| x[0], |_| vec![1.0], |_| SymMatrix::zeros(1));
        let t = run(&e, &lin, &[0.0], &Method::Newton, &stop(10), 0).unwrap();
        assert_eq!(t.termination, Termination::SingularMatrix);
        assert_eq!(t.steps(), 0);
    }

    #[test]
    fn divergence_is_detected() {
        let e = Manifold::euclidean(1);
        let lin = Objective::new(1, |x| x[0], |_| vec![1.0], |_| SymMatrix::zeros(1));
        let s = StopCriteria {
            divergence_norm: 10.0,
            ..stop(1000)
        };
        let t = run(&e, &lin, &[0.0], &Method::StandardGd { lr: 1.0 }, &s, 0).unwrap();
        // |x_11| = 11 is the first iterate beyond the threshold
        assert_eq!(t.termination, Termination::Diverged);
        assert_eq!(t.steps(), 11);
    }

    #[test]
    fn seeded_runs_repeat() {
        let e = Manifold::euclidean(2);
        let obj = Objective::quadratic(SymMatrix::diagonal(&[1.0, -2.0]));
        let rn = |seed| {
            run(
                &e,
                &obj,
                &[0.5, 0.25],
                &Method::RandomNewton,
                &stop(20),
                seed,
            )
            .unwrap()
            .records
        };
        assert_eq!(rn(7), rn(7));
        assert_ne!(rn(7), rn(8));
        let p = NewQNewtonParams {
            random_deltas: true,
            ..Default::default()
        };
        let nqn = |seed| {
            run(
                &e,
                &obj,
                &[0.5, 0.25],
                &Method::NewQNewton(p.clone()),
                &stop(20),
                seed,
            )
            .unwrap()
            .records
        };
        assert_eq!(nqn(3), nqn(3));
    }

    #[test]
    fn rejects_bad_inputs() {
        let ball = Manifold::open_ball(2);
        let obj = Objective::quadratic(SymMatrix::identity(2));
        assert_eq!(
            run(&ball, &obj, &[2.0, 0.0], &Method::Newton, &stop(1), 0).unwrap_err(),
            Error::NotOnManifold
        );
        let bad = Method::Backtracking(BacktrackingParams {
            beta: 2.0,
            ..Default::default()
        });
        assert!(run(&ball, &obj, &[0.0, 0.5], &bad, &stop(1), 0).is_err());
    }
}
