//! The builtin experiment problems: singular one- and two-dimensional cost
//! functions on punctured domains, quadratics constrained to the open unit
//! ball, and the same quadratics on the unit sphere.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::manifold::{Manifold, SphereRetraction};
use crate::objective::Objective;
use crate::vecops;

/// Iterates farther than this from the origin count as divergence for the
/// builtin problems. Every problem's interesting geometry lies within
/// distance 2 of the origin.
pub const CATALOG_DIVERGENCE_NORM: f64 = 100.0;

pub const PROBLEM_IDS: [&str; 12] = [
    "example1",
    "example2",
    "example3",
    "example4",
    "example5",
    "example6",
    "example7",
    "example8",
    "example9",
    "example7p",
    "example8p",
    "example9p",
];

/// An objective, the manifold it lives on, and a starting point.
#[derive(Clone)]
pub struct Problem {
    pub id: &'static str,
    pub title: &'static str,
    pub manifold: Manifold,
    pub objective: Objective,
    pub x0: Vec<f64>,
    /// Iteration budget used by the experiment corpus.
    pub default_iters: usize,
    pub divergence_norm: f64,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("id", &self.id)
            .field("manifold", &self.manifold.describe())
            .field("x0", &self.x0)
            .finish_non_exhaustive()
    }
}

fn sgn(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn example8_matrix() -> SymMatrix {
    SymMatrix::from_rows(&[
        vec![-23.0, -61.0, 40.0],
        vec![-61.0, -39.5, 155.0],
        vec![40.0, 155.0, -50.0],
    ])
    .expect("literal matrix is symmetric")
}

pub fn example7_matrix() -> SymMatrix {
    SymMatrix::from_rows(&[vec![2.0, 4.0], vec![4.0, 2.0]]).expect("literal matrix is symmetric")
}

fn punctured_line() -> Manifold {
    Manifold::open_subset(1, "R \\ {0}", |p| p[0] != 0.0, |p| p[0].abs())
}

fn power_problem(id: &'static str, title: &'static str, p: f64) -> Problem {
    // f = |t|^p, f' = p sgn(t) |t|^(p-1), f'' = p(p-1)|t|^(p-2)
    let c2 = p * (p - 1.0);
    let objective = Objective::new(
        1,
        move |x| x[0].abs().powf(p),
        move |x| vec![p * sgn(x[0]) * x[0].abs().powf(p - 1.0)],
        move |x| SymMatrix::diagonal(&[c2 * x[0].abs().powf(p - 2.0)]),
    )
    // |f''| is monotone in |t|; the worst point of the half-radius ball
    // around t is |t|/2 (p < 2).
    .with_lipschitz(move |x| c2.abs() * (0.5 * x[0].abs()).powf(p - 2.0));
    Problem {
        id,
        title,
        manifold: punctured_line(),
        objective,
        x0: vec![1.00001188],
        default_iters: 50,
        divergence_norm: CATALOG_DIVERGENCE_NORM,
    }
}

fn example3() -> Problem {
    let objective = Objective::new(
        1,
        |x| (-1.0 / (x[0] * x[0])).exp(),
        |x| {
            let t = x[0];
            vec![2.0 / (t * t * t) * (-1.0 / (t * t)).exp()]
        },
        |x| {
            let t = x[0];
            let t2 = t * t;
            SymMatrix::diagonal(&[(-1.0 / t2).exp() * (4.0 / (t2 * t2 * t2) - 6.0 / (t2 * t2))])
        },
    )
    // sup_s e^{-s}|4s³ - 6s²| <= 108e^{-3} + 24e^{-2} < 8.7
    .with_lipschitz(|_| 8.7);
    Problem {
        id: "example3",
        title: "f(t) = exp(-1/t^2) on R \\ {0}",
        manifold: punctured_line(),
        objective,
        x0: vec![3.0],
        default_iters: 50,
        divergence_norm: CATALOG_DIVERGENCE_NORM,
    }
}

fn example4() -> Problem {
    fn d1(t: f64) -> f64 {
        3.0 * t * t * (1.0 / t).sin() - t * (1.0 / t).cos()
    }
    fn d2(t: f64) -> f64 {
        6.0 * t * (1.0 / t).sin() - 4.0 * (1.0 / t).cos() - (1.0 / t).sin() / t
    }
    // |f''(t)| <= 6|t| + 4 + 1/|t|, convex in |t|, so its max over an
    // interval sits at an endpoint
    fn envelope(t: f64) -> f64 {
        6.0 * t + 4.0 + 1.0 / t
    }
    let objective = Objective::new(
        2,
        |x| x[0].powi(3) * (1.0 / x[0]).sin() + x[1].powi(3) * (1.0 / x[1]).sin(),
        |x| vec![d1(x[0]), d1(x[1])],
        |x| SymMatrix::diagonal(&[d2(x[0]), d2(x[1])]),
    )
    .with_lipschitz(|x| {
        let half = 0.5 * x[0].abs().min(x[1].abs());
        x.iter()
            .map(|c| envelope(c.abs() - half).max(envelope(c.abs() + half)))
            .fold(0.0, f64::max)
    });
    Problem {
        id: "example4",
        title: "f(x,y) = x^3 sin(1/x) + y^3 sin(1/y) off the axes",
        manifold: Manifold::open_subset(
            2,
            "R^2 \\ ({x=0} u {y=0})",
            |p| p[0] != 0.0 && p[1] != 0.0,
            |p| p[0].abs().min(p[1].abs()),
        ),
        objective,
        x0: vec![-0.99998925, 2.00001188],
        default_iters: 50,
        divergence_norm: CATALOG_DIVERGENCE_NORM,
    }
}

fn example5() -> Problem {
    let objective = Objective::new(
        2,
        |p| 100.0 * (p[1] - p[0].abs()).powi(2) + (1.0 - p[0]).abs(),
        |p| {
            let (x, y) = (p[0], p[1]);
            vec![
                -200.0 * (y - x.abs()) * sgn(x) - sgn(1.0 - x),
                200.0 * (y - x.abs()),
            ]
        },
        |p| {
            let s = sgn(p[0]);
            SymMatrix::from_rows(&[vec![200.0 * s * s, -200.0 * s], vec![-200.0 * s, 200.0]])
                .expect("symmetric by construction")
        },
    )
    // eigenvalues of the Hessian are 0 and 400
    .with_lipschitz(|_| 400.0);
    Problem {
        id: "example5",
        title: "f(x,y) = 100(y - |x|)^2 + |1 - x| off {x=0} u {x=1}",
        manifold: Manifold::open_subset(
            2,
            "R^2 \\ ({x=0} u {x=1})",
            |p| p[0] != 0.0 && p[0] != 1.0,
            |p| p[0].abs().min((1.0 - p[0]).abs()),
        ),
        objective,
        x0: vec![0.55134554, -0.75134554],
        default_iters: 500,
        divergence_norm: CATALOG_DIVERGENCE_NORM,
    }
}

fn example6() -> Problem {
    let objective = Objective::new(
        2,
        |p| 5.0 * p[0].abs() + p[1],
        |p| vec![5.0 * sgn(p[0]), 1.0],
        |_| SymMatrix::zeros(2),
    )
    // the Hessian vanishes, so any positive constant bounds it
    .with_lipschitz(|_| 1.0);
    Problem {
        id: "example6",
        title: "f(x,y) = 5|x| + y off {x=0}",
        manifold: Manifold::open_subset(2, "R^2 \\ {x=0}", |p| p[0] != 0.0, |p| p[0].abs()),
        objective,
        x0: vec![-0.99998925, 2.00001188],
        default_iters: 500,
        divergence_norm: CATALOG_DIVERGENCE_NORM,
    }
}

fn ball_quadratic(
    id: &'static str,
    title: &'static str,
    a: SymMatrix,
    negate: bool,
    x0: Vec<f64>,
) -> Problem {
    let dim = a.dim();
    let norm = a.spectral_norm().expect("finite matrix");
    let base = Objective::quadratic(a).with_lipschitz(move |_| norm);
    Problem {
        id,
        title,
        manifold: Manifold::open_ball(dim),
        objective: if negate { base.negated() } else { base },
        x0,
        default_iters: 50,
        divergence_norm: CATALOG_DIVERGENCE_NORM,
    }
}

fn sphere_quadratic(
    id: &'static str,
    title: &'static str,
    a: SymMatrix,
    negate: bool,
    start: &[f64],
) -> Problem {
    let dim = a.dim();
    // Along any retraction curve t ↦ R_x(tu), ‖u‖ = 1, the second derivative
    // of f_A is at most 2‖A‖ (geodesic) or 2‖A‖ + 0.65‖A‖ (projective).
    let bound = 3.0 * a.spectral_norm().expect("finite matrix");
    let base = Objective::quadratic(a).with_lipschitz(move |_| bound);
    Problem {
        id,
        title,
        manifold: Manifold::sphere(dim, SphereRetraction::Projective),
        objective: if negate { base.negated() } else { base },
        x0: vecops::scale(start, 1.0 / vecops::norm(start)),
        default_iters: 10,
        divergence_norm: CATALOG_DIVERGENCE_NORM,
    }
}

/// `f_A` on the open unit ball, started at `x0`, with `L(x) = ‖A‖`.
pub fn quadratic_on_ball(a: SymMatrix, x0: Vec<f64>) -> Problem {
    ball_quadratic("ball", "quadratic form on the open unit ball", a, false, x0)
}

/// `f_A` on the unit sphere, started at `start/‖start‖`.
pub fn quadratic_on_sphere(a: SymMatrix, start: &[f64]) -> Problem {
    sphere_quadratic(
        "sphere",
        "quadratic form on the unit sphere",
        a,
        false,
        start,
    )
}

const EX8_X0: [f64; 3] = [1.188e-05, 2.188e-05, 3.188e-05];

/// All twelve builtin problems in catalog order.
pub fn builtin_problems() -> Vec<Problem> {
    PROBLEM_IDS
        .iter()
        .map(|id| find_problem(id).expect("catalog ids resolve"))
        .collect()
}

pub fn find_problem(id: &str) -> Result<Problem> {
    Ok(match id {
        "example1" => power_problem("example1", "f(t) = |t|^1.3 on R \\ {0}", 1.3),
        "example2" => power_problem("example2", "f(t) = |t|^0.3 on R \\ {0}", 0.3),
        "example3" => example3(),
        "example4" => example4(),
        "example5" => example5(),
        "example6" => example6(),
        "example7" => ball_quadratic(
            "example7",
            "f(x,y) = x^2 + y^2 + 4xy on the open unit disk",
            example7_matrix(),
            false,
            vec![0.1, 0.2],
        ),
        "example8" => ball_quadratic(
            "example8",
            "indefinite quadratic form on the open unit ball in R^3",
            example8_matrix(),
            false,
            EX8_X0.to_vec(),
        ),
        "example9" => ball_quadratic(
            "example9",
            "negated example8 form on the open unit ball in R^3",
            example8_matrix(),
            true,
            EX8_X0.to_vec(),
        ),
        "example7p" => sphere_quadratic(
            "example7p",
            "example7 form on the unit circle",
            example7_matrix(),
            false,
            &[0.1, 0.2],
        ),
        "example8p" => sphere_quadratic(
            "example8p",
            "example8 form on the unit sphere S^2",
            example8_matrix(),
            false,
            &EX8_X0,
        ),
        "example9p" => sphere_quadratic(
            "example9p",
            "negated example8 form on the unit sphere S^2",
            example8_matrix(),
            true,
            &EX8_X0,
        ),
        other => return Err(Error::UnknownScenario(other.to_string())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_has_twelve_resolvable_problems() {
        let all = builtin_problems();
        assert_eq!(all.len(), 12);
        for p in &all {
            assert!(p.manifold.contains(&p.x0), "{} start off-manifold", p.id);
            assert_eq!(p.objective.dim(), p.manifold.ambient_dim());
        }
        assert!(matches!(
            find_problem("example10"),
            Err(Error::UnknownScenario(_))
        ));
    }

    #[test]
    fn example7_lookup() {
        let p = find_problem("example7").unwrap();
        assert_eq!(p.x0, vec![0.1, 0.2]);
        assert_eq!(p.objective.hessian(&p.x0), example7_matrix());
        // x² + y² + 4xy
        let (x, y) = (0.3, -0.4);
        assert!((p.objective.value(&[x, y]) - (x * x + y * y + 4.0 * x * y)).abs() < 1e-15);
        assert!(p.manifold.contains(&[0.99, 0.0]));
        assert!(!p.manifold.contains(&[1.0, 0.0]));
    }

    #[test]
    fn example8_lookup() {
        let p = find_problem("example8").unwrap();
        let h = p.objective.hessian(&p.x0);
        assert_eq!(h.row(0), &[-23.0, -61.0, 40.0]);
        assert_eq!(h.row(1), &[-61.0, -39.5, 155.0]);
        assert_eq!(h.row(2), &[40.0, 155.0, -50.0]);
        let v = p.objective.value(&[1.0 / 3.0, 2.0 / 3.0, -2.0 / 3.0]);
        assert!((v + 112.5).abs() < 1e-9);
    }

    #[test]
    fn example1_lookup() {
        assert_eq!(find_problem("example1").unwrap().x0, vec![1.00001188]);
    }

    #[test]
    fn sphere_starts_are_normalized_reference_points() {
        let p = find_problem("example7p").unwrap();
        assert!((p.x0[0] - 0.4472136).abs() < 1e-7 && (p.x0[1] - 0.89442719).abs() < 1e-8);
        let p = find_problem("example8p").unwrap();
        for (a, b) in p.x0.iter().zip([0.29369586, 0.54091459, 0.78813333]) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn example9_is_negated_example8() {
        let p8 = find_problem("example8").unwrap();
        let p9 = find_problem("example9").unwrap();
        let x = [0.1, -0.3, 0.2];
        assert_eq!(p9.objective.value(&x), -p8.objective.value(&x));
    }

    #[test]
    fn example3_lipschitz_constant_dominates_second_derivative() {
        // dense scan of |f''| over t in [0.05, 20]
        let p = find_problem("example3").unwrap();
        let l = p.objective.lipschitz(&[1.0]).unwrap();
        let mut worst = 0.0f64;
        let mut t = 0.05;
        while t < 20.0 {
            worst = worst.max(p.objective.hessian(&[t]).get(0, 0).abs());
            t += 1e-4;
        }
        assert!(worst < l, "sampled max {worst} vs bound {l}");
    }
}
