#![allow(clippy::needless_range_loop)]

use manifold_descent::bench::run_scenario;
use manifold_descent::linalg::{sym_eig, SymMatrix};
use manifold_descent::manifold::{Manifold, SphereRetraction};
use manifold_descent::objective::{riemannian_grad, riemannian_hess, Objective, PROBLEM_IDS};
use manifold_descent::optim::{
    gamma_step_factor, new_q_newton_direction, run, Gamma, Method, NewQNewtonParams, StopCriteria,
};
use proptest::prelude::*;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn sym_from(dim: usize, entries: &[f64]) -> SymMatrix {
    let mut rows = vec![vec![0.0; dim]; dim];
    let mut k = 0;
    for i in 0..dim {
        for j in i..dim {
            rows[i][j] = entries[k];
            rows[j][i] = entries[k];
            k += 1;
        }
    }
    SymMatrix::from_rows(&rows).unwrap()
}

fn symmetric(max_dim: usize) -> impl Strategy<Value = SymMatrix> {
    (1..=max_dim).prop_flat_map(|d| {
        prop::collection::vec(-10.0..10.0f64, d * (d + 1) / 2).prop_map(move |e| sym_from(d, &e))
    })
}

fn matrix_and_vector(max_dim: usize) -> impl Strategy<Value = (SymMatrix, Vec<f64>)> {
    symmetric(max_dim).prop_flat_map(|a| {
        let d = a.dim();
        (Just(a), prop::collection::vec(-5.0..5.0f64, d))
    })
}

fn unit_and_tangent(max_dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2..=max_dim).prop_flat_map(|d| {
        (
            prop::collection::vec(-1.0..1.0f64, d),
            prop::collection::vec(-1.0..1.0f64, d),
        )
            .prop_filter("nondegenerate", |(x, u)| norm(x) > 0.1 && norm(u) > 0.1)
            .prop_filter_map("tangent part too small", |(x, u)| {
                let n = norm(&x);
                let x: Vec<f64> = x.iter().map(|v| v / n).collect();
                let c = dot(&u, &x);
                let t: Vec<f64> = u.iter().zip(&x).map(|(a, b)| a - c * b).collect();
                let nt = norm(&t);
                (nt > 0.05).then(|| (x, t.iter().map(|v| v / nt).collect()))
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn split_recombines((a, w) in matrix_and_vector(6)) {
        let e = sym_eig(&a).unwrap();
        let (plus, minus) = e.spectral_split(&w).unwrap();
        let kernel = e.kernel_part(&w).unwrap();
        for i in 0..w.len() {
            prop_assert!((plus[i] + minus[i] + kernel[i] - w[i]).abs() <= 1e-9 * (1.0 + norm(&w)));
        }
        prop_assert!(dot(&plus, &minus).abs() <= 1e-9 * (1.0 + dot(&w, &w)));
        // A maps each part into itself with the advertised sign
        prop_assert!(a.quadratic_form(&plus) >= -1e-8 * (1.0 + dot(&w, &w)) * (1.0 + a.max_abs()));
        prop_assert!(a.quadratic_form(&minus) <= 1e-8 * (1.0 + dot(&w, &w)) * (1.0 + a.max_abs()));
    }

    #[test]
    fn solve_inverts_apply((a, x) in matrix_and_vector(6)) {
        // shift far from singular
        let b = a.shifted(100.0);
        let y = b.apply(&x);
        let back = sym_eig(&b).unwrap().solve(&y).unwrap();
        for i in 0..x.len() {
            prop_assert!((back[i] - x[i]).abs() <= 1e-10 * (1.0 + norm(&x)));
        }
    }

    #[test]
    fn eigenvalues_shift_with_identity(a in symmetric(6), c in -20.0..20.0f64) {
        let e = sym_eig(&a).unwrap();
        let s = sym_eig(&a.shifted(c)).unwrap();
        for (l, m) in e.eigenvalues().iter().zip(s.eigenvalues()) {
            prop_assert!((l + c - m).abs() <= 1e-9 * (1.0 + a.max_abs() + c.abs()));
        }
    }

    #[test]
    fn eigenvectors_reconstruct(a in symmetric(8)) {
        let e = sym_eig(&a).unwrap();
        let r = e.reconstruct();
        for i in 0..a.dim() {
            for j in 0..a.dim() {
                prop_assert!((r.get(i, j) - a.get(i, j)).abs() <= 1e-9 * (1.0 + a.max_abs()));
            }
        }
    }

    #[test]
    fn sphere_retractions_are_first_order((x, v) in unit_and_tangent(5), t in 1e-4..0.1f64) {
        for mode in [SphereRetraction::Projective, SphereRetraction::Geodesic] {
            let s = Manifold::sphere(x.len(), mode);
            let y0 = s.retract(&x, &vec![0.0; x.len()]).unwrap();
            prop_assert!(y0.iter().zip(&x).all(|(a, b)| (a - b).abs() <= 4.0 * f64::EPSILON));
            let tv: Vec<f64> = v.iter().map(|c| c * t).collect();
            let y = s.retract(&x, &tv).unwrap();
            prop_assert!((norm(&y) - 1.0).abs() <= 1e-12);
            prop_assert!(s.contains(&y));
            let line: Vec<f64> = x.iter().zip(&tv).map(|(a, b)| a + b).collect();
            let dev: Vec<f64> = y.iter().zip(&line).map(|(a, b)| a - b).collect();
            prop_assert!(norm(&dev) <= t * t);
        }
        // the two retractions agree to second order: gap t³/3 for unit v
        let tv: Vec<f64> = v.iter().map(|c| c * t).collect();
        let p = Manifold::sphere(x.len(), SphereRetraction::Projective).retract(&x, &tv).unwrap();
        let g = Manifold::sphere(x.len(), SphereRetraction::Geodesic).retract(&x, &tv).unwrap();
        let gap: Vec<f64> = p.iter().zip(&g).map(|(a, b)| a - b).collect();
        prop_assert!(norm(&gap) <= 0.34 * t.powi(3) + 1e-15);
    }

    #[test]
    fn sphere_preserves_norm_for_long_steps((x, v) in unit_and_tangent(5), t in 0.0..3.1f64) {
        for mode in [SphereRetraction::Projective, SphereRetraction::Geodesic] {
            let s = Manifold::sphere(x.len(), mode);
            let y = s.retract(&x, &v.iter().map(|c| c * t).collect::<Vec<_>>()).unwrap();
            prop_assert!((norm(&y) - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn ball_steps_below_radius_stay_inside(
        x in prop::collection::vec(-0.57..0.57f64, 3),
        dir in prop::collection::vec(-1.0..1.0f64, 3),
        frac in 0.0..0.999f64,
    ) {
        prop_assume!(norm(&dir) > 1e-3);
        let ball = Manifold::open_ball(3);
        let r = ball.radius(&x).unwrap();
        let v: Vec<f64> = dir.iter().map(|d| d / norm(&dir) * frac * r).collect();
        let y = ball.retract(&x, &v).unwrap();
        prop_assert!(ball.contains(&y));
        prop_assert!(norm(&y) < 1.0);
    }

    #[test]
    fn sphere_hessian_matches_gradient_differences(
        a in symmetric(4).prop_filter("dim >= 2", |a| a.dim() >= 2),
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = a.dim();
        let raw: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        prop_assume!(norm(&raw) > 0.1);
        let x: Vec<f64> = raw.iter().map(|v| v / norm(&raw)).collect();
        let s = Manifold::sphere(d, SphereRetraction::Geodesic);
        let obj = Objective::quadratic(a.clone());
        let u0: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u = s.tangent_project(&x, &u0).unwrap();
        prop_assume!(norm(&u) > 0.05);
        let u: Vec<f64> = u.iter().map(|c| c / norm(&u)).collect();
        let hu = riemannian_hess(&s, &obj, &x).unwrap().apply(&u);
        let h = 1e-5;
        let gp = riemannian_grad(&s, &obj, &s.retract(&x, &u.iter().map(|c| c * h).collect::<Vec<_>>()).unwrap()).unwrap();
        let gm = riemannian_grad(&s, &obj, &s.retract(&x, &u.iter().map(|c| -c * h).collect::<Vec<_>>()).unwrap()).unwrap();
        let dg: Vec<f64> = gp.iter().zip(&gm).map(|(p, m)| (p - m) / (2.0 * h)).collect();
        let dg = s.tangent_project(&x, &dg).unwrap();
        let err: Vec<f64> = hu.iter().zip(&dg).map(|(p, q)| p - q).collect();
        prop_assert!(norm(&err) <= 1e-4 * (1.0 + norm(&hu)));
        // B annihilates x and is symmetric on the tangent space
        let bx = riemannian_hess(&s, &obj, &x).unwrap().apply(&x);
        prop_assert!(norm(&bx) <= 1e-10 * (1.0 + a.max_abs()));
    }

    #[test]
    fn new_q_newton_direction_is_ascent((a, x) in matrix_and_vector(5)) {
        let e = Manifold::euclidean(x.len());
        let obj = Objective::quadratic(a);
        let d = new_q_newton_direction(&e, &obj, &x, &NewQNewtonParams::default());
        if let Ok(d) = d {
            let g = obj.gradient(&x);
            if norm(&g) > 1e-6 {
                prop_assert!(dot(&d.v, &g) > 0.0);
            }
        }
    }

    #[test]
    fn gamma_cap_keeps_steps_inside(norm_v in 0.0..1e6f64, r in 1e-9..10.0f64) {
        let (lambda, clamped) = gamma_step_factor(&Gamma::Linear, norm_v, r).unwrap();
        prop_assert!(lambda > 0.0 && lambda <= 1.0);
        prop_assert!(lambda * norm_v < r / 2.0);
        prop_assert_eq!(clamped, lambda < 1.0);
        // λ is the largest admissible 1/γ_j: the next bracket up would overshoot
        if clamped {
            let j = (1.0 / lambda).round();
            prop_assert!(norm_v / (j - 1.0) >= r / 2.0 * (1.0 - 1e-12));
        }
    }

    #[test]
    fn backtracking_never_increases_f(
        a in symmetric(4),
        x in prop::collection::vec(-0.5..0.5f64, 4),
    ) {
        let d = a.dim();
        let x = &x[..d];
        let ball = Manifold::open_ball(d);
        prop_assume!(ball.contains(x));
        let obj = Objective::quadratic(a);
        let t = run(&ball, &obj, x, &Method::Backtracking(Default::default()), &StopCriteria { max_iters: 30, ..Default::default() }, 0).unwrap();
        for w in t.records.windows(2) {
            prop_assert!(w[1].f_value <= w[0].f_value);
            prop_assert!(w[1].step_norm < w[1].radius_before / 2.0);
            prop_assert!(ball.contains(&w[1].point));
        }
    }

    #[test]
    fn seeded_scenarios_repeat(idx in 0usize..12, seed in any::<u64>()) {
        let id = PROBLEM_IDS[idx];
        let method = if id.ends_with('p') { "r_random_newton" } else { "random_newton" };
        let a = run_scenario(id, method, 20, seed).unwrap();
        let b = run_scenario(id, method, 20, seed).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
