//! Newton-type steppers.
//!
//! All linear algebra happens in an orthonormal frame of the tangent space:
//! on flat manifolds that is the ambient space itself, on the sphere the
//! ambient Hessian extension carries a spurious zero eigenvalue along `x`
//! which must not take part in invertibility tests or spectral splits.

use rand::Rng;

use super::{Error, Gamma, NewQNewtonParams, Result, Step};
use crate::linalg::{sym_eig, SymMatrix};
use crate::manifold::Manifold;
use crate::objective::{riemannian_grad, riemannian_hess, Objective};
use crate::vecops;

struct TangentSystem {
    basis: Option<Vec<Vec<f64>>>,
    grad: Vec<f64>,
    hess: SymMatrix,
}

impl TangentSystem {
    fn new(m: &Manifold, obj: &Objective, x: &[f64]) -> Result<Self> {
        let g = riemannian_grad(m, obj, x)?;
        let h = riemannian_hess(m, obj, x)?;
        if !vecops::all_finite(&g) {
            return Err(Error::NonFinite("gradient"));
        }
        Ok(match m.tangent_basis(x)? {
            None => Self {
                basis: None,
                grad: g,
                hess: h,
            },
            Some(basis) => Self {
                grad: basis.iter().map(|b| vecops::dot(b, &g)).collect(),
                hess: h.congruence(&basis),
                basis: Some(basis),
            },
        })
    }

    fn to_ambient(&self, coords: Vec<f64>) -> Vec<f64> {
        match &self.basis {
            None => coords,
            Some(basis) => {
                let n = basis[0].len();
                let mut out = vec![0.0; n];
                for (c, b) in coords.iter().zip(basis) {
                    for (o, bi) in out.iter_mut().zip(b) {
                        *o += c * bi;
                    }
                }
                out
            }
        }
    }
}

/// Multiplier `λ` keeping `‖λv‖ < r/2`: `λ = 1` when `r = ∞`, otherwise
/// `λ = 1/γ_{j+1}` for the `j` with `γ_j r/2 <= ‖v‖ < γ_{j+1} r/2`.
/// Returns `(λ, λ < 1)`.
pub fn gamma_step_factor(gamma: &Gamma, step_norm: f64, radius: f64) -> Result<(f64, bool)> {
    if radius.is_infinite() {
        return Ok((1.0, false));
    }
    if !step_norm.is_finite() {
        return Err(Error::NonFinite("step norm"));
    }
    let half_r = 0.5 * radius;
    let j = match gamma {
        Gamma::Linear => {
            let mut j = (step_norm / half_r).floor();
            // the rounded quotient may land one bracket low; past 2^52 the
            // brackets are finer than f64 spacing
            while j < 4.5e15 && step_norm / (j + 1.0) >= half_r {
                j += 1.0;
            }
            return Ok((1.0 / (j + 1.0), j > 0.0));
        }
        Gamma::Custom(_) => {
            const SCAN_LIMIT: usize = 10_000_000;
            (0..SCAN_LIMIT)
                .find(|&j| step_norm < gamma.value(j + 1) * half_r)
                .ok_or_else(|| Error::InvalidParameter("gamma does not grow fast enough".into()))?
        }
    };
    let lambda = 1.0 / gamma.value(j + 1);
    Ok((lambda, j > 0))
}

/// The New Q-Newton search direction at `x`.
#[derive(Clone, Debug)]
pub struct NqnDirection {
    /// `v = pr₊ w - pr₋ w` with `w = A⁻¹ grad f(x)`, in ambient coordinates.
    pub v: Vec<f64>,
    pub gradient: Vec<f64>,
    /// Index of the regularizer that made `A` invertible.
    pub regularizer_index: usize,
    pub lambda: f64,
    pub clamped: bool,
}

pub fn new_q_newton_direction(
    m: &Manifold,
    obj: &Objective,
    x: &[f64],
    params: &NewQNewtonParams,
) -> Result<NqnDirection> {
    let sys = TangentSystem::new(m, obj, x)?;
    let gnorm = vecops::norm(&sys.grad);
    let power = gnorm.powf(params.exponent_a);
    let rho = if params.clamp_grad_power {
        power.min(1.0)
    } else {
        power
    };

    let (index, eig) = params
        .deltas
        .iter()
        .enumerate()
        .find_map(|(j, delta)| {
            let eig = sym_eig(&sys.hess.shifted(delta * rho)).ok()?;
            eig.is_invertible().then_some((j, eig))
        })
        .ok_or(Error::NoInvertibleRegularizer)?;

    let w = eig.solve(&sys.grad)?;
    let (plus, minus) = eig.spectral_split(&w)?;
    let v = sys.to_ambient(vecops::sub(&plus, &minus));
    let (lambda, clamped) = gamma_step_factor(&params.gamma, vecops::norm(&v), m.radius(x)?)?;
    Ok(NqnDirection {
        gradient: sys.to_ambient(sys.grad.clone()),
        v,
        regularizer_index: index,
        lambda,
        clamped,
    })
}

/// `R_x(-λ v)` with `v` and `λ` from [`new_q_newton_direction`].
pub fn new_q_newton_step(
    m: &Manifold,
    obj: &Objective,
    x: &[f64],
    params: &NewQNewtonParams,
) -> Result<Step> {
    let dir = new_q_newton_direction(m, obj, x, params)?;
    let step = vecops::scale(&dir.v, -dir.lambda);
    Ok(Step {
        step_norm: vecops::norm(&step),
        point: m.retract(x, &step)?,
        step_size: dir.lambda,
        clamped: dir.clamped,
    })
}

/// Newton direction `Hess f(x)⁻¹ grad f(x)` on the tangent space, in
/// ambient coordinates.
pub fn newton_direction(m: &Manifold, obj: &Objective, x: &[f64]) -> Result<Vec<f64>> {
    let sys = TangentSystem::new(m, obj, x)?;
    let eig = sym_eig(&sys.hess)?;
    let w = eig.solve(&sys.grad)?;
    Ok(sys.to_ambient(w))
}

fn damped_newton(m: &Manifold, obj: &Objective, x: &[f64], kappa: f64) -> Result<Step> {
    let v = vecops::scale(&newton_direction(m, obj, x)?, kappa);
    let (lambda, clamped) = gamma_step_factor(&Gamma::Linear, vecops::norm(&v), m.radius(x)?)?;
    let step = vecops::scale(&v, -lambda);
    Ok(Step {
        step_norm: vecops::norm(&step),
        point: m.retract(x, &step)?,
        step_size: kappa * lambda,
        clamped,
    })
}

/// Newton step, capped by the `γ_j = j` rule when `r(x)` is finite.
pub fn newton_step(m: &Manifold, obj: &Objective, x: &[f64]) -> Result<Step> {
    damped_newton(m, obj, x, 1.0)
}

/// Newton step scaled by `κ ~ uniform(0, 2)` from `rng`, then capped as in
/// [`newton_step`].
pub fn random_newton_step<R: Rng + ?Sized>(
    m: &Manifold,
    obj: &Objective,
    x: &[f64],
    rng: &mut R,
) -> Result<Step> {
    let kappa = 2.0 * rng.gen::<f64>();
    let kappa = if kappa == 0.0 { f64::EPSILON } else { kappa };
    damped_newton(m, obj, x, kappa)
}
