//! Objectives as bundles of ambient value, gradient and Hessian, plus the
//! conversions to Riemannian gradient and Hessian on each manifold backend.

mod catalog;

use std::fmt;
use std::sync::Arc;

pub use catalog::{
    builtin_problems, example7_matrix, example8_matrix, find_problem, quadratic_on_ball,
    quadratic_on_sphere, Problem, CATALOG_DIVERGENCE_NORM, PROBLEM_IDS,
};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::manifold::{project_out, Manifold};
use crate::vecops;

pub type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type HessFn = Arc<dyn Fn(&[f64]) -> SymMatrix + Send + Sync>;
pub type LipschitzFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Safety factor applied to the sampled Hessian norm in [`default_lipschitz`].
pub const LIPSCHITZ_SAFETY: f64 = 1.5;
/// Number of sample points used by [`default_lipschitz`].
pub const LIPSCHITZ_SAMPLES: usize = 8;

/// A twice-differentiable objective in ambient coordinates.
#[derive(Clone)]
pub struct Objective {
    dim: usize,
    value: ValueFn,
    grad: GradFn,
    hess: HessFn,
    lipschitz: Option<LipschitzFn>,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("dim", &self.dim)
            .field("lipschitz", &self.lipschitz.is_some())
            .finish_non_exhaustive()
    }
}

impl Objective {
    pub fn new(
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        hess: impl Fn(&[f64]) -> SymMatrix + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            value: Arc::new(value),
            grad: Arc::new(grad),
            hess: Arc::new(hess),
            lipschitz: None,
        }
    }

    /// Attaches a closed-form `L(x)` for Local Backtracking GD.
    pub fn with_lipschitz(mut self, l: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.lipschitz = Some(Arc::new(l));
        self
    }

    pub fn without_lipschitz(mut self) -> Self {
        self.lipschitz = None;
        self
    }

    /// `f_A(x) = <Ax, x>/2`
    pub fn quadratic(a: SymMatrix) -> Self {
        QuadraticForm::new(a).into_objective()
    }

    /// `-f`, with the Lipschitz bound carried over unchanged.
    pub fn negated(&self) -> Self {
        let (value, grad, hess) = (self.value.clone(), self.grad.clone(), self.hess.clone());
        Self {
            dim: self.dim,
            value: Arc::new(move |x| -value(x)),
            grad: Arc::new(move |x| vecops::scale(&grad(x), -1.0)),
            hess: Arc::new(move |x| hess(x).scaled(-1.0)),
            lipschitz: self.lipschitz.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.grad)(x)
    }

    pub fn hessian(&self, x: &[f64]) -> SymMatrix {
        (self.hess)(x)
    }

    pub fn lipschitz(&self, x: &[f64]) -> Option<f64> {
        self.lipschitz.as_ref().map(|l| l(x))
    }

    pub fn has_lipschitz(&self) -> bool {
        self.lipschitz.is_some()
    }
}

/// `f_A(x) = <Ax, x>/2` for symmetric `A`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm {
    a: SymMatrix,
}

impl QuadraticForm {
    pub fn new(a: SymMatrix) -> Self {
        Self { a }
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.a
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.a.quadratic_form(x)
    }

    pub fn into_objective(self) -> Objective {
        let (a1, a2, a3) = (self.a.clone(), self.a.clone(), self.a);
        Objective::new(
            a1.dim(),
            move |x| 0.5 * a1.quadratic_form(x),
            move |x| a2.apply(x),
            move |_| a3.clone(),
        )
    }
}

fn check_point(m: &Manifold, obj: &Objective, x: &[f64]) -> Result<()> {
    if obj.dim() != m.ambient_dim() || x.len() != m.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: m.ambient_dim(),
            actual: if obj.dim() != m.ambient_dim() {
                obj.dim()
            } else {
                x.len()
            },
        });
    }
    if !m.contains(x) {
        return Err(Error::NotOnManifold);
    }
    Ok(())
}

/// Riemannian gradient under the induced metric: `∇f` on flat manifolds,
/// `∇f - <∇f,x>x` on the sphere (for `f_A` this is `Ax - <Ax,x>x`).
pub fn riemannian_grad(m: &Manifold, obj: &Objective, x: &[f64]) -> Result<Vec<f64>> {
    check_point(m, obj, x)?;
    let g = obj.gradient(x);
    if m.is_flat() {
        return Ok(g);
    }
    // a second pass removes the rounding residue along x left by the first
    Ok(project_out(x, &project_out(x, &g)))
}

/// Riemannian Hessian as a symmetric ambient matrix.
///
/// On the sphere this is the extension `B[v] = Hess f(x)[v - <v,x>x]` with
/// `Hess f(x)[u] = P ∇²f(x) u - <∇f(x),x> u` for tangent `u` and
/// `P = I - xxᵀ`, i.e. `B = P ∇²f P - <∇f,x> P`. `B` maps `T_x` into itself
/// and annihilates `x`.
pub fn riemannian_hess(m: &Manifold, obj: &Objective, x: &[f64]) -> Result<SymMatrix> {
    check_point(m, obj, x)?;
    let h = obj.hessian(x);
    if m.is_flat() {
        return Ok(h);
    }
    let n = x.len();
    let c = vecops::dot(&obj.gradient(x), x);
    let columns: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let pe = project_out(x, &e);
            let hpe = h.apply(&pe);
            vecops::axpy(&project_out(x, &hpe), -c, &pe)
        })
        .collect();
    SymMatrix::from_fn(n, |i, j| 0.5 * (columns[j][i] + columns[i][j]))
}

/// Central-difference approximation of the ambient gradient.
pub fn fd_gradient(obj: &Objective, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let fp = obj.value(&probe);
            probe[i] = x[i] - h;
            let fm = obj.value(&probe);
            probe[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Sampled upper bound for `L(x)`: `1.5 ×` the largest Hessian spectral norm
/// seen at [`LIPSCHITZ_SAMPLES`] points within `min(r(x), 1)` of `x`.
///
/// On the sphere the ambient Hessian is augmented by `2‖∇f‖` to account for
/// the curvature of the retraction curves. Not a guaranteed bound; objectives
/// with a closed-form `L(x)` should supply it via
/// [`Objective::with_lipschitz`].
pub fn default_lipschitz(m: &Manifold, obj: &Objective, x: &[f64]) -> Result<f64> {
    let r = m.radius(x)?.min(1.0);
    let n = x.len();
    let mut worst = hess_bound(m, obj, x)?;
    for k in 0..LIPSCHITZ_SAMPLES {
        let mut z = x.to_vec();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let reach = if (k / 2) % 2 == 0 { 0.9 } else { 0.45 };
        z[(k / 2) % n] += sign * reach * r;
        if let Manifold::Sphere { .. } = m {
            let nz = vecops::norm(&z);
            z = vecops::scale(&z, 1.0 / nz);
        }
        if m.contains(&z) {
            worst = worst.max(hess_bound(m, obj, &z)?);
        }
    }
    Ok((LIPSCHITZ_SAFETY * worst).max(f64::MIN_POSITIVE.sqrt()))
}

fn hess_bound(m: &Manifold, obj: &Objective, z: &[f64]) -> Result<f64> {
    let h = obj.hessian(z).spectral_norm()?;
    Ok(if m.is_flat() {
        h
    } else {
        h + 2.0 * vecops::norm(&obj.gradient(z))
    })
}

/// `L(x)` from the objective if present, otherwise [`default_lipschitz`].
pub fn lipschitz_bound(m: &Manifold, obj: &Objective, x: &[f64]) -> Result<f64> {
    match obj.lipschitz(x) {
        Some(l) if l > 0.0 && l.is_finite() => Ok(l),
        Some(_) => Err(Error::InvalidParameter(
            "L(x) must be positive and finite".into(),
        )),
        None => default_lipschitz(m, obj, x),
    }
}
