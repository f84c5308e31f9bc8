//! Strong local retractions: a radius function `r(x) ∈ (0, ∞]` paired with a
//! retraction `R_x` defined on the tangent ball `{v : ‖v‖ < r(x)}`.
//!
//! Three backends are provided. [`Manifold::Euclidean`] has `r = ∞` and
//! `R_x(v) = x + v`. [`Manifold::OpenSubset`] uses the same identity
//! retraction but a caller-supplied radius (typically the distance to the
//! complement) and membership predicate. [`Manifold::Sphere`] is the unit
//! sphere with `r = π` and either the projective or the geodesic retraction.
//!
//! For open subsets the library cannot check that the supplied radius is
//! upper semicontinuous or that the tangent-ball union is open; that is the
//! caller's obligation.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecops;

/// Sphere membership tolerance on `|‖x‖ - 1|`.
pub const SPHERE_TOL: f64 = 1e-10;
/// Tangency tolerance for sphere retractions, relative to `‖v‖`.
pub const TANGENT_TOL: f64 = 1e-8;

pub type RadiusFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type MembershipFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SphereRetraction {
    /// `R_x(v) = (x + v) / sqrt(1 + ‖v‖²)`
    #[default]
    Projective,
    /// `R_x(v) = cos(‖v‖) x + sin(‖v‖) v / ‖v‖`
    Geodesic,
}

impl std::str::FromStr for SphereRetraction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "projective" => Ok(Self::Projective),
            "geodesic" => Ok(Self::Geodesic),
            other => Err(Error::InvalidParameter(format!(
                "unknown retraction `{other}`"
            ))),
        }
    }
}

/// An open subset of `ℝ^dim` with closed-form radius and membership.
#[derive(Clone)]
pub struct OpenSubset {
    dim: usize,
    name: String,
    member: MembershipFn,
    radius: RadiusFn,
}

impl fmt::Debug for OpenSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OpenSubset")
            .field("dim", &self.dim)
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug)]
pub enum Manifold {
    Euclidean {
        dim: usize,
    },
    OpenSubset(OpenSubset),
    Sphere {
        dim: usize,
        retraction: SphereRetraction,
    },
}

impl Manifold {
    pub fn euclidean(dim: usize) -> Self {
        Self::Euclidean { dim }
    }

    /// Unit sphere in `ℝ^dim` (intrinsic dimension `dim - 1`).
    pub fn sphere(dim: usize, retraction: SphereRetraction) -> Self {
        Self::Sphere { dim, retraction }
    }

    pub fn open_subset(
        dim: usize,
        name: impl Into<String>,
        member: impl Fn(&[f64]) -> bool + Send + Sync + 'static,
        radius: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::OpenSubset(OpenSubset {
            dim,
            name: name.into(),
            member: Arc::new(member),
            radius: Arc::new(radius),
        })
    }

    /// Open unit ball with `r(x) = 1 - ‖x‖`.
    pub fn open_ball(dim: usize) -> Self {
        Self::open_subset(
            dim,
            "open unit ball",
            |x| vecops::norm(x) < 1.0,
            |x| 1.0 - vecops::norm(x),
        )
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            Self::Euclidean { dim } | Self::Sphere { dim, .. } => *dim,
            Self::OpenSubset(s) => s.dim,
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        match self {
            Self::Sphere { dim, .. } => dim - 1,
            _ => self.ambient_dim(),
        }
    }

    /// Flat manifolds have the identity retraction and an identity tangent
    /// projection.
    pub fn is_flat(&self) -> bool {
        !matches!(self, Self::Sphere { .. })
    }

    pub fn describe(&self) -> String {
        match self {
            Self::Euclidean { dim } => format!("R^{dim}"),
            Self::OpenSubset(s) => format!("{} in R^{}", s.name, s.dim),
            Self::Sphere { dim, retraction } => {
                format!("S^{} ({retraction:?} retraction)", dim - 1)
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.ambient_dim() || !vecops::all_finite(x) {
            return false;
        }
        match self {
            Self::Euclidean { .. } => true,
            Self::OpenSubset(s) => (s.member)(x),
            Self::Sphere { .. } => (vecops::norm(x) - 1.0).abs() <= SPHERE_TOL,
        }
    }

    fn require_member(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                actual: x.len(),
            });
        }
        if !self.contains(x) {
            return Err(Error::NotOnManifold);
        }
        Ok(())
    }

    /// The retraction radius `r(x)`; `f64::INFINITY` on Euclidean space.
    pub fn radius(&self, x: &[f64]) -> Result<f64> {
        self.require_member(x)?;
        Ok(match self {
            Self::Euclidean { .. } => f64::INFINITY,
            Self::OpenSubset(s) => (s.radius)(x),
            Self::Sphere { .. } => PI,
        })
    }

    /// `R_x(v)` for `‖v‖ < r(x)`. The `/2` safety margin the optimizers use
    /// is not enforced here.
    pub fn retract(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let r = self.radius(x)?;
        if v.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                actual: v.len(),
            });
        }
        if !vecops::all_finite(v) {
            return Err(Error::NonFinite("tangent vector"));
        }
        let nv = vecops::norm(v);
        if nv >= r {
            return Err(Error::StepTooLarge {
                norm: nv,
                radius: r,
            });
        }
        match self {
            Self::Euclidean { .. } => Ok(vecops::add(x, v)),
            Self::OpenSubset(s) => {
                let y = vecops::add(x, v);
                if (s.member)(&y) {
                    Ok(y)
                } else {
                    Err(Error::LeftDomain)
                }
            }
            Self::Sphere { retraction, .. } => {
                let inner = vecops::dot(v, x);
                if inner.abs() > TANGENT_TOL * nv {
                    return Err(Error::NotTangent(inner.abs()));
                }
                let y = match retraction {
                    // ‖x + v‖ equals sqrt(1 + ‖v‖²) for tangent v; dividing
                    // by the computed norm also absorbs rounding drift.
                    SphereRetraction::Projective => {
                        let y = vecops::add(x, v);
                        let ny = vecops::norm(&y);
                        vecops::scale(&y, 1.0 / ny)
                    }
                    SphereRetraction::Geodesic => {
                        if nv < 1e-14 {
                            return Ok(x.to_vec());
                        }
                        let y = vecops::axpy(&vecops::scale(x, nv.cos()), nv.sin() / nv, v);
                        let ny = vecops::norm(&y);
                        vecops::scale(&y, 1.0 / ny)
                    }
                };
                Ok(y)
            }
        }
    }

    /// Orthogonal projection onto `T_x`; identity on flat manifolds.
    pub fn tangent_project(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.require_member(x)?;
        if u.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                actual: u.len(),
            });
        }
        Ok(match self {
            Self::Sphere { .. } => project_out(x, u),
            _ => u.to_vec(),
        })
    }

    /// Orthonormal basis of `T_x` in ambient coordinates, or `None` when
    /// `T_x` is the whole ambient space.
    pub fn tangent_basis(&self, x: &[f64]) -> Result<Option<Vec<Vec<f64>>>> {
        self.require_member(x)?;
        match self {
            Self::Sphere { .. } => Ok(Some(sphere_tangent_basis(x))),
            _ => Ok(None),
        }
    }
}

/// `u - <u,x> x` for unit `x`
pub(crate) fn project_out(x: &[f64], u: &[f64]) -> Vec<f64> {
    vecops::axpy(u, -vecops::dot(u, x), x)
}

/// Householder reflection sending `x` to `∓e_last`; its remaining columns
/// span `x^⊥`.
fn sphere_tangent_basis(x: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let last = n - 1;
    let s = if x[last] >= 0.0 { 1.0 } else { -1.0 };
    let mut u = x.to_vec();
    u[last] += s;
    let uu = vecops::dot(&u, &u);
    (0..last)
        .map(|j| {
            // column j of I - 2uuᵀ/uᵀu
            let c = 2.0 * u[j] / uu;
            (0..n)
                .map(|i| if i == j { 1.0 } else { 0.0 } - c * u[i])
                .collect()
        })
        .collect()
}
