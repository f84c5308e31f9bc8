use super::{BacktrackingParams, Step};
use crate::error::{Error, Result};
use crate::manifold::Manifold;
use crate::objective::{riemannian_grad, Objective};
use crate::vecops;

/// Upper bound on `j` in `β^j δ₀`.
pub const MAX_BACKTRACKS: usize = 200;

/// Armijo step `δ = β^j δ₀` for the smallest `j` with `δ‖g‖ < r(x)/2` and
/// `f(R_x(-δg)) - f(x) <= -α δ ‖g‖²`.
pub fn armijo_delta(
    m: &Manifold,
    obj: &Objective,
    x: &[f64],
    params: &BacktrackingParams,
) -> Result<f64> {
    let g = riemannian_grad(m, obj, x)?;
    armijo_search(m, obj, x, obj.value(x), &g, params).map(|(delta, _)| delta)
}

fn armijo_search(
    m: &Manifold,
    obj: &Objective,
    x: &[f64],
    fx: f64,
    g: &[f64],
    params: &BacktrackingParams,
) -> Result<(f64, Vec<f64>)> {
    let gg = vecops::dot(g, g);
    let gnorm = gg.sqrt();
    let half_r = 0.5 * m.radius(x)?;
    let mut delta = params.delta0;
    for _ in 0..=MAX_BACKTRACKS {
        if delta * gnorm < half_r {
            let y = m.retract(x, &vecops::scale(g, -delta))?;
            if obj.value(&y) - fx <= -params.alpha * delta * gg {
                return Ok((delta, y));
            }
        }
        delta *= params.beta;
    }
    Err(Error::LineSearchExhausted(MAX_BACKTRACKS))
}

/// One Riemannian Backtracking GD step `R_x(-δ(x) grad f(x))`.
pub fn backtracking_gd_step(
    m: &Manifold,
    obj: &Objective,
    x: &[f64],
    params: &BacktrackingParams,
) -> Result<Step> {
    let g = riemannian_grad(m, obj, x)?;
    let (delta, point) = armijo_search(m, obj, x, obj.value(x), &g, params)?;
    Ok(Step {
        point,
        step_size: delta,
        step_norm: delta * vecops::norm(&g),
        clamped: false,
    })
}

/// Local Backtracking GD step size: `δ = β^j δ₀` for the smallest `j` with
/// `δ < α/L(x)` and `δ‖g‖ < r(x)/2`. Never evaluates `f`.
pub fn local_bgd_delta(
    m: &Manifold,
    obj: &Objective,
    x: &[f64],
    params: &BacktrackingParams,
) -> Result<f64> {
    let g = riemannian_grad(m, obj, x)?;
    local_delta(m, obj, x, vecops::norm(&g), params)
}

fn local_delta(
    m: &Manifold,
    obj: &Objective,
    x: &[f64],
    gnorm: f64,
    params: &BacktrackingParams,
) -> Result<f64> {
    let l = obj.lipschitz(x).ok_or(Error::MissingLipschitz)?;
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "L(x) must be positive and finite, got {l}"
        )));
    }
    let cap = params.alpha / l;
    let half_r = 0.5 * m.radius(x)?;
    let mut delta = params.delta0;
    // β^j shrinks past any positive cap well before 10·MAX_BACKTRACKS halvings
    for _ in 0..=10 * MAX_BACKTRACKS {
        if delta < cap && delta * gnorm < half_r {
            return Ok(delta);
        }
        delta *= params.beta;
    }
    Err(Error::LineSearchExhausted(10 * MAX_BACKTRACKS))
}

/// Relative resolution of `f` below which Local Backtracking GD stops.
pub const STALL_FACTOR: f64 = 16.0 * f64::EPSILON;

/// One Local Backtracking GD step.
///
/// `f(x)` is evaluated once, only to stop with [`Error::Stalled`] when the
/// guaranteed decrease `α δ ‖g‖²` drops below `STALL_FACTOR · |f(x)|`, where
/// rounding in `f` would swamp it.
pub fn local_bgd_step(
    m: &Manifold,
    obj: &Objective,
    x: &[f64],
    params: &BacktrackingParams,
) -> Result<Step> {
    let g = riemannian_grad(m, obj, x)?;
    let gnorm = vecops::norm(&g);
    let delta = local_delta(m, obj, x, gnorm, params)?;
    let decrease = params.alpha * delta * vecops::dot(&g, &g);
    if decrease <= STALL_FACTOR * obj.value(x).abs() {
        return Err(Error::Stalled(decrease));
    }
    Ok(Step {
        point: m.retract(x, &vecops::scale(&g, -delta))?,
        step_size: delta,
        step_norm: delta * gnorm,
        clamped: false,
    })
}

/// Fixed-rate step `R_x(-lr·g)`, shortened to just below `r(x)/2` when
/// `lr‖g‖` would reach it.
pub fn standard_gd_step(m: &Manifold, obj: &Objective, x: &[f64], lr: f64) -> Result<Step> {
    let g = riemannian_grad(m, obj, x)?;
    if !vecops::all_finite(&g) {
        return Err(Error::NonFinite("gradient"));
    }
    let gnorm = vecops::norm(&g);
    let half_r = 0.5 * m.radius(x)?;
    let (rate, clamped) = if lr * gnorm >= half_r {
        (half_r * (1.0 - 1e-9) / gnorm, true)
    } else {
        (lr, false)
    };
    Ok(Step {
        point: m.retract(x, &vecops::scale(&g, -rate))?,
        step_size: rate,
        step_norm: rate * gnorm,
        clamped,
    })
}
