//! Root finding for the double-interval equilibrium and its large-`V₂` limit.
//!
//! Both left-hand sides are sums of `f′` at shifted arguments, hence strictly
//! increasing, and are solved by bisection.

use serde::Serialize;

use crate::density::DensityModel;
use crate::error::{Error, Result};
use crate::extended::ExtendedReal;
use crate::roots::{bisect_increasing, Bracket};
use crate::settings::SolverSettings;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumSolution {
    /// Left endpoint of the double interval in volume coordinate.
    pub v_tilde: f64,
    pub residual: f64,
    pub bracket: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VStarSolution {
    pub v_star: f64,
    pub residual: f64,
}

fn check_volumes(v1: f64, v2: f64) -> Result<()> {
    if !(v1 > 0.0 && v1.is_finite()) || !(v2 >= v1 && v2.is_finite()) {
        return Err(Error::InvalidArgument(format!("volumes must satisfy 0 < V1 <= V2, got V1 = {v1}, V2 = {v2}")));
    }
    Ok(())
}

fn check_residual(residual: f64, scale: f64, s: &SolverSettings, what: &str) -> Result<()> {
    if residual.abs() > s.residual_rtol * scale {
        return Err(Error::ModelViolation(format!(
            "{what}: residual {residual:e} exceeds {:e}",
            s.residual_rtol * scale
        )));
    }
    Ok(())
}

/// Solves `f′(Ṽ) + f′(Ṽ+V₁) + f′(Ṽ+V₁+V₂) = 0` on `[−(V₁+V₂)/2, 0]`.
pub fn solve_equilibrium(model: &DensityModel, v1: f64, v2: f64, s: &SolverSettings) -> Result<EquilibriumSolution> {
    check_volumes(v1, v2)?;
    let lhs = |t: f64| -> Result<f64> { Ok(model.slope(t)? + model.slope(t + v1)? + model.slope(t + v1 + v2)?) };
    let floor = -0.5 * (v1 + v2);
    // At V₁ = V₂ the root sits on the left endpoint; nudge it outward until
    // the sign test holds.
    let mut lo = floor;
    let mut nudge = 4.0 * f64::EPSILON * (1.0 + floor.abs());
    let mut lo_value = lhs(lo)?;
    for _ in 0..8 {
        if lo_value < 0.0 {
            break;
        }
        lo = floor - nudge;
        nudge *= 16.0;
        lo_value = lhs(lo)?;
    }
    let Bracket { lo: b_lo, hi: b_hi } = bisect_increasing(lhs, lo, 0.0, s.bisect_rtol, None)?;
    let v_tilde = (0.5 * (b_lo + b_hi)).max(floor);
    let residual = lhs(v_tilde)?;
    let scale = 1f64.max(lo_value.abs()).max(lhs(0.0)?.abs());
    check_residual(residual, scale, s, "equilibrium")?;
    Ok(EquilibriumSolution {
        v_tilde,
        residual,
        bracket: (b_lo, b_hi),
    })
}

/// Solves `f′(V*) + f′(V*+V₁) = −L` on `(−∞, −V₁]`.
pub fn solve_v_star(model: &DensityModel, l: ExtendedReal, v1: f64, s: &SolverSettings) -> Result<VStarSolution> {
    let Some(l) = l.as_finite() else {
        return Err(Error::Undefined(format!("V* needs a finite L, got L = {l}")));
    };
    if !(v1 > 0.0 && v1.is_finite()) {
        return Err(Error::InvalidArgument(format!("V1 must be positive, got {v1}")));
    }
    let lhs = |t: f64| -> Result<f64> { Ok(model.slope(t)? + model.slope(t + v1)? + l) };
    let hi = -v1;
    let mut reach = 1.0;
    let mut lo = hi - reach;
    let mut lo_value = lhs(lo)?;
    let mut doublings = 0;
    while lo_value >= 0.0 {
        doublings += 1;
        if doublings > s.max_doublings {
            return Err(Error::CapExceeded(format!("V* bracket reached {lo} without a sign change")));
        }
        reach *= 2.0;
        lo = hi - reach;
        lo_value = lhs(lo)?;
    }
    let b = bisect_increasing(lhs, lo, hi, s.bisect_rtol, None)?;
    let v_star = b.midpoint().min(hi);
    let residual = lhs(v_star)?;
    let scale = 1f64.max(l.abs()).max(lo_value.abs()).max(lhs(hi)?.abs());
    check_residual(residual, scale, s, "V*")?;
    Ok(VStarSolution { v_star, residual })
}
