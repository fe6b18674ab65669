//! Bracketing root finders for monotone increasing functions.

use crate::error::{Error, Result};

/// Final bracket of a bisection: `f(lo) < 0 <= f(hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Bisects an increasing `f` on `[lo, hi]` until the bracket is narrower than
/// `rtol · (1 + max(|lo|, |hi|))` (or narrower than `abs_width` when given).
pub fn bisect_increasing<F>(mut f: F, lo: f64, hi: f64, rtol: f64, abs_width: Option<f64>) -> Result<Bracket>
where
    F: FnMut(f64) -> Result<f64>,
{
    let f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if !(f_lo < 0.0 && f_hi >= 0.0) {
        return Err(Error::ModelViolation(format!(
            "no sign change on [{lo}, {hi}]: values {f_lo} and {f_hi}"
        )));
    }
    let mut b = Bracket { lo, hi };
    for _ in 0..2200 {
        let width_goal = abs_width.unwrap_or(rtol * (1.0 + b.lo.abs().max(b.hi.abs())));
        if b.width() <= width_goal {
            break;
        }
        let mid = b.midpoint();
        if !(mid > b.lo && mid < b.hi) {
            break;
        }
        if f(mid)? < 0.0 {
            b.lo = mid;
        } else {
            b.hi = mid;
        }
    }
    Ok(b)
}

/// Doubles `start` (which must be positive) until `pred` holds, returning the
/// first value that satisfies it.
pub fn expand_until<F>(mut pred: F, start: f64, max_doublings: u32) -> Result<f64>
where
    F: FnMut(f64) -> Result<bool>,
{
    let mut x = start;
    for _ in 0..=max_doublings {
        if pred(x)? {
            return Ok(x);
        }
        x *= 2.0;
    }
    Err(Error::CapExceeded(format!(
        "bracket expansion stopped at {x} after {max_doublings} doublings"
    )))
}
