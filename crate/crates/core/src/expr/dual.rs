use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::Serialize;

/// A first-order dual number `primal + tangent·ε` with `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualValue {
    pub primal: f64,
    pub tangent: f64,
}

impl DualValue {
    pub const fn constant(primal: f64) -> Self {
        Self { primal, tangent: 0.0 }
    }

    /// The independent variable, seeded with unit tangent.
    pub const fn variable(primal: f64) -> Self {
        Self { primal, tangent: 1.0 }
    }

    /// Scales the tangent by `d`, treating `0 · ∞` as 0 when the incoming
    /// tangent is exactly zero.
    fn chain(self, primal: f64, d: f64) -> Self {
        let tangent = if self.tangent == 0.0 { 0.0 } else { d * self.tangent };
        Self { primal, tangent }
    }

    pub fn exp(self) -> Self {
        let e = self.primal.exp();
        self.chain(e, e)
    }

    /// Caller guarantees `primal > 0`.
    pub fn ln(self) -> Self {
        self.chain(self.primal.ln(), 1.0 / self.primal)
    }

    /// Caller guarantees `primal >= 0`.
    pub fn sqrt(self) -> Self {
        let s = self.primal.sqrt();
        self.chain(s, 0.5 / s)
    }

    pub fn atan(self) -> Self {
        self.chain(self.primal.atan(), 1.0 / (1.0 + self.primal * self.primal))
    }

    /// `|x|`; at `x = 0` the slope is taken from the side given by `side`
    /// (+1 for the right-hand derivative, −1 for the left-hand one).
    pub fn abs_one_sided(self, side: f64) -> Self {
        let sign = if self.primal > 0.0 {
            1.0
        } else if self.primal < 0.0 {
            -1.0
        } else {
            side
        };
        self.chain(self.primal.abs(), sign)
    }

    /// `self^exponent`. With a constant exponent the base may be any real for
    /// which `powf` is defined; otherwise the base must be positive.
    pub fn pow(self, exponent: Self) -> Self {
        let p = self.primal.powf(exponent.primal);
        let from_base = if self.tangent == 0.0 {
            0.0
        } else {
            exponent.primal * self.primal.powf(exponent.primal - 1.0) * self.tangent
        };
        let from_exponent = if exponent.tangent == 0.0 {
            0.0
        } else {
            p * self.primal.ln() * exponent.tangent
        };
        Self {
            primal: p,
            tangent: from_base + from_exponent,
        }
    }
}

impl Add for DualValue {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            primal: self.primal + rhs.primal,
            tangent: self.tangent + rhs.tangent,
        }
    }
}

impl Sub for DualValue {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self {
            primal: self.primal - rhs.primal,
            tangent: self.tangent - rhs.tangent,
        }
    }
}

impl Mul for DualValue {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self {
            primal: self.primal * rhs.primal,
            tangent: self.tangent * rhs.primal + self.primal * rhs.tangent,
        }
    }
}

impl Div for DualValue {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let q = self.primal / rhs.primal;
        Self {
            primal: q,
            tangent: (self.tangent - q * rhs.tangent) / rhs.primal,
        }
    }
}

impl Neg for DualValue {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            primal: -self.primal,
            tangent: -self.tangent,
        }
    }
}
