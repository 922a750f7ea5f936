//! Forward-mode numbers carrying exact first and second partial derivatives.
//!
//! [`HyperDual`] tracks a value, two independent first-order directions and
//! their mixed second derivative: `f(a + ε₁ + ε₂ + ε₁ε₂)` with `ε₁² = ε₂² = 0`.
//! [`Dual`] is the first-order special case used to push one directional
//! derivative through the linear algebra in [`crate::linalg`].
//!
//! Elementary functions are written once, generically, through
//! [`Number::chain`], which only needs `f(a)`, `f'(a)` and `f''(a)`.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Arithmetic shared by `f64`, [`Dual`] and [`HyperDual`].
pub trait Number:
    Copy
    + fmt::Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Send
    + Sync
{
    fn from_f64(v: f64) -> Self;

    /// Real (value) part.
    fn re(self) -> f64;

    /// Applies a scalar function given its value and first two derivatives
    /// at `self.re()`.
    fn chain(self, f0: f64, f1: f64, f2: f64) -> Self;

    /// True when every slot is finite.
    fn is_finite(self) -> bool;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }

    fn scale(self, k: f64) -> Self {
        self * Self::from_f64(k)
    }
}

impl Number for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn re(self) -> f64 {
        self
    }
    fn chain(self, f0: f64, _f1: f64, _f2: f64) -> Self {
        f0
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

/// First-order dual number `re + eps·ε`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Dual {
    pub re: f64,
    pub eps: f64,
}

impl Dual {
    pub const fn new(re: f64, eps: f64) -> Self {
        Self { re, eps }
    }

    pub const fn constant(re: f64) -> Self {
        Self { re, eps: 0.0 }
    }
}

impl Number for Dual {
    fn from_f64(v: f64) -> Self {
        Self::constant(v)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn chain(self, f0: f64, f1: f64, _f2: f64) -> Self {
        Self::new(f0, f1 * self.eps)
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.eps.is_finite()
    }
}

impl Add for Dual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.eps + o.eps)
    }
}

impl Sub for Dual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.eps - o.eps)
    }
}

impl Mul for Dual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re, self.re * o.eps + self.eps * o.re)
    }
}

impl Div for Dual {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.re;
        Self::new(
            self.re * inv,
            (self.eps * o.re - self.re * o.eps) * inv * inv,
        )
    }
}

impl Neg for Dual {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.re, -self.eps)
    }
}

/// Hyper-dual number `value + d1·ε₁ + d2·ε₂ + d12·ε₁ε₂`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct HyperDual {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d12: f64,
}

impl HyperDual {
    pub const fn new(value: f64, d1: f64, d2: f64, d12: f64) -> Self {
        Self { value, d1, d2, d12 }
    }

    pub const fn constant(value: f64) -> Self {
        Self::new(value, 0.0, 0.0, 0.0)
    }

    /// A coordinate variable seeded in the requested directions.
    pub const fn variable(value: f64, in_dir1: bool, in_dir2: bool) -> Self {
        Self::new(
            value,
            if in_dir1 { 1.0 } else { 0.0 },
            if in_dir2 { 1.0 } else { 0.0 },
            0.0,
        )
    }
}

impl Number for HyperDual {
    fn from_f64(v: f64) -> Self {
        Self::constant(v)
    }
    fn re(self) -> f64 {
        self.value
    }
    fn chain(self, f0: f64, f1: f64, f2: f64) -> Self {
        Self::new(
            f0,
            f1 * self.d1,
            f1 * self.d2,
            f1 * self.d12 + f2 * self.d1 * self.d2,
        )
    }
    fn is_finite(self) -> bool {
        self.value.is_finite() && self.d1.is_finite() && self.d2.is_finite() && self.d12.is_finite()
    }
}

impl Add for HyperDual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(
            self.value + o.value,
            self.d1 + o.d1,
            self.d2 + o.d2,
            self.d12 + o.d12,
        )
    }
}

impl Sub for HyperDual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(
            self.value - o.value,
            self.d1 - o.d1,
            self.d2 - o.d2,
            self.d12 - o.d12,
        )
    }
}

impl Mul for HyperDual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.value * o.value,
            self.value * o.d1 + self.d1 * o.value,
            self.value * o.d2 + self.d2 * o.value,
            self.value * o.d12 + self.d1 * o.d2 + self.d2 * o.d1 + self.d12 * o.value,
        )
    }
}

impl Div for HyperDual {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Self) -> Self {
        let a = o.value;
        self * o.chain(1.0 / a, -1.0 / (a * a), 2.0 / (a * a * a))
    }
}

impl Neg for HyperDual {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.value, -self.d1, -self.d2, -self.d12)
    }
}

macro_rules! assign_ops {
    ($t:ty) => {
        impl AddAssign for $t {
            fn add_assign(&mut self, o: Self) {
                *self = *self + o;
            }
        }
        impl SubAssign for $t {
            fn sub_assign(&mut self, o: Self) {
                *self = *self - o;
            }
        }
        impl MulAssign for $t {
            fn mul_assign(&mut self, o: Self) {
                *self = *self * o;
            }
        }
    };
}

assign_ops!(Dual);
assign_ops!(HyperDual);

impl fmt::Display for HyperDual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} + {}ε₁ + {}ε₂ + {}ε₁ε₂",
            self.value, self.d1, self.d2, self.d12
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_is_exact() {
        // f = x*y at (2, 3), direction 1 = x, direction 2 = y
        let x = HyperDual::variable(2.0, true, false);
        let y = HyperDual::variable(3.0, false, true);
        let f = x * y;
        assert_eq!(f, HyperDual::new(6.0, 3.0, 2.0, 1.0));
    }

    #[test]
    fn quotient_second_derivative() {
        // f = 1/x, f'' = 2/x^3 at x = 2 -> 0.25
        let x = HyperDual::variable(2.0, true, true);
        let f = HyperDual::constant(1.0) / x;
        assert!((f.value - 0.5).abs() < 1e-15);
        assert!((f.d1 + 0.25).abs() < 1e-15);
        assert!((f.d12 - 0.25).abs() < 1e-15);
    }

    #[test]
    fn constants_have_no_derivative() {
        let c = HyperDual::constant(5.0) * HyperDual::constant(2.0);
        assert_eq!((c.d1, c.d2, c.d12), (0.0, 0.0, 0.0));
    }

    #[test]
    fn dual_division() {
        let x = Dual::new(3.0, 1.0);
        let f = x / (x * x);
        assert!((f.re - 1.0 / 3.0).abs() < 1e-15);
        assert!((f.eps + 1.0 / 9.0).abs() < 1e-15);
    }
}
