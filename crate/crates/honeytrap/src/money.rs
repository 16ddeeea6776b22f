//! Exact money arithmetic in integer minor units (cents).
//!
//! Deal economics divides offer costs across visits, so derived quantities
//! are exact rationals over cents ([`MoneyExact`]); floats never enter the
//! accounting. Display rounding happens only at output.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// An amount of money in integer minor units (cents).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Money(pub i64);

/// Exact rational money in minor units, e.g. 500/3 cents.
pub type MoneyExact = Ratio<i64>;

impl Money {
    pub const ZERO: Money = Money(0);

    /// Whole-dollar constructor: `Money::dollars(5)` is 500 cents.
    pub fn dollars(d: i64) -> Money {
        Money(d * 100)
    }

    pub fn cents(c: i64) -> Money {
        Money(c)
    }

    /// Exact rational view of this amount.
    pub fn exact(self) -> MoneyExact {
        Ratio::from_integer(self.0)
    }

    /// Exact division by a positive integer count.
    pub fn div_exact(self, n: i64) -> MoneyExact {
        Ratio::new(self.0, n)
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl Mul<i64> for Money {
    type Output = Money;
    fn mul(self, rhs: i64) -> Money {
        Money(self.0 * rhs)
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}${}.{:02}", abs / 100, abs % 100)
    }
}

/// Renders an exact rational amount of minor units as a fixed-point decimal
/// with four places, rounding half away from zero. Used only at output
/// boundaries (CSV cells); in-memory values stay exact.
pub fn format_exact_minor(v: MoneyExact) -> String {
    let scaled = v * Ratio::from_integer(10_000);
    let n = *scaled.numer();
    let d = *scaled.denom();
    let q = n / d;
    let r = n % d;
    let rounded = if 2 * r.abs() >= d.abs() {
        q + n.signum() * d.signum()
    } else {
        q
    };
    let sign = if rounded < 0 { "-" } else { "" };
    let abs = rounded.unsigned_abs();
    format!("{sign}{}.{:04}", abs / 10_000, abs % 10_000)
}
