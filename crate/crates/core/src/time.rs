//! Integer nanosecond time base.
//!
//! Every schedule quantity in the crate is an exact count of nanoseconds, so
//! ceiling and floor terms in the latency bounds never flip because of
//! floating-point rounding.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NANOS_PER_MICRO: i64 = 1_000;
pub const NANOS_PER_MILLI: i64 = 1_000_000;
pub const NANOS_PER_SEC: i64 = 1_000_000_000;

/// A signed duration or instant in whole nanoseconds.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Nanos(pub i64);

impl Nanos {
    pub const ZERO: Nanos = Nanos(0);
    pub const MAX: Nanos = Nanos(i64::MAX);

    pub const fn new(ns: i64) -> Self {
        Nanos(ns)
    }

    pub const fn from_micros(us: i64) -> Self {
        Nanos(us * NANOS_PER_MICRO)
    }

    pub const fn from_millis(ms: i64) -> Self {
        Nanos(ms * NANOS_PER_MILLI)
    }

    pub const fn from_secs(s: i64) -> Self {
        Nanos(s * NANOS_PER_SEC)
    }

    /// Smallest whole number of nanoseconds not below `ns`.
    pub fn from_f64_ceil(ns: f64) -> Self {
        Nanos(ns.ceil() as i64)
    }

    pub const fn get(self) -> i64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / NANOS_PER_SEC as f64
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    /// Mathematical ceiling of `self / rhs`; `rhs` must be positive.
    ///
    /// An exact quotient is returned unchanged, it never rounds up.
    pub fn div_ceil(self, rhs: Nanos) -> i64 {
        debug_assert!(rhs.0 > 0);
        let q = self.0.div_euclid(rhs.0);
        if self.0.rem_euclid(rhs.0) == 0 {
            q
        } else {
            q + 1
        }
    }

    /// Mathematical floor of `self / rhs`; `rhs` must be positive.
    pub fn div_floor(self, rhs: Nanos) -> i64 {
        debug_assert!(rhs.0 > 0);
        self.0.div_euclid(rhs.0)
    }

    pub fn rem_euclid(self, rhs: Nanos) -> Nanos {
        Nanos(self.0.rem_euclid(rhs.0))
    }

    pub fn abs(self) -> Nanos {
        Nanos(self.0.abs())
    }
}

impl Add for Nanos {
    type Output = Nanos;
    fn add(self, rhs: Nanos) -> Nanos {
        Nanos(self.0 + rhs.0)
    }
}

impl Sub for Nanos {
    type Output = Nanos;
    fn sub(self, rhs: Nanos) -> Nanos {
        Nanos(self.0 - rhs.0)
    }
}

impl Mul<i64> for Nanos {
    type Output = Nanos;
    fn mul(self, rhs: i64) -> Nanos {
        Nanos(self.0 * rhs)
    }
}

impl Mul<Nanos> for i64 {
    type Output = Nanos;
    fn mul(self, rhs: Nanos) -> Nanos {
        Nanos(self * rhs.0)
    }
}

impl Neg for Nanos {
    type Output = Nanos;
    fn neg(self) -> Nanos {
        Nanos(-self.0)
    }
}

impl AddAssign for Nanos {
    fn add_assign(&mut self, rhs: Nanos) {
        self.0 += rhs.0;
    }
}

impl SubAssign for Nanos {
    fn sub_assign(&mut self, rhs: Nanos) {
        self.0 -= rhs.0;
    }
}

impl Sum for Nanos {
    fn sum<I: Iterator<Item = Nanos>>(iter: I) -> Nanos {
        Nanos(iter.map(|n| n.0).sum())
    }
}

impl fmt::Display for Nanos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.0;
        let abs = v.unsigned_abs();
        let (scale, unit) = if abs >= NANOS_PER_SEC as u64 {
            (NANOS_PER_SEC as u64, "s")
        } else if abs >= NANOS_PER_MILLI as u64 {
            (NANOS_PER_MILLI as u64, "ms")
        } else if abs >= NANOS_PER_MICRO as u64 {
            (NANOS_PER_MICRO as u64, "us")
        } else {
            (1, "ns")
        };
        let sign = if v < 0 { "-" } else { "" };
        let whole = abs / scale;
        let frac = abs % scale;
        if frac == 0 {
            write!(f, "{sign}{whole}{unit}")
        } else {
            let width = scale.ilog10() as usize;
            let digits = format!("{frac:0width$}");
            write!(f, "{sign}{whole}.{}{unit}", digits.trim_end_matches('0'))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseNanosError {
    #[error("duration `{0}` has no unit suffix (expected ns, us, ms or s)")]
    MissingUnit(String),
    #[error("duration `{0}` has an unknown unit")]
    UnknownUnit(String),
    #[error("duration `{0}` is not a number")]
    BadNumber(String),
    #[error("duration `{0}` is finer than one nanosecond")]
    SubNanosecond(String),
    #[error("duration `{0}` overflows")]
    Overflow(String),
}

impl FromStr for Nanos {
    type Err = ParseNanosError;

    /// Parses `<decimal><unit>` with unit one of `ns`, `us`, `µs`, `ms`, `s`.
    /// Bare numbers are rejected.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let split = t
            .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == '-' || c == '+'))
            .ok_or_else(|| ParseNanosError::MissingUnit(s.to_string()))?;
        let (num, unit) = t.split_at(split);
        let scale: i64 = match unit.trim() {
            "ns" => 1,
            "us" | "µs" => NANOS_PER_MICRO,
            "ms" => NANOS_PER_MILLI,
            "s" => NANOS_PER_SEC,
            _ => return Err(ParseNanosError::UnknownUnit(s.to_string())),
        };
        let (negative, digits) = match num.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, num.strip_prefix('+').unwrap_or(num)),
        };
        let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(ParseNanosError::BadNumber(s.to_string()));
        }
        let all_digits = |p: &str| p.chars().all(|c| c.is_ascii_digit());
        if !all_digits(int_part) || !all_digits(frac_part) {
            return Err(ParseNanosError::BadNumber(s.to_string()));
        }
        let overflow = || ParseNanosError::Overflow(s.to_string());
        let whole: i64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| overflow())?
        };
        let mut total = whole.checked_mul(scale).ok_or_else(overflow)?;
        let mut place = scale;
        for c in frac_part.chars() {
            let d = c.to_digit(10).unwrap() as i64;
            if place % 10 != 0 {
                if d != 0 {
                    return Err(ParseNanosError::SubNanosecond(s.to_string()));
                }
                continue;
            }
            place /= 10;
            total = total.checked_add(d * place).ok_or_else(overflow)?;
        }
        Ok(Nanos(if negative { -total } else { total }))
    }
}
