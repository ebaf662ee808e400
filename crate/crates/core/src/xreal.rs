//! The extended scalars `[0, ∞]` and their finite powers.
//!
//! Arithmetic is exact: finite values are [`BigRational`]s kept in lowest
//! terms, and infinity is its own variant so that the rule `0 · ∞ = 0` is a
//! branch in [`Mul`] rather than an accident of a sentinel encoding.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Builds a rational from a numerator and a nonzero denominator.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parses `"p/q"` or `"p"` into a rational (signs allowed).
pub fn parse_rational(s: &str) -> Result<Rational> {
    let bad = || Error::schema(s, "expected a rational of the form \"p/q\" or \"p\"");
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(Error::schema(s, "zero denominator"));
            }
            Ok(Rational::new(n, d))
        }
        None => {
            let n: BigInt = s.parse().map_err(|_| bad())?;
            Ok(Rational::from_integer(n))
        }
    }
}

/// Formats a rational as `"p/q"`, or `"p"` when integral.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// An element of `[0, ∞]`.
///
/// The derived order puts every finite value below `Infinite`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExtScalar {
    Finite(Rational),
    Infinite,
}

impl ExtScalar {
    /// A finite scalar; negative values are rejected.
    pub fn new(value: Rational) -> Result<Self> {
        if value.is_negative() {
            return Err(Error::precondition(format!(
                "negative value {} in [0, inf]",
                format_rational(&value)
            )));
        }
        Ok(ExtScalar::Finite(value))
    }

    pub fn zero() -> Self {
        ExtScalar::Finite(Rational::zero())
    }

    pub fn one() -> Self {
        ExtScalar::Finite(Rational::one())
    }

    pub fn from_int(n: u64) -> Self {
        ExtScalar::Finite(Rational::from_integer(BigInt::from(n)))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ExtScalar::Finite(r) if r.is_zero())
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtScalar::Infinite)
    }

    pub fn finite(&self) -> Option<&Rational> {
        match self {
            ExtScalar::Finite(r) => Some(r),
            ExtScalar::Infinite => None,
        }
    }

    /// Multiplication by a finite nonnegative rational.
    pub fn scale(&self, t: &Rational) -> Self {
        match self {
            ExtScalar::Finite(r) => ExtScalar::Finite(r * t),
            ExtScalar::Infinite if t.is_zero() => ExtScalar::zero(),
            ExtScalar::Infinite => ExtScalar::Infinite,
        }
    }

    /// `self − other` when it is defined in `[0, ∞]`: `∞ − a = ∞` for finite
    /// `a`, and finite differences must be nonnegative.
    pub fn checked_sub(&self, other: &ExtScalar) -> Option<ExtScalar> {
        match (self, other) {
            (ExtScalar::Infinite, ExtScalar::Finite(_)) => Some(ExtScalar::Infinite),
            (ExtScalar::Finite(a), ExtScalar::Finite(b)) if a >= b => {
                Some(ExtScalar::Finite(a - b))
            }
            _ => None,
        }
    }

    /// The `{0, ∞}` value `lim (1/n)·self`.
    pub fn support_idem(&self) -> Self {
        if self.is_infinite() {
            ExtScalar::Infinite
        } else {
            ExtScalar::zero()
        }
    }

    /// Way-below in `[0, ∞]`: `a ≪ b` iff `a < b` or `a = b = 0`.
    pub fn way_below(&self, other: &ExtScalar) -> bool {
        self < other || (self.is_zero() && other.is_zero())
    }

    pub fn min(self, other: ExtScalar) -> ExtScalar {
        std::cmp::min(self, other)
    }
}

impl From<Rational> for ExtScalar {
    /// Panics on negative input; use [`ExtScalar::new`] for untrusted values.
    fn from(r: Rational) -> Self {
        ExtScalar::new(r).expect("negative rational converted to ExtScalar")
    }
}

impl Add for &ExtScalar {
    type Output = ExtScalar;
    fn add(self, rhs: &ExtScalar) -> ExtScalar {
        match (self, rhs) {
            (ExtScalar::Finite(a), ExtScalar::Finite(b)) => ExtScalar::Finite(a + b),
            _ => ExtScalar::Infinite,
        }
    }
}

impl Add for ExtScalar {
    type Output = ExtScalar;
    fn add(self, rhs: ExtScalar) -> ExtScalar {
        &self + &rhs
    }
}

impl Mul for &ExtScalar {
    type Output = ExtScalar;
    fn mul(self, rhs: &ExtScalar) -> ExtScalar {
        match (self, rhs) {
            (ExtScalar::Finite(a), ExtScalar::Finite(b)) => ExtScalar::Finite(a * b),
            // 0 · ∞ = 0
            (ExtScalar::Finite(a), ExtScalar::Infinite)
            | (ExtScalar::Infinite, ExtScalar::Finite(a))
                if a.is_zero() =>
            {
                ExtScalar::zero()
            }
            _ => ExtScalar::Infinite,
        }
    }
}

impl Mul for ExtScalar {
    type Output = ExtScalar;
    fn mul(self, rhs: ExtScalar) -> ExtScalar {
        &self * &rhs
    }
}

impl std::iter::Sum for ExtScalar {
    fn sum<I: Iterator<Item = ExtScalar>>(iter: I) -> Self {
        iter.fold(ExtScalar::zero(), |acc, x| acc + x)
    }
}

impl fmt::Display for ExtScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtScalar::Finite(r) => f.write_str(&format_rational(r)),
            ExtScalar::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for ExtScalar {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "inf" {
            return Ok(ExtScalar::Infinite);
        }
        let r = parse_rational(s)?;
        if r.is_negative() {
            return Err(Error::schema(s, "negative value in [0, inf]"));
        }
        Ok(ExtScalar::Finite(r))
    }
}

/// A point of `[0, ∞]^n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct ExtVector(pub Vec<ExtScalar>);

impl ExtVector {
    pub fn zeros(n: usize) -> Self {
        ExtVector(vec![ExtScalar::zero(); n])
    }

    pub fn from_ints(values: &[u64]) -> Self {
        ExtVector(values.iter().map(|&v| ExtScalar::from_int(v)).collect())
    }

    pub fn from_rationals(values: &[Rational]) -> Self {
        ExtVector(values.iter().cloned().map(ExtScalar::from).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn check_len(&self, other: &ExtVector) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch { expected: self.len(), found: other.len() });
        }
        Ok(())
    }

    /// `x ≪ y` iff for every coordinate `x_i < y_i` or `x_i = y_i = 0`.
    pub fn way_below(&self, other: &ExtVector) -> Result<bool> {
        self.check_len(other)?;
        Ok(self.0.iter().zip(&other.0).all(|(a, b)| a.way_below(b)))
    }

    /// Coordinatewise order.
    pub fn leq(&self, other: &ExtVector) -> Result<bool> {
        self.check_len(other)?;
        Ok(self.0.iter().zip(&other.0).all(|(a, b)| a <= b))
    }

    pub fn add(&self, other: &ExtVector) -> Result<ExtVector> {
        self.check_len(other)?;
        Ok(ExtVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect()))
    }

    pub fn scale(&self, t: &ExtScalar) -> ExtVector {
        ExtVector(self.0.iter().map(|a| t * a).collect())
    }

    /// The `{0, ∞}`-valued support idempotent, infinite exactly where `self` is.
    pub fn support_idem(&self) -> ExtVector {
        ExtVector(self.0.iter().map(ExtScalar::support_idem).collect())
    }

    /// Dot product with `0 · ∞ = 0`.
    pub fn dot(&self, other: &ExtVector) -> Result<ExtScalar> {
        self.check_len(other)?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }
}

impl fmt::Display for ExtVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("]")
    }
}

impl FromStr for ExtVector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let inner = s
            .trim()
            .strip_prefix('[')
            .and_then(|t| t.strip_suffix(']'))
            .ok_or_else(|| Error::schema(s, "expected a bracketed comma list"))?;
        if inner.trim().is_empty() {
            return Ok(ExtVector::default());
        }
        inner.split(',').map(str::parse).collect::<Result<Vec<_>>>().map(ExtVector)
    }
}

impl PartialOrd for ExtVector {
    /// Coordinatewise partial order; vectors of different length are incomparable.
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        if self.len() != other.len() {
            return None;
        }
        let le = self.0.iter().zip(&other.0).all(|(a, b)| a <= b);
        let ge = self.0.iter().zip(&other.0).all(|(a, b)| a >= b);
        match (le, ge) {
            (true, true) => Some(Ordering::Equal),
            (true, false) => Some(Ordering::Less),
            (false, true) => Some(Ordering::Greater),
            (false, false) => None,
        }
    }
}
