//! Scalar abstractions.
//!
//! Set measures, lengths and thicknesses are always exact ([`Dyadic`] or
//! [`Rational`]). Function values are generic over [`Scalar`], which is
//! implemented for `f32`, `f64` and [`Rational`], so the same pipeline can run
//! in floating point or fully exact.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Exact rational number.
pub type Rational = BigRational;

/// Field-like scalar used for function values and polynomial coefficients.
pub trait Scalar:
    Clone + PartialOrd + Num + Signed + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// Exact (or nearest) conversion from a rational.
    fn from_rational(r: &Rational) -> Self;
    fn from_f64_lossy(x: f64) -> Self;
    fn to_f64_lossy(&self) -> f64;
    /// `true` when arithmetic on this type is exact.
    fn is_exact() -> bool {
        false
    }
    fn from_i64(x: i64) -> Self {
        Self::from_rational(&Rational::from_integer(BigInt::from(x)))
    }
    /// `2^e`.
    fn pow2(e: i64) -> Self {
        Self::from_rational(&pow2(e))
    }
}

impl Scalar for f64 {
    fn from_rational(r: &Rational) -> Self {
        rational_to_f64(r)
    }
    fn from_f64_lossy(x: f64) -> Self {
        x
    }
    fn to_f64_lossy(&self) -> f64 {
        *self
    }
    fn pow2(e: i64) -> Self {
        2f64.powi(e as i32)
    }
}

impl Scalar for f32 {
    fn from_rational(r: &Rational) -> Self {
        rational_to_f64(r) as f32
    }
    fn from_f64_lossy(x: f64) -> Self {
        x as f32
    }
    fn to_f64_lossy(&self) -> f64 {
        *self as f64
    }
    fn pow2(e: i64) -> Self {
        2f32.powi(e as i32)
    }
}

impl Scalar for Rational {
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
    fn from_f64_lossy(x: f64) -> Self {
        Rational::from_float(x).unwrap_or_else(Rational::zero)
    }
    fn to_f64_lossy(&self) -> f64 {
        rational_to_f64(self)
    }
    fn is_exact() -> bool {
        true
    }
}

/// Nearest `f64` to a rational, robust to numerators and denominators that
/// overflow `f64` on their own.
pub fn rational_to_f64(r: &Rational) -> f64 {
    if let Some(x) = r.to_f64() {
        if x.is_finite() {
            return x;
        }
    }
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    let shift = nb - db - 60;
    let scaled = if shift > 0 {
        Rational::new(r.numer().clone(), r.denom().clone() << shift as usize)
    } else {
        Rational::new(r.numer().clone() << (-shift) as usize, r.denom().clone())
    };
    let q = scaled.to_integer().to_f64().unwrap_or(f64::NAN);
    q * 2f64.powi(shift as i32)
}

/// `2^e` as an exact rational.
pub fn pow2(e: i64) -> Rational {
    if e >= 0 {
        Rational::from_integer(BigInt::one() << e as usize)
    } else {
        Rational::new(BigInt::one(), BigInt::one() << (-e) as usize)
    }
}

/// Exact dyadic rational `mantissa * 2^exp`, kept with an odd mantissa.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Dyadic {
    mantissa: BigInt,
    exp: i64,
}

impl Dyadic {
    pub fn zero() -> Self {
        Dyadic {
            mantissa: BigInt::zero(),
            exp: 0,
        }
    }

    pub fn new(mantissa: BigInt, exp: i64) -> Self {
        let mut d = Dyadic { mantissa, exp };
        d.normalize();
        d
    }

    /// `2^e`.
    pub fn pow2(e: i64) -> Self {
        Dyadic {
            mantissa: BigInt::one(),
            exp: e,
        }
    }

    pub fn from_int(n: i64) -> Self {
        Dyadic::new(BigInt::from(n), 0)
    }

    fn normalize(&mut self) {
        if self.mantissa.is_zero() {
            self.exp = 0;
            return;
        }
        let tz = self.mantissa.trailing_zeros().unwrap_or(0);
        if tz > 0 {
            self.mantissa >>= tz as usize;
            self.exp += tz as i64;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa.is_negative()
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn exponent(&self) -> i64 {
        self.exp
    }

    pub fn to_rational(&self) -> Rational {
        Rational::from_integer(self.mantissa.clone()) * pow2(self.exp)
    }

    pub fn to_f64(&self) -> f64 {
        self.mantissa.to_f64().unwrap_or(f64::NAN) * 2f64.powi(self.exp as i32)
    }

    /// Multiply by `2^e`.
    pub fn shl(&self, e: i64) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        Dyadic {
            mantissa: self.mantissa.clone(),
            exp: self.exp + e,
        }
    }

    /// Interpret a rational as dyadic, if its reduced denominator is a power of two.
    pub fn from_rational(r: &Rational) -> Option<Self> {
        let den = r.denom();
        if den.is_zero() {
            return None;
        }
        let tz = den.trailing_zeros().unwrap_or(0);
        if (den >> tz as usize) != BigInt::one() {
            return None;
        }
        Some(Dyadic::new(r.numer().clone(), -(tz as i64)))
    }

    /// Wire form `{num, log2_den}` with `value = num / 2^log2_den`.
    pub fn to_wire(&self) -> DyadicWire {
        if self.exp >= 0 {
            DyadicWire {
                num: (self.mantissa.clone() << self.exp as usize).to_string(),
                log2_den: 0,
            }
        } else {
            DyadicWire {
                num: self.mantissa.to_string(),
                log2_den: -self.exp,
            }
        }
    }

    pub fn from_wire(w: &DyadicWire) -> Option<Self> {
        let num: BigInt = w.num.parse().ok()?;
        Some(Dyadic::new(num, -w.log2_den))
    }
}

/// Serialized dyadic value. `num` is a decimal string so arbitrarily large
/// numerators survive JSON round trips.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicWire {
    pub num: String,
    pub log2_den: i64,
}

/// Serialized rational value with a float approximation for humans.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalWire {
    pub num: String,
    pub den: String,
    pub approx: f64,
}

impl From<&Rational> for RationalWire {
    fn from(r: &Rational) -> Self {
        RationalWire {
            num: r.numer().to_string(),
            den: r.denom().to_string(),
            approx: rational_to_f64(r),
        }
    }
}

impl RationalWire {
    pub fn to_rational(&self) -> Option<Rational> {
        let n: BigInt = self.num.parse().ok()?;
        let d: BigInt = self.den.parse().ok()?;
        if d.is_zero() {
            return None;
        }
        Some(Rational::new(n, d))
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp >= 0 {
            write!(f, "{}", &self.mantissa << self.exp as usize)
        } else {
            write!(f, "{}/2^{}", self.mantissa, -self.exp)
        }
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let e = self.exp.min(other.exp);
        let a = &self.mantissa << (self.exp - e) as usize;
        let b = &other.mantissa << (other.exp - e) as usize;
        a.cmp(&b)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for &Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &Dyadic) -> Dyadic {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        let e = self.exp.min(rhs.exp);
        let a = &self.mantissa << (self.exp - e) as usize;
        let b = &rhs.mantissa << (rhs.exp - e) as usize;
        Dyadic::new(a + b, e)
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        &self + &rhs
    }
}

impl AddAssign<&Dyadic> for Dyadic {
    fn add_assign(&mut self, rhs: &Dyadic) {
        *self = &*self + rhs;
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic {
            mantissa: -self.mantissa,
            exp: self.exp,
        }
    }
}

impl Sub for &Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: &Dyadic) -> Dyadic {
        self + &(-rhs.clone())
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: Dyadic) -> Dyadic {
        &self - &rhs
    }
}

impl Mul for &Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: &Dyadic) -> Dyadic {
        Dyadic::new(&self.mantissa * &rhs.mantissa, self.exp + rhs.exp)
    }
}

impl std::iter::Sum for Dyadic {
    fn sum<I: Iterator<Item = Dyadic>>(iter: I) -> Dyadic {
        iter.fold(Dyadic::zero(), |acc, x| &acc + &x)
    }
}

/// `ceil(log2(x))` for a positive rational, exactly.
pub fn ceil_log2(x: &Rational) -> i64 {
    assert!(x.is_positive(), "ceil_log2 of non-positive value");
    let nb = x.numer().bits() as i64;
    let db = x.denom().bits() as i64;
    // 2^(nb-db-1) < x < 2^(nb-db+1)
    let mut k = nb - db - 1;
    while pow2(k) < *x {
        k += 1;
    }
    k
}

/// Integer `n^p` compared with `2^k`, used for exact logarithm ceilings.
pub fn ceil_log2_of_power(n: u64, p: u32) -> i64 {
    let v = num_traits::pow(BigInt::from(n), p as usize);
    let bits = v.bits() as i64;
    let is_pow2 = (&v & (&v - BigInt::one())).is_zero();
    if is_pow2 {
        bits - 1
    } else {
        bits
    }
}

/// Positive part of a rational.
pub fn positive_part(x: Rational) -> Rational {
    if x.is_positive() {
        x
    } else {
        Rational::zero()
    }
}

/// Convenience constructor for small rationals.
pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_normalizes_and_compares() {
        let a = Dyadic::new(BigInt::from(12), -4); // 12/16 = 3/4
        assert_eq!(a.mantissa(), &BigInt::from(3));
        assert_eq!(a.exponent(), -2);
        assert_eq!(a.to_rational(), ratio(3, 4));
        let b = Dyadic::pow2(-1);
        assert!(b < a);
        assert_eq!(&a - &b, Dyadic::pow2(-2));
        assert_eq!(&a * &b, Dyadic::new(BigInt::from(3), -3));
    }

    #[test]
    fn dyadic_wire_form() {
        let a = Dyadic::new(BigInt::from(3), -3);
        let w = a.to_wire();
        assert_eq!(w.num, "3");
        assert_eq!(w.log2_den, 3);
        assert_eq!(Dyadic::from_wire(&w).unwrap(), a);
        let big = Dyadic::pow2(3);
        assert_eq!(big.to_wire().num, "8");
        assert_eq!(big.to_wire().log2_den, 0);
    }

    #[test]
    fn rational_to_dyadic_only_when_power_of_two_denominator() {
        assert!(Dyadic::from_rational(&ratio(1, 3)).is_none());
        assert_eq!(
            Dyadic::from_rational(&ratio(5, 8)).unwrap(),
            Dyadic::new(BigInt::from(5), -3)
        );
    }

    #[test]
    fn ceil_log2_exact() {
        assert_eq!(ceil_log2(&ratio(1, 1)), 0);
        assert_eq!(ceil_log2(&ratio(3, 1)), 2);
        assert_eq!(ceil_log2(&ratio(4, 1)), 2);
        assert_eq!(ceil_log2(&ratio(1, 3)), -1);
        assert_eq!(ceil_log2(&ratio(1, 4)), -2);
        assert_eq!(ceil_log2_of_power(16, 100), 400);
        assert_eq!(ceil_log2_of_power(10, 100), 333);
    }

    #[test]
    fn huge_rationals_convert_to_f64() {
        let r = Rational::new(BigInt::one() << 2000usize, (BigInt::one() << 1999usize) * 3);
        assert!((rational_to_f64(&r) - 2.0 / 3.0).abs() < 1e-15);
    }
}
