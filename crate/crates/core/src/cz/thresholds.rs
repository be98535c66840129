use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{ceil_log2_of_power, Dyadic};

/// `Φ(t) = t ln ln(e² + t)`.
pub fn phi(t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::OutOfRange(format!("phi needs t >= 0, got {t}")));
    }
    Ok(phi_unchecked(t))
}

pub(crate) fn phi_unchecked(t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    t * (std::f64::consts::E.powi(2) + t).ln().ln()
}

/// Logarithm used in the scale threshold.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogBase {
    #[default]
    Natural,
    Two,
    Ten,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Two => x.log2(),
            LogBase::Ten => x.log10(),
        }
    }
}

impl std::str::FromStr for LogBase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "natural" | "e" | "ln" => Ok(LogBase::Natural),
            "two" | "2" => Ok(LogBase::Two),
            "ten" | "10" => Ok(LogBase::Ten),
            other => Err(Error::Malformed(format!("unknown log base {other:?}"))),
        }
    }
}

/// `⌈100 log₂ n⌉`, exact.
pub fn kappa(n: i64) -> Result<i64> {
    if n < 10 {
        return Err(Error::OutOfRange(format!("kappa needs n >= 10, got {n}")));
    }
    Ok(ceil_log2_of_power(n as u64, 100))
}

/// The integer `k` with `2^{k-1} < x ≤ 2^k`, where
/// `x = max(l(q), (2^n log(10+n) Θ)^{1/(d-1)})`.
///
/// The comparison is done on `x^{d-1}` against powers `2^{k(d-1)}`; the
/// `Θ` term is evaluated in floating point with the boundary re-checked in
/// both directions, so exact powers of two land on the right-hand `≤`.
pub fn scale_threshold(theta: &Dyadic, n: i64, q_scale: i32, dim: usize, log_base: LogBase) -> Result<i32> {
    if theta.is_zero() || theta.is_negative() {
        return Err(Error::EmptySet("scale threshold"));
    }
    let e = (dim - 1) as f64;
    // y = 2^n log(10+n) Θ = m · 2^(n + exp) · log(10+n)
    let m = theta.to_f64_mantissa();
    let log_y = (n + theta.exponent()) as f64 + m.log2() + log_base.log((10 + n) as f64).log2();
    let le = |k: i64| -> bool { log_y <= k as f64 * e };
    let mut k = (log_y / e).ceil() as i64;
    while k > i32::MIN as i64 && le(k - 1) {
        k -= 1;
    }
    while !le(k) {
        k += 1;
    }
    Ok((k as i32).max(q_scale))
}

impl Dyadic {
    /// Mantissa as `f64` (exact for moderate mantissas).
    fn to_f64_mantissa(&self) -> f64 {
        crate::scalar::rational_to_f64(&crate::scalar::Rational::from_integer(self.mantissa().clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_values() {
        assert_eq!(phi(0.0).unwrap(), 0.0);
        // ln ln(e² + 1) to 40 digits: 0.75467869034348848723...
        assert!((phi(1.0).unwrap() - 0.754_678_690_343_488_5).abs() < 1e-14);
        assert!(phi(-1.0).is_err());
        assert!(phi(f64::NAN).is_err());
    }

    #[test]
    fn kappa_values() {
        assert_eq!(kappa(16).unwrap(), 400);
        assert_eq!(kappa(10).unwrap(), 333);
        assert!(kappa(9).is_err());
        let mut prev = 0;
        for n in 10..200 {
            let k = kappa(n).unwrap();
            assert!(k >= prev);
            prev = k;
        }
    }

    #[test]
    fn threshold_examples() {
        // Θ term below l(q) = 1
        assert_eq!(scale_threshold(&Dyadic::pow2(-40), 10, 0, 2, LogBase::Natural).unwrap(), 0);
        // x = ln 20
        assert_eq!(scale_threshold(&Dyadic::pow2(-10), 10, -2, 2, LogBase::Natural).unwrap(), 2);
        // x = 2^6 · log₂ 16 · 2^-6 = 4 exactly, so k = 2 by the right-hand convention
        assert_eq!(scale_threshold(&Dyadic::pow2(-6), 6, -2, 2, LogBase::Two).unwrap(), 2);
        assert!(scale_threshold(&Dyadic::zero(), 10, 0, 2, LogBase::Natural).is_err());
    }

    #[test]
    fn threshold_monotone_in_theta() {
        let mut prev = i32::MIN;
        for e in -30..0 {
            let k = scale_threshold(&Dyadic::pow2(e), 12, -3, 3, LogBase::Natural).unwrap();
            assert!(k >= prev);
            prev = k;
        }
    }
}
