//! Exact-or-real scalars.
//!
//! Ratios and scales given as rationals stay exact so that boundary decisions
//! (is `r` exactly `r_k |J|`?) are made without rounding. Irrational values
//! (for instance `3^(-log 3 / log 2)`) are carried as `f64`.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// A real number that is exact whenever its inputs were.
#[derive(Clone, Debug, PartialEq)]
pub enum Scalar {
    Exact(BigRational),
    Real(f64),
}

impl Scalar {
    pub fn int(v: i64) -> Self {
        Scalar::Exact(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Scalar::Exact(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn zero() -> Self {
        Scalar::int(0)
    }

    pub fn one() -> Self {
        Scalar::int(1)
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Scalar::Exact(q) => Some(q),
            Scalar::Real(_) => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(q) => rational_to_f64(q),
            Scalar::Real(x) => *x,
        }
    }

    /// Natural logarithm, accurate for rationals far outside the `f64` range.
    pub fn ln(&self) -> f64 {
        match self {
            Scalar::Exact(q) => ln_rational(q),
            Scalar::Real(x) => x.ln(),
        }
    }

    pub fn is_positive(&self) -> bool {
        match self {
            Scalar::Exact(q) => q.is_positive(),
            Scalar::Real(x) => *x > 0.0,
        }
    }

    /// Integer value when the scalar is an exact integer.
    pub fn as_integer(&self) -> Option<BigInt> {
        match self {
            Scalar::Exact(q) if q.is_integer() => Some(q.to_integer()),
            Scalar::Real(x) if x.fract() == 0.0 && x.abs() < 9.0e15 => Some(BigInt::from(*x as i64)),
            _ => None,
        }
    }

    pub fn add(&self, other: &Scalar) -> Scalar {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a + b),
            _ => Scalar::Real(self.to_f64() + other.to_f64()),
        }
    }

    pub fn sub(&self, other: &Scalar) -> Scalar {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a - b),
            _ => Scalar::Real(self.to_f64() - other.to_f64()),
        }
    }

    pub fn mul(&self, other: &Scalar) -> Scalar {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a * b),
            _ => Scalar::Real(self.to_f64() * other.to_f64()),
        }
    }

    /// Division; `None` on an exact zero divisor.
    pub fn div(&self, other: &Scalar) -> Option<Scalar> {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => {
                if b.is_zero() {
                    None
                } else {
                    Some(Scalar::Exact(a / b))
                }
            }
            _ => {
                let d = other.to_f64();
                if d == 0.0 {
                    None
                } else {
                    Some(Scalar::Real(self.to_f64() / d))
                }
            }
        }
    }

    pub fn neg(&self) -> Scalar {
        match self {
            Scalar::Exact(a) => Scalar::Exact(-a),
            Scalar::Real(x) => Scalar::Real(-x),
        }
    }

    /// Integer power. Exact for exact bases.
    pub fn powi(&self, e: i64) -> Option<Scalar> {
        match self {
            Scalar::Exact(a) => {
                if a.is_zero() && e < 0 {
                    return None;
                }
                let base = if e < 0 { a.recip() } else { a.clone() };
                let mut acc = BigRational::one();
                let mut b = base;
                let mut n = e.unsigned_abs();
                while n > 0 {
                    if n & 1 == 1 {
                        acc *= &b;
                    }
                    b = &b * &b;
                    n >>= 1;
                }
                Some(Scalar::Exact(acc))
            }
            Scalar::Real(x) => Some(Scalar::Real(x.powi(e as i32))),
        }
    }

    /// Comparison; exact when both sides are exact.
    pub fn partial_cmp_scalar(&self, other: &Scalar) -> Option<Ordering> {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Some(a.cmp(b)),
            _ => self.to_f64().partial_cmp(&other.to_f64()),
        }
    }
}

impl From<BigRational> for Scalar {
    fn from(q: BigRational) -> Self {
        Scalar::Exact(q)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(q) => {
                if q.is_integer() {
                    write!(f, "{}", q.numer())
                } else {
                    write!(f, "{}/{}", q.numer(), q.denom())
                }
            }
            Scalar::Real(x) => write!(f, "{x}"),
        }
    }
}

/// `ln` of a positive big integer, valid beyond the `f64` exponent range.
pub fn ln_biguint(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top = (n >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

fn ln_bigint(n: &BigInt) -> f64 {
    ln_biguint(n.magnitude())
}

/// `ln q` for positive `q`; `NaN` otherwise.
pub fn ln_rational(q: &BigRational) -> f64 {
    if !q.is_positive() {
        return f64::NAN;
    }
    ln_bigint(q.numer()) - ln_bigint(q.denom())
}

/// Nearest `f64` to a rational, tolerant of huge numerators/denominators.
pub fn rational_to_f64(q: &BigRational) -> f64 {
    if let (Some(n), Some(d)) = (q.numer().to_f64(), q.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    if q.is_zero() {
        return 0.0;
    }
    let sign = if q.is_negative() { -1.0 } else { 1.0 };
    sign * ln_rational(&q.abs()).exp()
}

/// Exact rational from an `f64` (every finite double is a dyadic rational).
pub fn rational_from_f64(x: f64) -> Option<BigRational> {
    BigRational::from_float(x)
}

/// Serializes any displayable value (big integers, rationals) as a string.
pub fn serialize_display<T: fmt::Display, S: serde::Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_of_huge_rational_matches_log_space() {
        let six = BigRational::from_integer(BigInt::from(6));
        let q = Scalar::Exact(six.clone()).powi(-2000).unwrap();
        let expected = -2000.0 * 6f64.ln();
        assert!((q.ln() - expected).abs() < 1e-9 * expected.abs());
        assert_eq!(q.to_f64(), 0.0);
    }

    #[test]
    fn exact_arithmetic_stays_exact() {
        let a = Scalar::ratio(1, 3);
        let b = Scalar::ratio(1, 6);
        assert_eq!(a.sub(&b), Scalar::ratio(1, 6));
        assert_eq!(a.mul(&b).powi(-1).unwrap(), Scalar::int(18));
        assert!(a.add(&Scalar::Real(0.5)).to_f64() > 0.83);
    }

    #[test]
    fn comparison_is_exact_at_ties() {
        let r = Scalar::ratio(1, 6).powi(10).unwrap();
        let s = Scalar::Exact(BigRational::new(BigInt::from(1), BigInt::from(60466176)));
        assert_eq!(r.partial_cmp_scalar(&s), Some(Ordering::Equal));
    }
}
