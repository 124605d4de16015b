//! Exact scalars `a + b·√d` with rational `a`, `b` and a square-free radicand `d`.
//!
//! A scalar with `b = 0` is a plain rational and is stored with `d = 0`, so it
//! combines with scalars of any extension. Two scalars that both carry a
//! surd part must agree on `d`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::PolyError;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Scalar {
    a: BigRational,
    b: BigRational,
    d: u64,
}

/// Common radicand of two extensions, where `0` means "rational only".
pub fn join_ext(left: u64, right: u64) -> Result<u64, PolyError> {
    match (left, right) {
        (0, r) => Ok(r),
        (l, 0) => Ok(l),
        (l, r) if l == r => Ok(l),
        (l, r) => Err(PolyError::ExtensionMismatch { left: l, right: r }),
    }
}

/// Splits `n` into `(k, m)` with `n = k²·m` and `m` square-free.
fn split_square(n: u64) -> (u64, u64) {
    if n == 0 {
        return (0, 0);
    }
    let mut k = 1u64;
    let mut m = n;
    let mut f = 2u64;
    while f * f <= m {
        while m.is_multiple_of(f * f) {
            m /= f * f;
            k *= f;
        }
        f += 1;
    }
    (k, m)
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar::from_rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Scalar::from_rational(BigRational::one())
    }

    pub fn from_rational(a: BigRational) -> Self {
        Scalar {
            a,
            b: BigRational::zero(),
            d: 0,
        }
    }

    pub fn from_int(n: i64) -> Self {
        Scalar::from_rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_frac(num: i64, den: i64) -> Self {
        Scalar::from_rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    /// `a + b·√n`; `n` need not be square-free, square factors are pulled out.
    pub fn surd(a: BigRational, b: BigRational, n: u64) -> Self {
        let (k, m) = split_square(n);
        let b = b * BigRational::from_integer(BigInt::from(k));
        if m <= 1 {
            let a = if m == 1 { a + b } else { a };
            return Scalar::from_rational(a);
        }
        Scalar { a, b, d: m }.normalized()
    }

    /// `√n` as an exact scalar.
    pub fn sqrt_of(n: u64) -> Self {
        Scalar::surd(BigRational::zero(), BigRational::one(), n)
    }

    fn normalized(mut self) -> Self {
        if self.b.is_zero() {
            self.d = 0;
        }
        self
    }

    pub fn rational_part(&self) -> &BigRational {
        &self.a
    }

    pub fn surd_part(&self) -> &BigRational {
        &self.b
    }

    /// Radicand of the surd part; `0` for a rational scalar.
    pub fn ext(&self) -> u64 {
        self.d
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.b.is_zero() && self.a.is_one()
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    pub fn try_add(&self, other: &Scalar) -> Result<Scalar, PolyError> {
        let d = join_ext(self.d, other.d)?;
        Ok(Scalar {
            a: &self.a + &other.a,
            b: &self.b + &other.b,
            d,
        }
        .normalized())
    }

    pub fn try_mul(&self, other: &Scalar) -> Result<Scalar, PolyError> {
        let d = join_ext(self.d, other.d)?;
        let dq = BigRational::from_integer(BigInt::from(d));
        let a = &self.a * &other.a + &self.b * &other.b * dq;
        let b = &self.a * &other.b + &other.a * &self.b;
        Ok(Scalar { a, b, d }.normalized())
    }

    /// Conjugate `a − b·√d`.
    pub fn conj(&self) -> Scalar {
        Scalar {
            a: self.a.clone(),
            b: -self.b.clone(),
            d: self.d,
        }
    }

    /// Field norm `a² − d·b²`.
    pub fn norm(&self) -> BigRational {
        let dq = BigRational::from_integer(BigInt::from(self.d));
        &self.a * &self.a - &self.b * &self.b * dq
    }

    pub fn inv(&self) -> Option<Scalar> {
        if self.is_zero() {
            return None;
        }
        // d is square-free and > 1 whenever b ≠ 0, so the norm vanishes only at zero.
        let n = self.norm();
        let c = self.conj();
        Some(
            Scalar {
                a: c.a / &n,
                b: c.b / &n,
                d: self.d,
            }
            .normalized(),
        )
    }

    /// Exact sign of the real number `a + b·√d`.
    pub fn signum(&self) -> Ordering {
        let sa = self.a.cmp(&BigRational::zero());
        let sb = self.b.cmp(&BigRational::zero());
        match (sa, sb) {
            (x, Ordering::Equal) => x,
            (Ordering::Equal, y) => y,
            (x, y) if x == y => x,
            (x, _) => {
                // opposite signs: compare a² with d·b²
                let dq = BigRational::from_integer(BigInt::from(self.d));
                let lhs = &self.a * &self.a;
                let rhs = &self.b * &self.b * dq;
                match lhs.cmp(&rhs) {
                    Ordering::Greater => x,
                    Ordering::Less => x.reverse(),
                    Ordering::Equal => Ordering::Equal,
                }
            }
        }
    }

    pub fn is_positive(&self) -> bool {
        self.signum() == Ordering::Greater
    }

    pub fn to_f64(&self) -> f64 {
        let a = rational_to_f64(&self.a);
        if self.b.is_zero() {
            return a;
        }
        a + rational_to_f64(&self.b) * (self.d as f64).sqrt()
    }

    /// Exact rational parsed from a decimal or `num/den` literal.
    pub fn parse_rational(text: &str) -> Option<BigRational> {
        let text = text.trim();
        let (neg, body) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text.strip_prefix('+').unwrap_or(text)),
        };
        let value = if let Some((num, den)) = body.split_once('/') {
            let num = parse_decimal(num)?;
            let den = parse_decimal(den)?;
            if den.is_zero() {
                return None;
            }
            num / den
        } else {
            parse_decimal(body)?
        };
        Some(if neg { -value } else { value })
    }
}

fn parse_decimal(text: &str) -> Option<BigRational> {
    if text.is_empty() {
        return None;
    }
    let (int_part, frac_part) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let num: BigInt = digits.parse().ok()?;
    let den = num_traits::pow(BigInt::from(10), frac_part.len());
    Some(BigRational::new(num, den))
}

pub(crate) fn rational_to_f64(r: &BigRational) -> f64 {
    if let Some(v) = r.to_f64() {
        if v.is_finite() {
            return v;
        }
    }
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

pub(crate) fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Always `num/den`, used for the JSON encoding.
fn format_ratio_strict(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

impl fmt::Display for Scalar {
    /// Prints in the polynomial input grammar, e.g. `1/2+7/10*sqrt(2)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b.is_zero() {
            return write!(f, "{}", format_rational(&self.a));
        }
        let surd = |b: &BigRational| {
            if b.abs().is_one() {
                format!("sqrt({})", self.d)
            } else {
                format!("{}*sqrt({})", format_rational(&b.abs()), self.d)
            }
        };
        if self.a.is_zero() {
            let sign = if self.b.is_negative() { "-" } else { "" };
            write!(f, "{sign}{}", surd(&self.b))
        } else {
            let sign = if self.b.is_negative() { '-' } else { '+' };
            write!(f, "{}{sign}{}", format_rational(&self.a), surd(&self.b))
        }
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $body:expr) => {
        impl $trait<&Scalar> for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                let op: fn(&Scalar, &Scalar) -> Scalar = $body;
                op(self, rhs)
            }
        }
        impl $trait<Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                (&self).$method(rhs)
            }
        }
    };
}

// Operators panic on mismatched extensions; callers that cannot rule that out use the try_ forms.
forward_binop!(Add, add, |l, r| l.try_add(r).expect("incompatible quadratic extensions"));
forward_binop!(Sub, sub, |l, r| l.try_add(&-r).expect("incompatible quadratic extensions"));
forward_binop!(Mul, mul, |l, r| l.try_mul(r).expect("incompatible quadratic extensions"));
forward_binop!(Div, div, |l, r| {
    let inv = r.inv().expect("division by zero scalar");
    l.try_mul(&inv).expect("incompatible quadratic extensions")
});

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar {
            a: -self.a.clone(),
            b: -self.b.clone(),
            d: self.d,
        }
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

impl From<i64> for Scalar {
    fn from(n: i64) -> Self {
        Scalar::from_int(n)
    }
}

impl From<BigRational> for Scalar {
    fn from(r: BigRational) -> Self {
        Scalar::from_rational(r)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ScalarRepr {
    Rational(String),
    Surd { a: String, b: String, d: u64 },
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let repr = if self.b.is_zero() {
            ScalarRepr::Rational(format_ratio_strict(&self.a))
        } else {
            ScalarRepr::Surd {
                a: format_ratio_strict(&self.a),
                b: format_ratio_strict(&self.b),
                d: self.d,
            }
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let bad = |s: &str| D::Error::custom(format!("invalid rational '{s}'"));
        match ScalarRepr::deserialize(deserializer)? {
            ScalarRepr::Rational(s) => Scalar::parse_rational(&s).map(Scalar::from_rational).ok_or_else(|| bad(&s)),
            ScalarRepr::Surd { a, b, d } => {
                let ra = Scalar::parse_rational(&a).ok_or_else(|| bad(&a))?;
                let rb = Scalar::parse_rational(&b).ok_or_else(|| bad(&b))?;
                Ok(Scalar::surd(ra, rb, d))
            }
        }
    }
}
