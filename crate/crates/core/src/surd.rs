//! Exact arithmetic on quadratic surds `a + b·√d` with rational `a`, `b`
//! and a square-free integer radicand `d`.
//!
//! Every bound in this crate is a rational expression in at most one
//! square root, so comparisons between candidate maximizers can be done
//! without rounding. Adding or multiplying two surds with different
//! radicands (both irrational) is not representable and panics; the bound
//! profiles never produce that combination.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{Signed, ToPrimitive, Zero};

/// Exact rational used throughout the crate.
pub type Q = Ratio<i128>;

pub fn q(n: i128) -> Q {
    Q::from_integer(n)
}

pub fn q_frac(n: i128, d: i128) -> Q {
    Q::new(n, d)
}

pub fn q_to_f64(x: &Q) -> f64 {
    x.numer().to_f64().unwrap_or(f64::NAN) / x.denom().to_f64().unwrap_or(f64::NAN)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Surd {
    rat: Q,
    coef: Q,
    rad: i128,
}

/// Split `n > 0` into `m²·f` with `f` square-free.
fn square_free(mut n: i128) -> (i128, i128) {
    debug_assert!(n > 0);
    let mut m = 1i128;
    let mut p = 2i128;
    while p * p <= n {
        while n % (p * p) == 0 {
            n /= p * p;
            m *= p;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    (m, n)
}

fn sign_q<T: Signed>(x: &T) -> i32 {
    if x.is_zero() {
        0
    } else if x.is_positive() {
        1
    } else {
        -1
    }
}

fn big(x: &Q) -> BigRational {
    BigRational::new(BigInt::from(*x.numer()), BigInt::from(*x.denom()))
}

/// Sign of `a + b·√d` for `d ≥ 1`, computed exactly.
fn sign_two_big(a: &BigRational, b: &BigRational, d: i128) -> i32 {
    let (sa, sb) = (sign_q(a), sign_q(b));
    if sb == 0 {
        return sa;
    }
    if sa == 0 || sa == sb {
        return sb;
    }
    let lhs = a * a;
    let rhs = b * b * big(&q(d));
    match lhs.cmp(&rhs) {
        Ordering::Greater => sa,
        Ordering::Less => sb,
        Ordering::Equal => 0,
    }
}

/// Sign of `x` when a floating-point estimate with absolute error well below
/// `scale·1e-12` settles it.
fn sign_estimate(x: f64, scale: f64) -> Option<i32> {
    if x.is_finite() && scale.is_finite() && x.abs() > 1e-12 * scale {
        Some(if x > 0.0 { 1 } else { -1 })
    } else {
        None
    }
}

/// Sign of `a + b·√d` for `d ≥ 1`.
fn sign_two(a: &Q, b: &Q, d: i128) -> i32 {
    let (fa, fb) = (q_to_f64(a), q_to_f64(b) * (d as f64).sqrt());
    sign_estimate(fa + fb, fa.abs() + fb.abs()).unwrap_or_else(|| sign_two_big(&big(a), &big(b), d))
}

impl Surd {
    pub fn rational(x: Q) -> Self {
        Surd {
            rat: x,
            coef: Q::zero(),
            rad: 1,
        }
    }

    pub fn int(n: i128) -> Self {
        Self::rational(q(n))
    }

    pub fn zero() -> Self {
        Self::int(0)
    }

    fn normalized(rat: Q, coef: Q, rad: i128) -> Self {
        if coef.is_zero() || rad == 1 {
            Surd {
                rat: rat + coef,
                coef: Q::zero(),
                rad: 1,
            }
        } else {
            Surd { rat, coef, rad }
        }
    }

    /// `√x` for a nonnegative rational `x`.
    pub fn sqrt_q(x: &Q) -> Self {
        assert!(!x.is_negative(), "square root of a negative rational");
        if x.is_zero() {
            return Self::zero();
        }
        // √(p/q) = √(p·q)/q
        let pq = x.numer() * x.denom();
        let (m, f) = square_free(pq);
        Self::normalized(Q::zero(), Q::new(m, *x.denom()), f)
    }

    /// `√self`; only defined when `self` is rational.
    pub fn sqrt(&self) -> Option<Self> {
        if self.is_rational() {
            Some(Self::sqrt_q(&self.rat))
        } else {
            None
        }
    }

    pub fn is_rational(&self) -> bool {
        self.coef.is_zero()
    }

    pub fn as_rational(&self) -> Option<Q> {
        self.is_rational().then_some(self.rat)
    }

    pub fn rational_part(&self) -> Q {
        self.rat
    }

    pub fn irrational_coef(&self) -> Q {
        self.coef
    }

    pub fn radicand(&self) -> i128 {
        self.rad
    }

    pub fn to_f64(&self) -> f64 {
        q_to_f64(&self.rat) + q_to_f64(&self.coef) * (self.rad as f64).sqrt()
    }

    pub fn signum(&self) -> i32 {
        sign_two(&self.rat, &self.coef, self.rad)
    }

    fn common_rad(&self, other: &Self) -> Option<i128> {
        if self.is_rational() {
            Some(other.rad)
        } else if other.is_rational() || self.rad == other.rad {
            Some(self.rad)
        } else {
            None
        }
    }

    pub fn checked_add(&self, other: &Self) -> Option<Self> {
        let rad = self.common_rad(other)?;
        Some(Self::normalized(
            self.rat + other.rat,
            self.coef + other.coef,
            rad,
        ))
    }

    pub fn checked_mul(&self, other: &Self) -> Option<Self> {
        let rad = self.common_rad(other)?;
        let rat = self.rat * other.rat + self.coef * other.coef * q(rad);
        let coef = self.rat * other.coef + self.coef * other.rat;
        Some(Self::normalized(rat, coef, rad))
    }

    pub fn scale(&self, k: Q) -> Self {
        Self::normalized(self.rat * k, self.coef * k, self.rad)
    }

    /// `1/self`, rationalizing the denominator.
    pub fn recip(&self) -> Self {
        assert!(self.signum() != 0, "reciprocal of zero");
        if self.is_rational() {
            return Self::rational(self.rat.recip());
        }
        let norm = self.rat * self.rat - self.coef * self.coef * q(self.rad);
        Self::normalized(self.rat / norm, -self.coef / norm, self.rad)
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    /// Largest integer not exceeding the value.
    pub fn floor(&self) -> i128 {
        let mut guess = self.to_f64().floor() as i128;
        while Surd::int(guess) > *self {
            guess -= 1;
        }
        while Surd::int(guess + 1) <= *self {
            guess += 1;
        }
        guess
    }
}

impl Ord for Surd {
    fn cmp(&self, other: &Self) -> Ordering {
        let terms = |x: &Surd| {
            let (r, c) = (q_to_f64(&x.rat), q_to_f64(&x.coef) * (x.rad as f64).sqrt());
            (r + c, r.abs() + c.abs())
        };
        let ((x, sx), (y, sy)) = (terms(self), terms(other));
        if let Some(s) = sign_estimate(x - y, sx + sy) {
            return s.cmp(&0);
        }
        let a = big(&self.rat) - big(&other.rat);
        let s = match self.common_rad(other) {
            Some(rad) => sign_two_big(&a, &(big(&self.coef) - big(&other.coef)), rad),
            None => {
                // sign(u - v) with u = a + b√m, v = c√n
                let (b, m) = (big(&self.coef), self.rad);
                let (c, n) = (big(&other.coef), other.rad);
                let su = sign_two_big(&a, &b, m);
                let sv = sign_q(&c);
                if su >= 0 && sv <= 0 {
                    if su == 0 && sv == 0 {
                        0
                    } else {
                        1
                    }
                } else if su <= 0 && sv >= 0 {
                    -1
                } else {
                    // same strict sign: compare squares
                    let lhs = &a * &a + &b * &b * big(&q(m)) - &c * &c * big(&q(n));
                    let diff_sq = sign_two_big(&lhs, &(big(&q(2)) * &a * &b), m);
                    if su > 0 {
                        diff_sq
                    } else {
                        -diff_sq
                    }
                }
            }
        };
        s.cmp(&0)
    }
}

impl PartialOrd for Surd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for Surd {
    type Output = Surd;
    fn add(self, rhs: Surd) -> Surd {
        self.checked_add(&rhs)
            .expect("adding surds with incompatible radicands")
    }
}

impl Sub for Surd {
    type Output = Surd;
    fn sub(self, rhs: Surd) -> Surd {
        self + (-rhs)
    }
}

impl Neg for Surd {
    type Output = Surd;
    fn neg(self) -> Surd {
        Surd {
            rat: -self.rat,
            coef: -self.coef,
            rad: self.rad,
        }
    }
}

impl Mul for Surd {
    type Output = Surd;
    fn mul(self, rhs: Surd) -> Surd {
        self.checked_mul(&rhs)
            .expect("multiplying surds with incompatible radicands")
    }
}

impl Div for Surd {
    type Output = Surd;
    fn div(self, rhs: Surd) -> Surd {
        self * rhs.recip()
    }
}

impl serde::Serialize for Surd {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

/// Serialize a rational as `p/q` text.
pub fn serialize_q<S: serde::Serializer>(x: &Q, ser: S) -> std::result::Result<S::Ok, S::Error> {
    ser.collect_str(x)
}

impl From<Q> for Surd {
    fn from(x: Q) -> Self {
        Surd::rational(x)
    }
}

impl From<i128> for Surd {
    fn from(x: i128) -> Self {
        Surd::int(x)
    }
}

impl fmt::Display for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_rational() {
            write!(f, "{}", self.rat)
        } else if self.rat.is_zero() {
            write!(f, "{}*sqrt({})", self.coef, self.rad)
        } else {
            write!(f, "{} + {}*sqrt({})", self.rat, self.coef, self.rad)
        }
    }
}

/// Integer square root (floor) of a nonnegative integer.
pub fn isqrt(n: u128) -> u128 {
    if n < 2 {
        return n;
    }
    let mut x = (n as f64).sqrt() as u128;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

/// True when `x` is a perfect square rational.
pub fn is_square_q(x: &Q) -> bool {
    Surd::sqrt_q(x).is_rational()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sqrt_normalizes_radicand() {
        let s = Surd::sqrt_q(&q(18));
        assert_eq!(s.irrational_coef(), q(3));
        assert_eq!(s.radicand(), 2);
        assert_eq!(Surd::sqrt_q(&q(16)), Surd::int(4));
        let h = Surd::sqrt_q(&q_frac(1, 2));
        assert_eq!(h.irrational_coef(), q_frac(1, 2));
        assert_eq!(h.radicand(), 2);
    }

    #[test]
    fn recip_rationalizes() {
        let x = Surd::int(3) + Surd::sqrt_q(&q(2));
        let y = x.recip() * x;
        assert_eq!(y, Surd::int(1));
    }

    #[test]
    fn floor_is_exact() {
        assert_eq!(Surd::sqrt_q(&q(2)).floor(), 1);
        assert_eq!(Surd::sqrt_q(&q(9)).floor(), 3);
        assert_eq!((-Surd::sqrt_q(&q(2))).floor(), -2);
    }

    #[test]
    fn isqrt_boundaries() {
        assert_eq!(isqrt(0), 0);
        assert_eq!(isqrt(15), 3);
        assert_eq!(isqrt(16), 4);
        assert_eq!(isqrt(1 << 62), 1 << 31);
    }

    proptest! {
        #[test]
        fn ordering_matches_floats(a in -50i128..50, b in -50i128..50, m in 1i128..40,
                                   c in -50i128..50, d in -50i128..50, n in 1i128..40) {
            let x = Surd::int(a) + Surd::sqrt_q(&q(m)).scale(q(b));
            let y = Surd::int(c) + Surd::sqrt_q(&q(n)).scale(q(d));
            let (fx, fy) = (x.to_f64(), y.to_f64());
            if (fx - fy).abs() > 1e-9 {
                prop_assert_eq!(x < y, fx < fy);
            }
            prop_assert_eq!(x.cmp(&y), y.cmp(&x).reverse());
        }
    }
}
