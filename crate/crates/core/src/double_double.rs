//! Double-double arithmetic: an unevaluated sum of two `f64` values giving
//! roughly 106 bits (about 32 decimal digits) of significand.
//!
//! Error-free transformations follow Dekker and Knuth; the elementary
//! functions use argument reduction plus short Taylor expansions.

use std::cmp::Ordering;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Rem, Sub, SubAssign};

use num_traits::{FromPrimitive, One, ToPrimitive, Zero};

use crate::scalar::Real;

const LN2: DoubleDouble = DoubleDouble::new(std::f64::consts::LN_2, 2.3190468138462996e-17);
const PI: DoubleDouble = DoubleDouble::new(std::f64::consts::PI, 1.2246467991473532e-16);
const HALF_LN_2PI: DoubleDouble = DoubleDouble::new(0.9189385332046728, -3.8782941580672414e-17);

/// `1/n!` for `n = 0..=12`.
const INV_FACT: [DoubleDouble; 13] = [
    DoubleDouble::new(1.0, 0.0),
    DoubleDouble::new(1.0, 0.0),
    DoubleDouble::new(0.5, 0.0),
    DoubleDouble::new(0.16666666666666666, 9.25185853854297e-18),
    DoubleDouble::new(0.041666666666666664, 2.3129646346357427e-18),
    DoubleDouble::new(0.008333333333333333, 1.1564823173178714e-19),
    DoubleDouble::new(0.001388888888888889, -5.300543954373577e-20),
    DoubleDouble::new(0.0001984126984126984, 1.7209558293420705e-22),
    DoubleDouble::new(2.48015873015873e-05, 2.1511947866775882e-23),
    DoubleDouble::new(2.7557319223985893e-06, -1.858393274046472e-22),
    DoubleDouble::new(2.755731922398589e-07, 2.3767714622250297e-23),
    DoubleDouble::new(2.505210838544172e-08, -1.448814070935912e-24),
    DoubleDouble::new(2.08767569878681e-09, -1.20734505911326e-25),
];

/// Number of halvings applied to the reduced exponential argument.
const EXP_SQUARINGS: i32 = 9;

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// `x * 2^k` without intermediate overflow for `k` in the `f64` exponent range.
#[inline]
fn ldexp(x: f64, k: i32) -> f64 {
    let half = k / 2;
    x * 2f64.powi(half) * 2f64.powi(k - half)
}

/// A double-double number `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Clone, Copy, Debug, Default)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    /// Wraps an already normalized pair.
    pub const fn new(hi: f64, lo: f64) -> Self {
        Self { hi, lo }
    }

    /// Normalizes an arbitrary pair.
    pub fn from_sum(a: f64, b: f64) -> Self {
        let (hi, lo) = two_sum(a, b);
        Self { hi, lo }
    }

    /// Exact product of two doubles.
    pub fn from_product(a: f64, b: f64) -> Self {
        let (hi, lo) = two_prod(a, b);
        Self { hi, lo }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    #[inline]
    fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p, e + self.lo * b);
        Self { hi, lo }
    }

    #[inline]
    fn scale_pow2(self, k: i32) -> Self {
        Self { hi: ldexp(self.hi, k), lo: ldexp(self.lo, k) }
    }

    pub fn exp(self) -> Self {
        if self.hi > 709.78 {
            return Self::new(f64::INFINITY, 0.0);
        }
        if self.hi < -745.2 {
            return Self::zero();
        }
        if self.hi == 0.0 {
            return Self::one();
        }
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2.mul_f64(k)).scale_pow2(-EXP_SQUARINGS);
        // expm1 of the reduced argument, |r| < 7e-4.
        let mut s = INV_FACT[INV_FACT.len() - 1];
        for c in INV_FACT[1..INV_FACT.len() - 1].iter().rev() {
            s = s * r + *c;
        }
        s *= r;
        for _ in 0..EXP_SQUARINGS {
            s = s * (s + Self::of(2.0));
        }
        (s + Self::one()).scale_pow2(k as i32)
    }

    pub fn ln(self) -> Self {
        if self.hi <= 0.0 {
            return if self.hi == 0.0 { Self::new(f64::NEG_INFINITY, 0.0) } else { Self::new(f64::NAN, 0.0) };
        }
        if self.hi.is_infinite() {
            return self;
        }
        // One Newton step on exp(y) = x doubles the 53 correct bits of f64::ln.
        let y = Self::of(self.hi.ln());
        y + self * (-y).exp() - Self::one()
    }

    pub fn sin(self) -> Self {
        if !self.hi.is_finite() {
            return Self::new(f64::NAN, 0.0);
        }
        let k = (self.hi / PI.hi).round();
        let r = self - PI.mul_f64(k);
        let r2 = r * r;
        let mut term = r;
        let mut sum = r;
        let mut n = 1.0;
        while term.hi.abs() > 1e-36 * sum.hi.abs().max(1e-300) {
            term = -(term * r2) / Self::of((n + 1.0) * (n + 2.0));
            sum += term;
            n += 2.0;
        }
        if (k as i64) % 2 == 0 {
            sum
        } else {
            -sum
        }
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    pub fn trunc(self) -> Self {
        let hi = self.hi.trunc();
        if hi == self.hi {
            Self::from_sum(hi, self.lo.trunc())
        } else {
            Self::new(hi, 0.0)
        }
    }
}

impl PartialEq for DoubleDouble {
    fn eq(&self, other: &Self) -> bool {
        self.hi == other.hi && self.lo == other.lo
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            ord => ord,
        }
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self { hi: -self.hi, lo: -self.lo }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, b: Self) -> Self {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Self { hi, lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    #[inline]
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, b: Self) -> Self {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    #[inline]
    fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Self { hi, lo } + Self::of(q3)
    }
}

impl Rem for DoubleDouble {
    type Output = Self;
    fn rem(self, b: Self) -> Self {
        self - (self / b).trunc() * b
    }
}

impl AddAssign for DoubleDouble {
    #[inline]
    fn add_assign(&mut self, b: Self) {
        *self = *self + b;
    }
}

impl SubAssign for DoubleDouble {
    #[inline]
    fn sub_assign(&mut self, b: Self) {
        *self = *self - b;
    }
}

impl MulAssign for DoubleDouble {
    #[inline]
    fn mul_assign(&mut self, b: Self) {
        *self = *self * b;
    }
}

impl Zero for DoubleDouble {
    fn zero() -> Self {
        Self::new(0.0, 0.0)
    }
    fn is_zero(&self) -> bool {
        self.hi == 0.0
    }
}

impl One for DoubleDouble {
    fn one() -> Self {
        Self::new(1.0, 0.0)
    }
}

impl FromPrimitive for DoubleDouble {
    fn from_i64(n: i64) -> Option<Self> {
        let hi = n as f64;
        let lo = (n - hi as i64) as f64;
        Some(Self::from_sum(hi, lo))
    }
    fn from_u64(n: u64) -> Option<Self> {
        let hi = n as f64;
        let lo = (n as i128 - hi as i128) as f64;
        Some(Self::from_sum(hi, lo))
    }
    fn from_f64(x: f64) -> Option<Self> {
        Some(Self::of(x))
    }
}

impl ToPrimitive for DoubleDouble {
    fn to_i64(&self) -> Option<i64> {
        let t = self.trunc();
        let hi = t.hi.to_i64()?;
        Some(hi + t.lo as i64)
    }
    fn to_u64(&self) -> Option<u64> {
        self.to_i64().and_then(|v| u64::try_from(v).ok())
    }
    fn to_f64(&self) -> Option<f64> {
        Some(self.hi + self.lo)
    }
}

impl Real for DoubleDouble {
    const UNIT_ROUNDOFF: f64 = 1.232_595_164_407_831e-32; // 2^-106
    const STIRLING_SHIFT: f64 = 25.0;
    const STIRLING_TERMS: usize = 16;

    #[inline]
    fn from_pair(hi: f64, lo: f64) -> Self {
        Self::from_sum(hi, lo)
    }
    #[inline]
    fn of(x: f64) -> Self {
        Self::new(x, 0.0)
    }
    #[inline]
    fn approx(self) -> f64 {
        self.hi + self.lo
    }
    fn abs(self) -> Self {
        DoubleDouble::abs(self)
    }
    fn exp(self) -> Self {
        DoubleDouble::exp(self)
    }
    fn ln(self) -> Self {
        DoubleDouble::ln(self)
    }
    fn sin(self) -> Self {
        DoubleDouble::sin(self)
    }
    fn pi() -> Self {
        PI
    }
    fn half_ln_two_pi() -> Self {
        HALF_LN_2PI
    }
}
