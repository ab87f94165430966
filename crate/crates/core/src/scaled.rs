//! Extended-exponent arithmetic.
//!
//! The per-mode formulas contain factors like `(r_e/r_i)^(2|m|)` that leave
//! the `f64` range long before `|m|` becomes uninteresting. [`ScaledValue`]
//! keeps a sign, a mantissa in `[1, 2)` and a 64-bit power-of-two exponent;
//! [`ScaledComplex`] does the same for complex numbers with a shared
//! exponent. Conversion back to `f64` saturates to `±inf` / `0`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

/// Terms whose binary exponents differ by more than this are dropped in
/// additions; the smaller one is far below one ulp of the larger.
pub const FLUSH_EXPONENT_GAP: i64 = 100;

/// Split a finite nonzero `x` into `(m, e)` with `|m| in [1, 2)` and `x = m * 2^e`.
fn frexp(x: f64) -> (f64, i64) {
    debug_assert!(x.is_finite() && x != 0.0);
    let mut bits = x.to_bits();
    let mut bias = 0i64;
    if (bits >> 52) & 0x7ff == 0 {
        // subnormal: lift into the normal range first
        let y = x * f64::from_bits(0x43f0_0000_0000_0000); // 2^64
        bits = y.to_bits();
        bias = -64;
    }
    let raw_exp = ((bits >> 52) & 0x7ff) as i64;
    let exponent = raw_exp - 1023 + bias;
    let mantissa_bits = (bits & !(0x7ffu64 << 52)) | (1023u64 << 52);
    (f64::from_bits(mantissa_bits), exponent)
}

/// `m * 2^e` for `e` in any range, saturating.
fn ldexp(m: f64, e: i64) -> f64 {
    if m == 0.0 {
        return 0.0;
    }
    if e > 2100 {
        return m * f64::INFINITY;
    }
    if e < -2200 {
        return m * 0.0;
    }
    let mut x = m;
    let mut e = e;
    // step in chunks that stay exactly representable
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    x * 2f64.powi(e as i32)
}

/// A real number `sign * mantissa * 2^exponent`.
#[derive(Clone, Copy, PartialEq)]
pub struct ScaledValue {
    sign: i8,
    mantissa: f64,
    exponent: i64,
}

impl ScaledValue {
    pub const ZERO: Self = Self {
        sign: 0,
        mantissa: 0.0,
        exponent: 0,
    };
    pub const ONE: Self = Self {
        sign: 1,
        mantissa: 1.0,
        exponent: 0,
    };

    /// Panics on NaN or infinite input.
    pub fn from_f64(x: f64) -> Self {
        assert!(x.is_finite(), "ScaledValue::from_f64 on non-finite {x}");
        if x == 0.0 {
            return Self::ZERO;
        }
        let (m, e) = frexp(x.abs());
        Self {
            sign: if x > 0.0 { 1 } else { -1 },
            mantissa: m,
            exponent: e,
        }
    }

    /// Builds `x * 2^e` from an arbitrary finite float and exponent offset.
    pub fn from_parts(x: f64, e: i64) -> Self {
        let mut v = Self::from_f64(x);
        if v.sign != 0 {
            v.exponent += e;
        }
        v
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    /// Mantissa in `[1, 2)`; `0` for the zero value.
    pub fn mantissa(&self) -> f64 {
        self.mantissa
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// Saturating conversion; `±inf` above and `0` below the `f64` range.
    pub fn to_f64(&self) -> f64 {
        if self.sign == 0 {
            return 0.0;
        }
        f64::from(self.sign) * ldexp(self.mantissa, self.exponent)
    }

    /// True when [`to_f64`](Self::to_f64) would saturate to infinity.
    pub fn overflows_f64(&self) -> bool {
        self.sign != 0 && self.to_f64().is_infinite()
    }

    pub fn abs(&self) -> Self {
        Self {
            sign: self.sign.abs(),
            ..*self
        }
    }

    pub fn log2_abs(&self) -> f64 {
        if self.sign == 0 {
            return f64::NEG_INFINITY;
        }
        self.mantissa.log2() + self.exponent as f64
    }

    pub fn ln_abs(&self) -> f64 {
        self.log2_abs() * std::f64::consts::LN_2
    }

    /// Square root of a nonnegative value. Panics on negative input.
    pub fn sqrt(&self) -> Self {
        assert!(self.sign >= 0, "sqrt of negative ScaledValue");
        if self.sign == 0 {
            return Self::ZERO;
        }
        let (m, e) = if self.exponent.rem_euclid(2) == 1 {
            (self.mantissa * 2.0, self.exponent - 1)
        } else {
            (self.mantissa, self.exponent)
        };
        Self::from_parts(m.sqrt(), e / 2)
    }

    pub fn recip(&self) -> Self {
        Self::ONE / *self
    }

    /// Integer power by binary exponentiation.
    pub fn powi(&self, k: u64) -> Self {
        let mut result = Self::ONE;
        let mut base = *self;
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                result = result * base;
            }
            k >>= 1;
            if k > 0 {
                base = base * base;
            }
        }
        result
    }

    fn normalized(sign: i8, m: f64, e: i64) -> Self {
        if m == 0.0 || sign == 0 {
            return Self::ZERO;
        }
        let (mm, me) = frexp(m);
        Self {
            sign,
            mantissa: mm,
            exponent: e + me,
        }
    }
}

impl Default for ScaledValue {
    fn default() -> Self {
        Self::ZERO
    }
}

impl From<f64> for ScaledValue {
    fn from(x: f64) -> Self {
        Self::from_f64(x)
    }
}

impl fmt::Debug for ScaledValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.sign == 0 {
            return write!(f, "0");
        }
        write!(
            f,
            "{}{}*2^{}",
            if self.sign < 0 { "-" } else { "" },
            self.mantissa,
            self.exponent
        )
    }
}

impl fmt::Display for ScaledValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let x = self.to_f64();
        if x.is_finite() && (x == 0.0) == self.is_zero() {
            write!(f, "{x:e}")
        } else {
            // decimal rendering of out-of-range values
            let l10 = self.log2_abs() * std::f64::consts::LOG10_2;
            let e10 = l10.floor();
            let m10 = 10f64.powf(l10 - e10);
            let s = if self.sign < 0 { "-" } else { "" };
            write!(f, "{s}{m10}e{e10}")
        }
    }
}

impl PartialOrd for ScaledValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        if self.sign != other.sign {
            return self.sign.partial_cmp(&other.sign);
        }
        if self.sign == 0 {
            return Some(Ordering::Equal);
        }
        let mag = self
            .exponent
            .cmp(&other.exponent)
            .then(self.mantissa.partial_cmp(&other.mantissa)?);
        Some(if self.sign > 0 { mag } else { mag.reverse() })
    }
}

impl Neg for ScaledValue {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            sign: -self.sign,
            ..self
        }
    }
}

impl Mul for ScaledValue {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        if self.sign == 0 || rhs.sign == 0 {
            return Self::ZERO;
        }
        Self::normalized(
            self.sign * rhs.sign,
            self.mantissa * rhs.mantissa,
            self.exponent + rhs.exponent,
        )
    }
}

impl Div for ScaledValue {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        assert!(rhs.sign != 0, "ScaledValue division by zero");
        if self.sign == 0 {
            return Self::ZERO;
        }
        Self::normalized(
            self.sign * rhs.sign,
            self.mantissa / rhs.mantissa,
            self.exponent - rhs.exponent,
        )
    }
}

impl Add for ScaledValue {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        if self.sign == 0 {
            return rhs;
        }
        if rhs.sign == 0 {
            return self;
        }
        let (big, small) = if self.exponent >= rhs.exponent {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let gap = big.exponent - small.exponent;
        if gap > FLUSH_EXPONENT_GAP {
            return big;
        }
        let sum = f64::from(big.sign) * big.mantissa
            + f64::from(small.sign) * small.mantissa * 2f64.powi(-(gap as i32));
        if sum == 0.0 {
            return Self::ZERO;
        }
        Self::normalized(if sum > 0.0 { 1 } else { -1 }, sum.abs(), big.exponent)
    }
}

impl Sub for ScaledValue {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Mul<f64> for ScaledValue {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self * Self::from_f64(rhs)
    }
}

impl Div<f64> for ScaledValue {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        self / Self::from_f64(rhs)
    }
}

impl std::iter::Sum for ScaledValue {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |acc, x| acc + x)
    }
}

/// `(x / y)^k` without intermediate overflow.
///
/// The ratio is rounded once in `f64` and then raised by binary
/// exponentiation, so the relative error stays below `k * 4` ulp.
pub fn scaled_ratio_pow(x: f64, y: f64, k: u64) -> ScaledValue {
    assert!(x > 0.0 && y > 0.0, "scaled_ratio_pow needs positive inputs");
    if k == 0 {
        return ScaledValue::ONE;
    }
    // x/y itself can overflow for extreme inputs; divide in scaled form
    (ScaledValue::from_f64(x) / ScaledValue::from_f64(y)).powi(k)
}

/// A complex number `(re + i im) * 2^exponent` with `max(|re|, |im|)` in `[1, 2)`.
#[derive(Clone, Copy, PartialEq)]
pub struct ScaledComplex {
    re: f64,
    im: f64,
    exponent: i64,
}

impl ScaledComplex {
    pub const ZERO: Self = Self {
        re: 0.0,
        im: 0.0,
        exponent: 0,
    };
    pub const ONE: Self = Self {
        re: 1.0,
        im: 0.0,
        exponent: 0,
    };

    fn normalized(re: f64, im: f64, e: i64) -> Self {
        let big = re.abs().max(im.abs());
        if big == 0.0 {
            return Self::ZERO;
        }
        let (_, be) = frexp(big);
        let scale = 2f64.powi(-(be as i32));
        Self {
            re: re * scale,
            im: im * scale,
            exponent: e + be,
        }
    }

    pub fn new(z: Complex64) -> Self {
        assert!(z.re.is_finite() && z.im.is_finite(), "non-finite complex {z}");
        let big = z.re.abs().max(z.im.abs());
        if big == 0.0 {
            return Self::ZERO;
        }
        // pre-scale so subnormal parts survive normalization
        let (_, be) = frexp(big);
        Self::normalized(ldexp(z.re, -be), ldexp(z.im, -be), be)
    }

    pub fn from_real(x: ScaledValue) -> Self {
        if x.is_zero() {
            return Self::ZERO;
        }
        Self {
            re: f64::from(x.sign()) * x.mantissa(),
            im: 0.0,
            exponent: x.exponent(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::new(ldexp(self.re, self.exponent), ldexp(self.im, self.exponent))
    }

    pub fn re(&self) -> ScaledValue {
        ScaledValue::from_parts(self.re, self.exponent)
    }

    pub fn im(&self) -> ScaledValue {
        ScaledValue::from_parts(self.im, self.exponent)
    }

    pub fn conj(&self) -> Self {
        Self {
            im: -self.im,
            ..*self
        }
    }

    /// `|z|^2` as a real scaled value.
    pub fn norm_sqr(&self) -> ScaledValue {
        if self.is_zero() {
            return ScaledValue::ZERO;
        }
        ScaledValue::from_parts(self.re * self.re + self.im * self.im, 2 * self.exponent)
    }

    pub fn abs(&self) -> ScaledValue {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, x: ScaledValue) -> Self {
        *self * Self::from_real(x)
    }
}

impl Default for ScaledComplex {
    fn default() -> Self {
        Self::ZERO
    }
}

impl From<Complex64> for ScaledComplex {
    fn from(z: Complex64) -> Self {
        Self::new(z)
    }
}

impl From<ScaledValue> for ScaledComplex {
    fn from(x: ScaledValue) -> Self {
        Self::from_real(x)
    }
}

impl fmt::Debug for ScaledComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}{:+}i)*2^{}", self.re, self.im, self.exponent)
    }
}

impl Neg for ScaledComplex {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            re: -self.re,
            im: -self.im,
            exponent: self.exponent,
        }
    }
}

impl Add for ScaledComplex {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let (big, small) = if self.exponent >= rhs.exponent {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let gap = big.exponent - small.exponent;
        if gap > FLUSH_EXPONENT_GAP {
            return big;
        }
        let s = 2f64.powi(-(gap as i32));
        Self::normalized(big.re + small.re * s, big.im + small.im * s, big.exponent)
    }
}

impl Sub for ScaledComplex {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Mul for ScaledComplex {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return Self::ZERO;
        }
        Self::normalized(
            self.re * rhs.re - self.im * rhs.im,
            self.re * rhs.im + self.im * rhs.re,
            self.exponent + rhs.exponent,
        )
    }
}

impl Div for ScaledComplex {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        assert!(!rhs.is_zero(), "ScaledComplex division by zero");
        if self.is_zero() {
            return Self::ZERO;
        }
        let d = rhs.re * rhs.re + rhs.im * rhs.im;
        let re = (self.re * rhs.re + self.im * rhs.im) / d;
        let im = (self.im * rhs.re - self.re * rhs.im) / d;
        Self::normalized(re, im, self.exponent - rhs.exponent)
    }
}

impl std::iter::Sum for ScaledComplex {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |acc, x| acc + x)
    }
}
