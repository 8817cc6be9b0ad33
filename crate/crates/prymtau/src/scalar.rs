//! Scalar abstraction: complex arithmetic generic over precision.
//!
//! Two backends: `num_complex::Complex64` for fast double precision and
//! `rug::Complex` for arbitrary precision. Generic code never constructs
//! leaf values directly; it derives them from an existing value with
//! [`CScalar::like`] so that precision propagates from the inputs.

use num_complex::Complex64;
use std::fmt::{Debug, Display};
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Real counterpart of a complex scalar.
pub trait RScalar:
    Clone
    + Debug
    + Display
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + for<'a> Add<&'a Self, Output = Self>
    + for<'a> Sub<&'a Self, Output = Self>
    + for<'a> Mul<&'a Self, Output = Self>
    + for<'a> Div<&'a Self, Output = Self>
    + AddAssign<Self>
    + for<'a> AddAssign<&'a Self>
{
    fn rlike(&self, v: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn ln(self) -> Self;
    fn exp(self) -> Self;
    fn sinh(self) -> Self;
    fn cosh(self) -> Self;
    fn tanh(self) -> Self;
    fn asin(self) -> Self;
    fn is_finite(&self) -> bool;
}

impl RScalar for f64 {
    fn rlike(&self, v: f64) -> Self {
        v
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn sinh(self) -> Self {
        f64::sinh(self)
    }
    fn cosh(self) -> Self {
        f64::cosh(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn asin(self) -> Self {
        f64::asin(self)
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl RScalar for rug::Float {
    fn rlike(&self, v: f64) -> Self {
        rug::Float::with_val(self.prec(), v)
    }
    fn to_f64(&self) -> f64 {
        rug::Float::to_f64(self)
    }
    fn sqrt(self) -> Self {
        rug::Float::sqrt(self)
    }
    fn abs(self) -> Self {
        rug::Float::abs(self)
    }
    fn ln(self) -> Self {
        rug::Float::ln(self)
    }
    fn exp(self) -> Self {
        rug::Float::exp(self)
    }
    fn sinh(self) -> Self {
        rug::Float::sinh(self)
    }
    fn cosh(self) -> Self {
        rug::Float::cosh(self)
    }
    fn tanh(self) -> Self {
        rug::Float::tanh(self)
    }
    fn asin(self) -> Self {
        rug::Float::asin(self)
    }
    fn is_finite(&self) -> bool {
        rug::Float::is_finite(self)
    }
}

/// Complex scalar with value-propagated precision.
pub trait CScalar:
    Clone
    + Debug
    + Display
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + for<'a> Add<&'a Self, Output = Self>
    + for<'a> Sub<&'a Self, Output = Self>
    + for<'a> Mul<&'a Self, Output = Self>
    + for<'a> Div<&'a Self, Output = Self>
    + AddAssign<Self>
    + SubAssign<Self>
    + MulAssign<Self>
    + for<'a> AddAssign<&'a Self>
    + for<'a> SubAssign<&'a Self>
    + for<'a> MulAssign<&'a Self>
{
    type Re: RScalar;

    /// New value at the given mantissa precision (ignored by `Complex64`).
    fn with_prec(bits: u32, re: f64, im: f64) -> Self;
    /// New value inheriting the precision of `self`.
    fn like(&self, re: f64, im: f64) -> Self;
    fn from_re(re: Self::Re) -> Self;
    fn from_parts(re: Self::Re, im: Self::Re) -> Self;

    fn re(&self) -> Self::Re;
    fn im(&self) -> Self::Re;
    fn to_c64(&self) -> Complex64;

    fn conj(&self) -> Self;
    fn abs(&self) -> Self::Re;
    fn norm_sqr(&self) -> Self::Re;
    fn arg(&self) -> Self::Re;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn powi(self, n: i32) -> Self;
    /// Multiplication by the imaginary unit.
    fn mul_i(self) -> Self;
    fn is_finite(&self) -> bool;

    fn zero_like(&self) -> Self {
        self.like(0.0, 0.0)
    }
    fn one_like(&self) -> Self {
        self.like(1.0, 0.0)
    }
    fn i_like(&self) -> Self {
        self.like(0.0, 1.0)
    }
    fn pi_like(&self) -> Self;
    /// 2*pi*i at the precision of `self`.
    fn two_pi_i_like(&self) -> Self {
        let pi = self.pi_like();
        (pi + &self.pi_like()).mul_i()
    }
    fn re_like(&self, r: &Self::Re) -> Self {
        Self::from_re(r.clone())
    }
    /// exp(i*t) for real t given as f64 (used by node generators).
    fn cis_like(&self, t: f64) -> Self {
        (self.like(0.0, t)).exp()
    }
}

impl CScalar for Complex64 {
    type Re = f64;

    fn with_prec(_bits: u32, re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }
    fn like(&self, re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }
    fn from_re(re: f64) -> Self {
        Complex64::new(re, 0.0)
    }
    fn from_parts(re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }
    fn re(&self) -> f64 {
        self.re
    }
    fn im(&self) -> f64 {
        self.im
    }
    fn to_c64(&self) -> Complex64 {
        *self
    }
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
    fn abs(&self) -> f64 {
        self.norm()
    }
    fn norm_sqr(&self) -> f64 {
        Complex64::norm_sqr(self)
    }
    fn arg(&self) -> f64 {
        Complex64::arg(*self)
    }
    fn sqrt(self) -> Self {
        Complex64::sqrt(self)
    }
    fn exp(self) -> Self {
        Complex64::exp(self)
    }
    fn ln(self) -> Self {
        Complex64::ln(self)
    }
    fn powi(self, n: i32) -> Self {
        Complex64::powi(&self, n)
    }
    fn mul_i(self) -> Self {
        Complex64::new(-self.im, self.re)
    }
    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn pi_like(&self) -> Self {
        Complex64::new(std::f64::consts::PI, 0.0)
    }
}

impl CScalar for rug::Complex {
    type Re = rug::Float;

    fn with_prec(bits: u32, re: f64, im: f64) -> Self {
        rug::Complex::with_val(bits, (re, im))
    }
    fn like(&self, re: f64, im: f64) -> Self {
        rug::Complex::with_val(self.prec().0, (re, im))
    }
    fn from_re(re: rug::Float) -> Self {
        let p = re.prec();
        let mut z = rug::Complex::new(p);
        *z.mut_real() = re;
        z
    }
    fn from_parts(re: rug::Float, im: rug::Float) -> Self {
        let p = re.prec().max(im.prec());
        let mut z = rug::Complex::new(p);
        *z.mut_real() = re;
        *z.mut_imag() = im;
        z
    }
    fn re(&self) -> rug::Float {
        self.real().clone()
    }
    fn im(&self) -> rug::Float {
        self.imag().clone()
    }
    fn to_c64(&self) -> Complex64 {
        Complex64::new(self.real().to_f64(), self.imag().to_f64())
    }
    fn conj(&self) -> Self {
        self.clone().conj()
    }
    fn abs(&self) -> rug::Float {
        self.clone().abs().real().clone()
    }
    fn norm_sqr(&self) -> rug::Float {
        let re = self.real();
        let im = self.imag();
        rug::Float::with_val(self.prec().0, re * re) + rug::Float::with_val(self.prec().0, im * im)
    }
    fn arg(&self) -> rug::Float {
        self.clone().arg().real().clone()
    }
    fn sqrt(self) -> Self {
        rug::Complex::sqrt(self)
    }
    fn exp(self) -> Self {
        rug::Complex::exp(self)
    }
    fn ln(self) -> Self {
        rug::Complex::ln(self)
    }
    fn powi(self, n: i32) -> Self {
        use rug::ops::Pow;
        self.pow(n)
    }
    fn mul_i(self) -> Self {
        self.mul_i(false)
    }
    fn is_finite(&self) -> bool {
        self.real().is_finite() && self.imag().is_finite()
    }
    fn pi_like(&self) -> Self {
        let pi = rug::Float::with_val(self.prec().0, rug::float::Constant::Pi);
        Self::from_re(pi)
    }
}

/// Relative difference |a-b| / max(|a|,|b|,floor), as f64 for tolerance tests.
pub fn rel_diff<C: CScalar>(a: &C, b: &C) -> f64 {
    let num = (a.clone() - b).abs().to_f64();
    let den = a.abs().to_f64().max(b.abs().to_f64()).max(1e-300);
    num / den
}

/// Absolute difference |a-b| as f64.
pub fn abs_diff<C: CScalar>(a: &C, b: &C) -> f64 {
    (a.clone() - b).abs().to_f64()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exercise<C: CScalar>(bits: u32) {
        let one = C::with_prec(bits, 1.0, 0.0);
        let z = one.like(3.0, 4.0);
        assert!((z.abs().to_f64() - 5.0).abs() < 1e-12);
        let w = z.clone().sqrt();
        assert!(rel_diff(&(w.clone() * &w), &z) < 1e-12);
        let e = one.like(0.0, std::f64::consts::PI).exp();
        assert!(abs_diff(&e, &one.like(-1.0, 0.0)) < 1e-12);
        let i2 = one.i_like().powi(2);
        assert!(abs_diff(&i2, &one.like(-1.0, 0.0)) < 1e-14);
        assert!(rel_diff(&z.clone().mul_i(), &(z.clone() * one.i_like())) < 1e-14);
        let tpi = one.two_pi_i_like();
        assert!((tpi.im().to_f64() - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!(tpi.re().to_f64().abs() < 1e-12);
    }

    #[test]
    fn f64_backend() {
        exercise::<Complex64>(53);
    }

    #[test]
    fn mpc_backend() {
        exercise::<rug::Complex>(128);
        // precision actually carries: sqrt(2) to 40 digits
        let two = rug::Complex::with_prec(160, 2.0, 0.0);
        let r = two.sqrt();
        let r2 = r.clone() * &r;
        let err = CScalar::abs(&(r2 - rug::Complex::with_prec(160, 2.0, 0.0)));
        assert!(err.to_f64() < 1e-40);
    }
}
