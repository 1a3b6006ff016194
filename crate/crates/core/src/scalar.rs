//! Scalar domains used for matrix entries and results.
//!
//! Every model, system and result is parameterised by a [`Scalar`]: either
//! `f64` (iterative, floating point) or [`Rational`] (arbitrary precision,
//! exact). A single matrix never mixes the two.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// Arbitrary-precision rational number.
pub type Rational = BigRational;

/// Operations shared by the floating-point and exact scalar domains.
pub trait Scalar:
    Clone
    + fmt::Debug
    + PartialEq
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    /// `true` for the rational domain.
    const EXACT: bool;

    /// Converts a finite float. The rational domain converts exactly.
    fn from_f64(value: f64) -> Option<Self>;

    fn from_i64(value: i64) -> Self;

    fn from_rational(value: &Rational) -> Self;

    fn to_f64(&self) -> f64;

    fn to_rational(&self) -> Option<Rational>;

    /// Parses a decimal (`0.25`, `1e-3`) or fraction (`1/4`) literal.
    fn parse_literal(text: &str) -> Option<Self>;

    /// Canonical text used by file writers: shortest round-trip decimal for
    /// floats, `num/den` for rationals.
    fn to_canonical(&self) -> String;

    /// Short human-readable text: six significant digits for floats.
    fn to_short(&self) -> String;

    fn abs_value(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    fn floor_int(&self) -> Option<i64>;

    fn ceil_int(&self) -> Option<i64>;

    fn powi(&self, exponent: i64) -> Option<Self>;

    /// Real power. Only integral exponents are supported in the exact domain.
    fn powf(&self, exponent: &Self) -> Option<Self>;

    /// `|self - other| <= tol`, evaluated in the scalar's own arithmetic.
    fn within(&self, other: &Self, tol: f64) -> bool {
        let diff = (self.clone() - other.clone()).abs_value();
        match Self::from_f64(tol) {
            Some(t) => diff <= t,
            None => false,
        }
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_f64(value: f64) -> Option<Self> {
        value.is_finite().then_some(value)
    }

    fn from_i64(value: i64) -> Self {
        value as f64
    }

    fn from_rational(value: &Rational) -> Self {
        rational_to_f64(value)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn to_rational(&self) -> Option<Rational> {
        Rational::from_float(*self)
    }

    fn parse_literal(text: &str) -> Option<Self> {
        let text = text.trim();
        if let Some((num, den)) = text.split_once('/') {
            let num: f64 = num.trim().parse().ok()?;
            let den: f64 = den.trim().parse().ok()?;
            if den == 0.0 {
                return None;
            }
            return Self::from_f64(num / den);
        }
        text.parse::<f64>().ok().and_then(Self::from_f64)
    }

    fn to_canonical(&self) -> String {
        format!("{}", self)
    }

    fn to_short(&self) -> String {
        format_significant(*self, 6)
    }

    fn floor_int(&self) -> Option<i64> {
        let f = self.floor();
        (f.is_finite() && f.abs() < 9.2e18).then_some(f as i64)
    }

    fn ceil_int(&self) -> Option<i64> {
        let c = self.ceil();
        (c.is_finite() && c.abs() < 9.2e18).then_some(c as i64)
    }

    fn powi(&self, exponent: i64) -> Option<Self> {
        let e = i32::try_from(exponent).ok()?;
        Self::from_f64(f64::powi(*self, e))
    }

    fn powf(&self, exponent: &Self) -> Option<Self> {
        Self::from_f64(f64::powf(*self, *exponent))
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_f64(value: f64) -> Option<Self> {
        Rational::from_float(value)
    }

    fn from_i64(value: i64) -> Self {
        Rational::from_integer(BigInt::from(value))
    }

    fn from_rational(value: &Rational) -> Self {
        value.clone()
    }

    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }

    fn to_rational(&self) -> Option<Rational> {
        Some(self.clone())
    }

    fn parse_literal(text: &str) -> Option<Self> {
        parse_exact(text)
    }

    fn to_canonical(&self) -> String {
        format!("{}", self)
    }

    fn to_short(&self) -> String {
        format!("{}", self)
    }

    fn floor_int(&self) -> Option<i64> {
        self.floor().to_integer().to_i64()
    }

    fn ceil_int(&self) -> Option<i64> {
        self.ceil().to_integer().to_i64()
    }

    fn powi(&self, exponent: i64) -> Option<Self> {
        let e = i32::try_from(exponent).ok()?;
        if e < 0 && self.is_zero() {
            return None;
        }
        Some(num_traits::Pow::pow(self, e))
    }

    fn powf(&self, exponent: &Self) -> Option<Self> {
        if !exponent.is_integer() {
            return None;
        }
        self.powi(exponent.to_integer().to_i64()?)
    }
}

/// Converts a rational to the nearest representable float.
pub fn rational_to_f64(value: &Rational) -> f64 {
    if let Some(v) = ToPrimitive::to_f64(value) {
        if v.is_finite() {
            return v;
        }
    }
    // Very large numerators/denominators: scale both down first.
    let n = value.numer();
    let d = value.denom();
    let shift = n.bits().max(d.bits()).saturating_sub(1000);
    let ns = (n >> shift).to_f64().unwrap_or(f64::NAN);
    let ds = (d >> shift).to_f64().unwrap_or(f64::NAN);
    ns / ds
}

/// Parses a decimal or fraction literal into an exact rational.
///
/// `0.1` becomes `1/10`, not the binary approximation of 0.1.
pub fn parse_exact(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num = parse_exact(num)?;
        let den = parse_exact(den)?;
        if den.is_zero() {
            return None;
        }
        return Some(num / den);
    }
    let (negative, body) = match text.as_bytes().first()? {
        b'-' => (true, &text[1..]),
        b'+' => (false, &text[1..]),
        _ => (false, text),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(pos) => (&body[..pos], body[pos + 1..].parse::<i32>().ok()?),
        None => (body, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{}{}", int_part, frac_part);
    let mut value = Rational::from_integer(digits.parse::<BigInt>().ok()?);
    let scale = exponent.checked_sub(i32::try_from(frac_part.len()).ok()?)?;
    if scale.unsigned_abs() > 100_000 {
        return None;
    }
    let ten = Rational::from_integer(BigInt::from(10));
    value *= num_traits::Pow::pow(&ten, scale);
    if negative {
        value = -value;
    }
    Some(value)
}

/// Formats a float with `digits` significant digits, trimming trailing zeros
/// (the `%g` convention).
pub fn format_significant(value: f64, digits: usize) -> String {
    if value.is_nan() {
        return "nan".to_string();
    }
    if value.is_infinite() {
        return if value > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if value == 0.0 {
        return "0".to_string();
    }
    let digits = digits.max(1);
    // Round first so that e.g. 999999.7 moves to the next decade.
    let sci = format!("{:.*e}", digits - 1, value);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -5 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", mantissa, sign, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, value)).to_string()
    }
}

fn trim_zeros(text: &str) -> &str {
    if text.contains('.') {
        text.trim_end_matches('0').trim_end_matches('.')
    } else {
        text
    }
}
