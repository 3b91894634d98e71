//! Exact rational helpers on top of `BigRational`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid rational literal `{0}`")]
pub struct ParseRationalError(pub String);

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

pub fn half() -> Rational {
    ratio(1, 2)
}

/// `2^e` for any integer exponent.
pub fn pow2(e: i64) -> Rational {
    let m = BigInt::one() << e.unsigned_abs();
    if e >= 0 {
        Rational::from_integer(m)
    } else {
        Rational::new(BigInt::one(), m)
    }
}

pub fn from_bigint(n: BigInt) -> Rational {
    Rational::from_integer(n)
}

pub fn clamp01(x: &Rational) -> Rational {
    if x.is_negative() {
        zero()
    } else if *x > one() {
        one()
    } else {
        x.clone()
    }
}

pub fn max_of(a: &Rational, b: &Rational) -> Rational {
    if a >= b {
        a.clone()
    } else {
        b.clone()
    }
}

pub fn min_of(a: &Rational, b: &Rational) -> Rational {
    if a <= b {
        a.clone()
    } else {
        b.clone()
    }
}

/// `1 / max(1, x)`.
pub fn safe_recip(x: &Rational) -> Rational {
    if *x <= one() {
        one()
    } else {
        x.recip()
    }
}

/// Largest multiple of `2^-level` not above `x`.
pub fn floor_dyadic(x: &Rational, level: u32) -> Rational {
    let scale = BigInt::one() << level;
    let scaled = x * Rational::from_integer(scale.clone());
    Rational::new(scaled.floor().to_integer(), scale)
}

/// Nearest multiple of `2^-level`, ties rounded up.
pub fn round_dyadic(x: &Rational, level: u32) -> Rational {
    let scale = BigInt::one() << level;
    let scaled = x * Rational::from_integer(scale.clone()) + half();
    Rational::new(scaled.floor().to_integer(), scale)
}

/// Reduced `p/q`, always with an explicit denominator.
pub fn fmt_exact(x: &Rational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Decimal expansion rounded half away from zero to `digits` places.
pub fn fmt_decimal(x: &Rational, digits: u32) -> String {
    let neg = x.is_negative();
    let a = x.abs();
    let scale = BigInt::from(10u32).pow(digits);
    let scaled = a * Rational::from_integer(scale.clone()) + half();
    let n = scaled.floor().to_integer();
    let (ip, fp) = n.div_rem(&scale);
    let mut out = String::new();
    if neg && !n.is_zero() {
        out.push('-');
    }
    out.push_str(&ip.to_string());
    if digits > 0 {
        let f = fp.to_string();
        out.push('.');
        for _ in f.len()..digits as usize {
            out.push('0');
        }
        out.push_str(&f);
    }
    out
}

/// Accepts `p/q`, integers, and finite decimals, each optionally signed.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError(text.to_string());
    let s = text.trim();
    if s.is_empty() {
        return Err(err());
    }
    if let Some((p, q)) = s.split_once('/') {
        let p = parse_decimal(p.trim()).ok_or_else(err)?;
        let q = parse_decimal(q.trim()).ok_or_else(err)?;
        if q.is_zero() {
            return Err(err());
        }
        return Ok(p / q);
    }
    parse_decimal(s).ok_or_else(err)
}

fn parse_decimal(s: &str) -> Option<Rational> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    if body.is_empty() {
        return None;
    }
    let (ip, fp) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if ip.is_empty() && fp.is_empty() {
        return None;
    }
    if !ip.chars().all(|c| c.is_ascii_digit()) || !fp.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{ip}{fp}");
    let n: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().ok()?
    };
    let d = BigInt::from(10u32).pow(fp.len() as u32);
    let v = Rational::new(n, d);
    Some(if neg { -v } else { v })
}

pub fn floor_to_bigint(x: &Rational) -> BigInt {
    x.floor().to_integer()
}

pub fn ceil_to_bigint(x: &Rational) -> BigInt {
    x.ceil().to_integer()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_literal_forms() {
        assert_eq!(parse_rational("4/5").unwrap(), ratio(4, 5));
        assert_eq!(parse_rational("0.8").unwrap(), ratio(4, 5));
        assert_eq!(parse_rational("-3").unwrap(), int(-3));
        assert_eq!(parse_rational("-0.05").unwrap(), ratio(-1, 20));
        assert_eq!(parse_rational(".5").unwrap(), half());
        assert_eq!(parse_rational("6/4").unwrap(), ratio(3, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn exact_format_is_reduced() {
        assert_eq!(fmt_exact(&ratio(6, 4)), "3/2");
        assert_eq!(fmt_exact(&int(0)), "0/1");
        assert_eq!(fmt_exact(&ratio(-247, 100)), "-247/100");
    }

    #[test]
    fn decimal_format_rounds() {
        assert_eq!(fmt_decimal(&ratio(1, 3), 4), "0.3333");
        assert_eq!(fmt_decimal(&ratio(2, 3), 4), "0.6667");
        assert_eq!(fmt_decimal(&ratio(-247, 100), 2), "-2.47");
        assert_eq!(fmt_decimal(&int(5), 0), "5");
        assert_eq!(fmt_decimal(&ratio(1, 20), 3), "0.050");
    }

    #[test]
    fn dyadic_snapping() {
        assert_eq!(pow2(-3), ratio(1, 8));
        assert_eq!(pow2(4), int(16));
        assert_eq!(floor_dyadic(&ratio(2, 3), 2), ratio(1, 2));
        assert_eq!(round_dyadic(&ratio(2, 3), 2), ratio(3, 4));
    }

    #[test]
    fn safe_recip_saturates_below_one() {
        assert_eq!(safe_recip(&ratio(1, 2)), one());
        assert_eq!(safe_recip(&int(-7)), one());
        assert_eq!(safe_recip(&int(4)), ratio(1, 4));
    }
}
