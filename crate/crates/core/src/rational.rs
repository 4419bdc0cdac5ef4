//! Parsing, formatting, and root-finding helpers for exact rationals.
//!
//! Rationals enter the crate as `"num/den"` strings, plain integers, or
//! decimal literals (`"0.1"` becomes 1/10 exactly). They leave as both an
//! exact string and an f64.

use num::bigint::BigInt;
use num::traits::{Signed, ToPrimitive, Zero};
use num::BigRational;

use crate::error::{Error, Result};

/// Parse a rational from `"a/b"`, an integer literal, or a decimal literal.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad rational numerator in {s:?}")))?;
        let d: BigInt = den
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad rational denominator in {s:?}")))?;
        if d.is_zero() {
            return Err(Error::invalid(format!("zero denominator in {s:?}")));
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let digits = frac.trim();
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::invalid(format!("bad decimal literal {s:?}")));
        }
        let sign = if int.trim_start().starts_with('-') { -1 } else { 1 };
        let whole: BigInt = if int.trim() == "-" || int.trim().is_empty() {
            BigInt::zero()
        } else {
            int.trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad decimal literal {s:?}")))?
        };
        let scale = BigInt::from(10u32).pow(digits.len() as u32);
        let frac_part: BigInt = digits
            .parse()
            .map_err(|_| Error::invalid(format!("bad decimal literal {s:?}")))?;
        let numer = whole * &scale + BigInt::from(sign) * frac_part;
        return Ok(BigRational::new(numer, scale));
    }
    let n: BigInt = s
        .parse()
        .map_err(|_| Error::invalid(format!("not a rational: {s:?}")))?;
    Ok(BigRational::from_integer(n))
}

/// Parse a comma-separated list of rationals.
pub fn parse_rational_list(s: &str) -> Result<Vec<BigRational>> {
    s.split(',').map(parse_rational).collect()
}

/// Canonical exact string, `"45/23"` or `"5"` for integers.
pub fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn from_i64(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Exact square root if `n` is a perfect square.
fn exact_sqrt(n: &BigInt) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let root = n.sqrt();
    if &(&root * &root) == n {
        Some(root)
    } else {
        None
    }
}

/// A quadratic with integer coefficients in primitive form, positive leading
/// coefficient. Rational quadratics are normalized into this shape so the
/// discriminant test is a plain perfect-square test on a `BigInt`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntQuadratic {
    pub a: BigInt,
    pub b: BigInt,
    pub c: BigInt,
}

impl IntQuadratic {
    /// Normalize rational coefficients (a must be nonzero).
    pub fn from_rational(a: &BigRational, b: &BigRational, c: &BigRational) -> Result<Self> {
        if a.is_zero() {
            return Err(Error::invalid("quadratic has zero leading coefficient"));
        }
        let lcm = num::integer::lcm(
            num::integer::lcm(a.denom().clone(), b.denom().clone()),
            c.denom().clone(),
        );
        let mut ai = a.numer() * (&lcm / a.denom());
        let mut bi = b.numer() * (&lcm / b.denom());
        let mut ci = c.numer() * (&lcm / c.denom());
        let g = num::integer::gcd(num::integer::gcd(ai.abs(), bi.abs()), ci.abs());
        if !g.is_zero() {
            ai /= &g;
            bi /= &g;
            ci /= &g;
        }
        if ai.is_negative() {
            ai = -ai;
            bi = -bi;
            ci = -ci;
        }
        Ok(IntQuadratic { a: ai, b: bi, c: ci })
    }

    pub fn eval(&self, q: &BigRational) -> BigRational {
        let a = BigRational::from_integer(self.a.clone());
        let b = BigRational::from_integer(self.b.clone());
        let c = BigRational::from_integer(self.c.clone());
        (a * q + b) * q + c
    }

    pub fn discriminant(&self) -> BigInt {
        &self.b * &self.b - BigInt::from(4) * &self.a * &self.c
    }

    /// Largest real root, exact when the discriminant is a perfect square,
    /// otherwise bracketed by rational bisection to the requested width.
    pub fn largest_root(&self, width: &BigRational) -> Option<RootBracket> {
        let disc = self.discriminant();
        if disc.is_negative() {
            return None;
        }
        if let Some(s) = exact_sqrt(&disc) {
            let root = BigRational::new(-&self.b + s, BigInt::from(2) * &self.a);
            return Some(RootBracket {
                lo: root.clone(),
                hi: root,
                exact: true,
            });
        }
        // Leading coefficient positive: the quadratic is negative at the
        // vertex (disc > 0) and positive to the right of the largest root.
        let vertex = BigRational::new(-&self.b, BigInt::from(2) * &self.a);
        let one = BigRational::from_integer(BigInt::from(1));
        let mut hi = &vertex + &one;
        while !self.eval(&hi).is_positive() {
            hi = &vertex + (&hi - &vertex) * BigRational::from_integer(BigInt::from(2));
        }
        let mut lo = vertex;
        let two = BigRational::from_integer(BigInt::from(2));
        while &hi - &lo > *width {
            let mid = (&lo + &hi) / &two;
            if self.eval(&mid).is_positive() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(RootBracket {
            lo,
            hi,
            exact: false,
        })
    }
}

/// Rational enclosure of a real root; `lo == hi` when exact.
#[derive(Debug, Clone)]
pub struct RootBracket {
    pub lo: BigRational,
    pub hi: BigRational,
    pub exact: bool,
}

impl RootBracket {
    pub fn midpoint(&self) -> BigRational {
        if self.exact {
            self.lo.clone()
        } else {
            (&self.lo + &self.hi) / BigRational::from_integer(BigInt::from(2))
        }
    }
}
