//! Arbitrary-precision combinatorial primitives.
//!
//! Everything here is exact. Decimal strings are produced only by the
//! rendering helpers at the bottom, which round the exact value once.

use std::sync::{OnceLock, RwLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, Zero};

use crate::error::{Error, Result};

/// Arbitrary-precision integer. Analytic counts are always non-negative.
pub type ExactInt = BigInt;

/// Exact rational, always held in lowest terms with a positive denominator.
pub type ExactRatio = BigRational;

/// Growable table of `k!`.
///
/// Reads take a shared lock; growth takes the write lock and only ever
/// appends, so every value a reader observes is final.
#[derive(Debug)]
pub struct FactorialCache {
    table: RwLock<Vec<ExactInt>>,
}

impl Default for FactorialCache {
    fn default() -> Self {
        Self::new()
    }
}

impl FactorialCache {
    pub fn new() -> Self {
        Self {
            table: RwLock::new(vec![ExactInt::one()]),
        }
    }

    /// Makes sure `k!` is cached for every `k <= bound`.
    pub fn ensure(&self, bound: u32) {
        let bound = bound as usize;
        if self.table.read().expect("factorial cache poisoned").len() > bound {
            return;
        }
        let mut table = self.table.write().expect("factorial cache poisoned");
        while table.len() <= bound {
            let k = table.len();
            let next = &table[k - 1] * k;
            table.push(next);
        }
    }

    /// `k!`, extending the table when needed.
    pub fn get(&self, k: u32) -> ExactInt {
        self.ensure(k);
        self.table.read().expect("factorial cache poisoned")[k as usize].clone()
    }

    /// Number of cached entries (`0!` through `(len-1)!`).
    pub fn len(&self) -> usize {
        self.table.read().expect("factorial cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Process-wide factorial cache shared by all analytic routes.
pub fn factorials() -> &'static FactorialCache {
    static CACHE: OnceLock<FactorialCache> = OnceLock::new();
    CACHE.get_or_init(FactorialCache::new)
}

pub fn factorial(k: u32) -> ExactInt {
    factorials().get(k)
}

/// `n choose k`; zero when `k` lies outside `0..=n`.
pub fn binomial(n: u32, k: i64) -> ExactInt {
    if k < 0 || k > n as i64 {
        return ExactInt::zero();
    }
    let k = k as u32;
    let cache = factorials();
    cache.get(n) / (cache.get(k) * cache.get(n - k))
}

/// `n! / (parts[0]! * parts[1]! * ...)`. The parts must sum to `n`.
pub fn multinomial(n: u32, parts: &[u32]) -> Result<ExactInt> {
    let total: u64 = parts.iter().map(|&p| p as u64).sum();
    if total != n as u64 {
        return Err(Error::PartsSumMismatch {
            expected: n as u64,
            actual: total,
        });
    }
    let cache = factorials();
    let denom = parts
        .iter()
        .fold(ExactInt::one(), |acc, &p| acc * cache.get(p));
    Ok(cache.get(n) / denom)
}

/// `base^exp` with `0^0 = 1`.
pub fn integer_pow(base: u64, exp: u32) -> ExactInt {
    Pow::pow(ExactInt::from(base), exp)
}

/// Builds a reduced ratio; panics on a zero denominator.
pub fn ratio(numer: impl Into<ExactInt>, denom: impl Into<ExactInt>) -> ExactRatio {
    ExactRatio::new(numer.into(), denom.into())
}

// ---------------------------------------------------------------------------
// Rendering

/// Rounds `|value|` to the nearest integer, ties away from zero.
fn round_half_away(value: &ExactRatio) -> ExactInt {
    let abs = value.abs();
    let (q, r) = abs.numer().div_rem(abs.denom());
    if r * 2u32 >= *abs.denom() {
        q + 1u32
    } else {
        q
    }
}

fn pow10(exp: u32) -> ExactInt {
    integer_pow(10, exp)
}

/// Fixed-point rendering with exactly `decimals` digits after the point.
///
/// `fixed(&(15/81), 4) == "0.1852"`.
pub fn fixed(value: &ExactRatio, decimals: u32) -> String {
    let scaled = value * ExactRatio::from_integer(pow10(decimals));
    let digits = round_half_away(&scaled).to_string();
    let negative = value.is_negative() && digits.chars().any(|c| c != '0');
    let body = if decimals == 0 {
        digits
    } else {
        let width = decimals as usize + 1;
        let padded = format!("{digits:0>width$}");
        let split = padded.len() - decimals as usize;
        format!("{}.{}", &padded[..split], &padded[split..])
    };
    if negative {
        format!("-{body}")
    } else {
        body
    }
}

/// Decimal exponent `e` with `10^e <= |value| < 10^(e+1)`. `value` must be non-zero.
fn decimal_exponent(value: &ExactRatio) -> i64 {
    let abs = value.abs();
    let mut e = abs.numer().to_string().len() as i64 - abs.denom().to_string().len() as i64;
    let ten = ExactRatio::from_integer(ExactInt::from(10));
    loop {
        let lower = pow_ratio(&ten, e);
        if abs < lower {
            e -= 1;
        } else if abs >= &lower * &ten {
            e += 1;
        } else {
            return e;
        }
    }
}

fn pow_ratio(base: &ExactRatio, exp: i64) -> ExactRatio {
    if exp >= 0 {
        Pow::pow(base.clone(), exp as u64)
    } else {
        Pow::pow(base.recip(), exp.unsigned_abs())
    }
}

/// How a decimal rendering drops digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rounding {
    /// Nearest, ties away from zero.
    HalfAway,
    /// Drop the remaining digits.
    Truncate,
}

/// Leading `digits` significant digits of `|value|`, the decimal exponent of
/// the first one, and whether any non-zero digit was dropped.
fn significand(value: &ExactRatio, digits: u32, rounding: Rounding) -> (String, i64, bool) {
    let digits = digits.max(1);
    let mut e = decimal_exponent(value);
    let ten = ExactRatio::from_integer(ExactInt::from(10));
    let scaled = (value * pow_ratio(&ten, digits as i64 - 1 - e)).abs();
    let inexact = !scaled.is_integer();
    let mut kept = match rounding {
        Rounding::HalfAway => round_half_away(&scaled),
        Rounding::Truncate => scaled.to_integer(),
    };
    if kept >= pow10(digits) {
        // 9.9995 -> 10.00
        kept /= 10u32;
        e += 1;
    }
    (kept.to_string(), e, inexact)
}

/// Positional rendering with `digits` significant digits.
///
/// `significant(&p, 4) == "0.00009753"` for the 60-candy, 5-color match probability.
pub fn significant(value: &ExactRatio, digits: u32) -> String {
    significant_with(value, digits, Rounding::HalfAway)
}

/// Leading significant digits, followed by `...` when the expansion goes on.
///
/// `truncated(&p, 4) == "0.00009752..."` for the 60-candy, 5-color match probability.
pub fn truncated(value: &ExactRatio, digits: u32) -> String {
    if value.is_zero() {
        return "0".to_string();
    }
    let (_, _, inexact) = significand(value, digits, Rounding::Truncate);
    let body = significant_with(value, digits, Rounding::Truncate);
    if inexact {
        format!("{body}...")
    } else {
        body
    }
}

pub fn significant_with(value: &ExactRatio, digits: u32, rounding: Rounding) -> String {
    if value.is_zero() {
        return "0".to_string();
    }
    let (mantissa, e, _) = significand(value, digits, rounding);
    let sign = if value.is_negative() { "-" } else { "" };
    let n = mantissa.len() as i64;
    let body = if e < 0 {
        format!("0.{}{}", "0".repeat((-e - 1) as usize), mantissa)
    } else if e + 1 >= n {
        format!("{}{}", mantissa, "0".repeat((e + 1 - n) as usize))
    } else {
        let split = (e + 1) as usize;
        format!("{}.{}", &mantissa[..split], &mantissa[split..])
    };
    format!("{sign}{body}")
}

/// Scientific rendering with `digits` significant digits, e.g. `1.574e-6`.
pub fn scientific(value: &ExactRatio, digits: u32) -> String {
    scientific_with(value, digits, Rounding::HalfAway)
}

pub fn scientific_with(value: &ExactRatio, digits: u32, rounding: Rounding) -> String {
    if value.is_zero() {
        return "0".to_string();
    }
    let (mantissa, e, _) = significand(value, digits, rounding);
    let sign = if value.is_negative() { "-" } else { "" };
    let (head, tail) = mantissa.split_at(1);
    if tail.is_empty() {
        format!("{sign}{head}e{e}")
    } else {
        format!("{sign}{head}.{tail}e{e}")
    }
}

/// Parses `"3/10"`, `"0.125"`, `"-2"` or `"1e-3"` into an exact ratio.
pub fn parse_ratio(text: &str) -> Option<ExactRatio> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num: ExactInt = num.trim().parse().ok()?;
        let den: ExactInt = den.trim().parse().ok()?;
        if den.is_zero() {
            return None;
        }
        return Some(ExactRatio::new(num, den));
    }
    let (mantissa, exp) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i64>().ok()?),
        None => (text, 0),
    };
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let digits: ExactInt = format!("{int_part}{frac_part}0").parse().ok()?;
    let digits = digits / 10u32;
    let ten = ExactRatio::from_integer(ExactInt::from(10));
    let mut value =
        ExactRatio::from_integer(digits) * pow_ratio(&ten, exp - frac_part.len() as i64);
    if negative {
        value = -value;
    }
    Some(value)
}
