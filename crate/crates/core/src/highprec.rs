//! Fixed-precision binary floats for the paths where exact rationals grow
//! too large. Conversions to and from the exact types are lossless in the
//! float-to-rational direction.

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use dashu_int::IBig;
use num_bigint::BigInt;
use num_traits::Pow;

use crate::exactmath::{ExactInt, ExactRatio};

pub type Float = FBig<HalfEven, 2>;

/// Significant decimal digits used when the caller does not choose.
pub const DEFAULT_DIGITS: u32 = 128;

/// Binary precision that carries `digits` significant decimal digits.
pub fn bits_for_digits(digits: u32) -> usize {
    (digits as f64 * std::f64::consts::LOG2_10).ceil() as usize + 4
}

/// Relative rounding error of one operation at `bits` of precision.
pub fn unit_roundoff(bits: usize) -> f64 {
    2f64.powi(1 - bits as i32)
}

fn to_ibig(x: &BigInt) -> IBig {
    IBig::from_le_bytes(&x.to_signed_bytes_le())
}

fn from_ibig(x: &IBig) -> BigInt {
    BigInt::from_signed_bytes_le(&x.to_le_bytes())
}

pub fn from_int(x: &ExactInt, bits: usize) -> Float {
    Float::from_parts(to_ibig(x), 0)
        .with_precision(bits)
        .value()
}

pub fn from_u64(x: u64, bits: usize) -> Float {
    from_int(&ExactInt::from(x), bits)
}

pub fn from_ratio(r: &ExactRatio, bits: usize) -> Float {
    from_int(r.numer(), bits) / from_int(r.denom(), bits)
}

pub fn zero(bits: usize) -> Float {
    from_u64(0, bits)
}

pub fn one(bits: usize) -> Float {
    from_u64(1, bits)
}

/// Exact value of a float as a rational.
pub fn to_ratio(f: &Float) -> ExactRatio {
    let repr = f.repr();
    let significand = from_ibig(repr.significand());
    let exponent = repr.exponent();
    let two = ExactInt::from(2);
    if exponent >= 0 {
        ExactRatio::from_integer(significand * Pow::pow(two, exponent as u64))
    } else {
        ExactRatio::new(significand, Pow::pow(two, exponent.unsigned_abs() as u64))
    }
}

pub fn to_f64(f: &Float) -> f64 {
    f.to_f64().value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactmath::ratio;

    #[test]
    fn integer_round_trip() {
        for v in [0i64, 1, -1, 255, -256, 1 << 40, -(1 << 50) + 3] {
            let x = ExactInt::from(v);
            assert_eq!(to_ratio(&from_int(&x, 200)), ExactRatio::from_integer(x));
        }
    }

    #[test]
    fn ratio_is_close() {
        let r = ratio(1, 3);
        let bits = bits_for_digits(50);
        let back = to_ratio(&from_ratio(&r, bits));
        let err = (back - &r) / &r;
        let err = crate::highprec::to_f64(&from_ratio(&err, 64)).abs();
        assert!(err <= unit_roundoff(bits), "{err}");
    }

    #[test]
    fn f64_conversion() {
        assert_eq!(to_f64(&from_ratio(&ratio(1, 4), 100)), 0.25);
        assert!((to_f64(&from_ratio(&ratio(26, 9), 100)) - 26.0 / 9.0).abs() < 1e-15);
    }
}
