//! Exact arithmetic on big integers and rationals.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub fn pow2(bits: u32) -> BigInt {
    BigInt::one() << bits as usize
}

/// `v mod 2^bits` in `[0, 2^bits)`.
pub fn modulo(v: &BigInt, bits: u32) -> BigUint {
    v.mod_floor(&pow2(bits)).to_biguint().expect("non-negative")
}

/// Two's-complement reading of `v mod 2^bits`.
pub fn centered(v: &BigInt, bits: u32) -> BigInt {
    let r = v.mod_floor(&pow2(bits));
    if bits > 0 && r >= pow2(bits - 1) {
        r - pow2(bits)
    } else {
        r
    }
}

/// `floor(v / 2^bits)`.
pub fn floor_shift(v: &BigInt, bits: u32) -> BigInt {
    v.div_floor(&pow2(bits))
}

/// Value of a raw fixed-point integer.
pub fn rational(raw: &BigInt, d: u32) -> BigRational {
    BigRational::new(raw.clone(), pow2(d))
}

/// `floor(q · 2^d)`.
pub fn floor_to_grid(q: &BigRational, d: u32) -> BigInt {
    (q * BigRational::from_integer(pow2(d))).floor().to_integer()
}

pub fn to_f64(q: &BigRational) -> f64 {
    let (n, d) = (q.numer().to_f64().unwrap_or(f64::NAN), q.denom().to_f64().unwrap_or(f64::NAN));
    if n.is_finite() && d.is_finite() {
        return n / d;
    }
    // scale down both sides when they overflow f64
    let shift = q.numer().bits().max(q.denom().bits()).saturating_sub(1000) as usize;
    let n = (q.numer() >> shift).to_f64().unwrap_or(f64::NAN);
    let d = (q.denom() >> shift).to_f64().unwrap_or(f64::NAN);
    n / d
}

/// `Σ (a_j / 2^d) · x^j` for raw coefficients `a_j`.
pub fn poly_exact(coeffs: &[i128], d: u32, x: &BigRational) -> BigRational {
    let scale = BigRational::from_integer(pow2(d));
    coeffs.iter().rev().fold(BigRational::zero(), |acc, &c| {
        acc * x + BigRational::from_integer(BigInt::from(c)) / &scale
    })
}

/// `floor(p(x_raw / 2^d) · 2^d)` for raw input and coefficients.
pub fn poly_fixed(coeffs: &[i128], d: u32, x_raw: &BigInt) -> BigInt {
    floor_to_grid(&poly_exact(coeffs, d, &rational(x_raw, d)), d)
}

/// `x^k mod 2^bits` by repeated multiplication.
pub fn pow_mod(x: &BigInt, k: usize, bits: u32) -> BigUint {
    let mut acc = BigInt::one();
    for _ in 0..k {
        acc = (acc * x).mod_floor(&pow2(bits));
    }
    modulo(&acc, bits)
}

pub fn abs_diff(a: &BigInt, b: &BigInt) -> BigInt {
    (a - b).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_shift_rounds_down_for_negatives() {
        assert_eq!(floor_shift(&BigInt::from(-1), 4), BigInt::from(-1));
        assert_eq!(floor_shift(&BigInt::from(-16), 4), BigInt::from(-1));
        assert_eq!(floor_shift(&BigInt::from(-17), 4), BigInt::from(-2));
        assert_eq!(floor_shift(&BigInt::from(17), 4), BigInt::from(1));
    }

    #[test]
    fn centered_wraps() {
        assert_eq!(centered(&BigInt::from(15), 4), BigInt::from(-1));
        assert_eq!(centered(&BigInt::from(7), 4), BigInt::from(7));
        assert_eq!(centered(&BigInt::from(-9), 4), BigInt::from(7));
    }

    #[test]
    fn relu_poly_reference_points() {
        let c = [14014, 32768, 15105, 0, -737, 0, 15];
        let at = |v: i64| to_f64(&poly_exact(&c, 16, &BigRational::from_integer(BigInt::from(v))));
        assert_eq!(at(0), 0.213836669921875);
        assert_eq!(at(1), 0.9333038330078125);
        assert_eq!(poly_fixed(&c, 16, &BigInt::from(65536)), BigInt::from(61165));
    }

    #[test]
    fn pow_mod_small_ring() {
        assert_eq!(pow_mod(&BigInt::from(3), 4, 4), BigUint::from(1u32));
        assert_eq!(pow_mod(&BigInt::from(-1), 3, 8), BigUint::from(255u32));
    }
}
