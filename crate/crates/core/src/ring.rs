//! Arithmetic over Z_{2^{l+s}}, fixed-point encoding, and the three sharing
//! representations (additive, MAC, masked).
//!
//! Every element is carried in a full 128-bit word and arithmetic wraps modulo
//! 2^128. Because 2^{l+s} divides 2^128, reducing with [`RingParams::reduce`]
//! at any point gives the same result as reducing after every operation.
//! Values are semantically defined modulo 2^l; shares and tags live in the
//! full share domain.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Serialized width of one ring element (little-endian).
pub const WORD_BYTES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RingError {
    #[error("invalid ring parameters l={l}, s={s}, d={d}: {reason}")]
    InvalidParams {
        l: u32,
        s: u32,
        d: u32,
        reason: &'static str,
    },
    #[error("value {value} is outside the fixed-point range (|v| < {bound})")]
    Overflow { value: f64, bound: f64 },
    #[error("sharing needs at least two parties, got {0}")]
    TooFewParties(usize),
}

/// Bit widths of the value domain (`l`), the statistical security parameter
/// (`s`) and the number of fractional bits (`d`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingParams {
    pub l: u32,
    pub s: u32,
    pub d: u32,
}

impl Default for RingParams {
    fn default() -> Self {
        Self { l: 64, s: 64, d: 16 }
    }
}

impl RingParams {
    pub fn new(l: u32, s: u32, d: u32) -> Result<Self, RingError> {
        let invalid = |reason| RingError::InvalidParams { l, s, d, reason };
        if l < d + 2 {
            return Err(invalid("l must be at least d + 2"));
        }
        if l + s > 128 {
            return Err(invalid("l + s must not exceed 128"));
        }
        if s < 2 {
            return Err(invalid("s must be at least 2"));
        }
        Ok(Self { l, s, d })
    }

    /// Small parameters for exhaustive checks; `d` is allowed to be zero.
    pub fn tiny(l: u32, s: u32) -> Result<Self, RingError> {
        Self::new(l, s, 0)
    }

    pub fn share_bits(&self) -> u32 {
        self.l + self.s
    }

    pub fn share_mask(&self) -> u128 {
        low_mask(self.share_bits())
    }

    pub fn value_mask(&self) -> u128 {
        low_mask(self.l)
    }

    pub fn key_mask(&self) -> u128 {
        low_mask(self.s)
    }

    /// Reduce into the share domain Z_{2^{l+s}}.
    pub fn reduce(&self, x: RingElement) -> RingElement {
        RingElement(x.0 & self.share_mask())
    }

    /// The `≡_l` operator: reduce into the value domain Z_{2^l}.
    pub fn to_value_domain(&self, x: RingElement) -> RingElement {
        reduce_to_value_domain(x, self.l)
    }

    /// Centered residue of `x mod 2^l`, in `[-2^{l-1}, 2^{l-1})`.
    pub fn centered(&self, x: RingElement) -> i128 {
        centered_residue(x.0, self.l)
    }

    /// Centered residue of `x mod 2^{l+s}`.
    pub fn centered_share(&self, x: RingElement) -> i128 {
        centered_residue(x.0, self.share_bits())
    }

    /// Two's-complement embedding of a signed integer into the share domain.
    pub fn from_signed(&self, v: i128) -> RingElement {
        self.reduce(RingElement(v as u128))
    }

    /// Logical right shift of the reduced share-domain representative.
    pub fn shr(&self, x: RingElement, bits: u32) -> RingElement {
        let r = self.reduce(x).0;
        RingElement(if bits >= 128 { 0 } else { r >> bits })
    }

    /// One unit in the last place of the fixed-point grid.
    pub fn ulp(&self) -> f64 {
        (-(self.d as f64)).exp2()
    }

    /// Largest magnitude accepted by [`encode_fixed`].
    pub fn fixed_bound(&self) -> f64 {
        ((self.l - 1 - self.d) as f64).exp2()
    }
}

fn low_mask(bits: u32) -> u128 {
    if bits >= 128 {
        u128::MAX
    } else {
        (1u128 << bits) - 1
    }
}

fn centered_residue(x: u128, bits: u32) -> i128 {
    let r = x & low_mask(bits);
    if bits >= 128 {
        return r as i128;
    }
    let half = 1u128 << (bits - 1);
    if r >= half {
        (r as i128) - (1i128 << (bits - 1)) * 2
    } else {
        r as i128
    }
}

/// An element of Z_{2^{l+s}}, stored in a 128-bit word.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RingElement(pub u128);

impl RingElement {
    pub const ZERO: Self = Self(0);
    pub const ONE: Self = Self(1);

    pub fn from_u64(v: u64) -> Self {
        Self(v as u128)
    }

    pub fn to_le_bytes(self) -> [u8; WORD_BYTES] {
        self.0.to_le_bytes()
    }

    pub fn from_le_bytes(bytes: [u8; WORD_BYTES]) -> Self {
        Self(u128::from_le_bytes(bytes))
    }

    pub fn pow(self, exp: u32) -> Self {
        Self(self.0.wrapping_pow(exp))
    }
}

impl fmt::Debug for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R({:#x})", self.0)
    }
}

impl fmt::Display for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Add for RingElement {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self(self.0.wrapping_add(rhs.0))
    }
}

impl Sub for RingElement {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self(self.0.wrapping_sub(rhs.0))
    }
}

impl Mul for RingElement {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self(self.0.wrapping_mul(rhs.0))
    }
}

impl Neg for RingElement {
    type Output = Self;
    fn neg(self) -> Self {
        Self(self.0.wrapping_neg())
    }
}

impl AddAssign for RingElement {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl SubAssign for RingElement {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl std::iter::Sum for RingElement {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |a, b| a + b)
    }
}

/// The `≡_l` operator.
pub fn reduce_to_value_domain(x: RingElement, l: u32) -> RingElement {
    RingElement(x.0 & low_mask(l))
}

/// A signed real encoded at scale 2^d.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub raw: RingElement,
}

impl FixedPoint {
    pub fn from_raw(raw: i128, params: &RingParams) -> Self {
        Self {
            raw: params.from_signed(raw),
        }
    }

    /// Signed integer at scale 2^d.
    pub fn raw_signed(&self, params: &RingParams) -> i128 {
        params.centered(self.raw)
    }
}

/// Encode `v` as `round(v * 2^d)`, rounding half away from zero.
pub fn encode_fixed(v: f64, params: &RingParams) -> Result<FixedPoint, RingError> {
    let bound = params.fixed_bound();
    if !v.is_finite() || v.abs() >= bound {
        return Err(RingError::Overflow { value: v, bound });
    }
    let scaled = (v * (params.d as f64).exp2()).round();
    Ok(FixedPoint::from_raw(scaled as i128, params))
}

pub fn decode_fixed(x: FixedPoint, params: &RingParams) -> f64 {
    params.centered(x.raw) as f64 * params.ulp()
}

/// One party's additive fragment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdditiveShare {
    pub owner: usize,
    pub frag: RingElement,
}

/// Split `secret` into `n` fragments; the first `n - 1` are uniform.
pub fn share_split<R: RngCore + ?Sized>(
    secret: RingElement,
    n: usize,
    rng: &mut R,
    params: &RingParams,
) -> Result<Vec<AdditiveShare>, RingError> {
    if n < 2 {
        return Err(RingError::TooFewParties(n));
    }
    let mut shares = Vec::with_capacity(n);
    let mut acc = RingElement::ZERO;
    for owner in 0..n - 1 {
        let frag = params.reduce(RingElement(
            ((rng.next_u64() as u128) << 64) | rng.next_u64() as u128,
        ));
        acc += frag;
        shares.push(AdditiveShare { owner, frag });
    }
    shares.push(AdditiveShare {
        owner: n - 1,
        frag: params.reduce(secret - acc),
    });
    Ok(shares)
}

pub fn reconstruct(shares: &[AdditiveShare], params: &RingParams) -> RingElement {
    params.reduce(shares.iter().map(|s| s.frag).sum())
}

/// One party's fragment of a MAC-authenticated value `⟨x⟩`: a value fragment
/// and a fragment of the tag `x·Δ`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacShare {
    pub value: RingElement,
    pub tag: RingElement,
}

impl MacShare {
    pub const ZERO: Self = Self {
        value: RingElement::ZERO,
        tag: RingElement::ZERO,
    };

    pub fn scale(self, c: RingElement) -> Self {
        Self {
            value: self.value * c,
            tag: self.tag * c,
        }
    }

    pub fn reduce(self, params: &RingParams) -> Self {
        Self {
            value: params.reduce(self.value),
            tag: params.reduce(self.tag),
        }
    }
}

impl Add for MacShare {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            value: self.value + rhs.value,
            tag: self.tag + rhs.tag,
        }
    }
}

impl Sub for MacShare {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self {
            value: self.value - rhs.value,
            tag: self.tag - rhs.tag,
        }
    }
}

/// One party's view of `[[x]]`: the public masked value `m_x = x + δ_x` and
/// its MAC fragment of the mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedShare {
    pub masked_value: RingElement,
    pub mask_share: MacShare,
}

/// The global MAC key. `frags[i] < 2^s` is held by party `i`; the Helper holds
/// `delta`, the share-domain sum of the lifted fragments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlobalMacKey {
    pub delta: RingElement,
    pub frags: Vec<RingElement>,
}

impl GlobalMacKey {
    /// Lift fragments from Z_{2^s} into the share domain with zero high bits.
    pub fn from_frags(frags: Vec<RingElement>, params: &RingParams) -> Self {
        let frags: Vec<_> = frags
            .into_iter()
            .map(|f| RingElement(f.0 & params.key_mask()))
            .collect();
        let delta = params.reduce(frags.iter().copied().sum());
        Self { delta, frags }
    }
}

/// Reconstruct a MAC-shared value and its tag from all fragments.
pub fn open_mac(shares: &[MacShare], params: &RingParams) -> (RingElement, RingElement) {
    let value = params.reduce(shares.iter().map(|s| s.value).sum());
    let tag = params.reduce(shares.iter().map(|s| s.tag).sum());
    (value, tag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand::RngCore;
    use rand_chacha::ChaCha20Rng;

    fn p() -> RingParams {
        RingParams::default()
    }

    #[test]
    fn params_validation() {
        assert!(RingParams::new(64, 64, 16).is_ok());
        assert!(RingParams::new(17, 8, 16).is_err());
        assert!(RingParams::new(100, 29, 16).is_err());
        assert!(RingParams::new(64, 1, 16).is_err());
        assert!(RingParams::tiny(4, 4).is_ok());
    }

    #[test]
    fn encode_examples() {
        let params = p();
        assert_eq!(encode_fixed(0.0, &params).unwrap().raw, RingElement::ZERO);
        assert_eq!(encode_fixed(1.5, &params).unwrap().raw, RingElement(98304));
        // two's complement in Z_{2^128}: 2^128 - 65536, computed independently
        let expected = (BigUint::from(1u8) << 128u32) - BigUint::from(65536u32);
        let got = BigUint::from(encode_fixed(-1.0, &params).unwrap().raw.0);
        assert_eq!(got, expected);
    }

    #[test]
    fn encode_overflow() {
        let params = p();
        let bound = params.fixed_bound();
        assert!(matches!(
            encode_fixed(bound, &params),
            Err(RingError::Overflow { .. })
        ));
        assert!(encode_fixed(-bound, &params).is_err());
        assert!(encode_fixed(f64::NAN, &params).is_err());
        assert!(encode_fixed(bound / 2.0, &params).is_ok());
    }

    #[test]
    fn encode_rounds_half_away_from_zero() {
        let params = RingParams::new(16, 8, 1).unwrap();
        assert_eq!(encode_fixed(0.25, &params).unwrap().raw_signed(&params), 1);
        assert_eq!(encode_fixed(-0.25, &params).unwrap().raw_signed(&params), -1);
    }

    #[test]
    fn decode_examples() {
        let params = p();
        assert_eq!(decode_fixed(FixedPoint { raw: RingElement(98304) }, &params), 1.5);
        assert_eq!(decode_fixed(FixedPoint { raw: RingElement::ZERO }, &params), 0.0);
        let pi = decode_fixed(encode_fixed(std::f64::consts::PI, &params).unwrap(), &params);
        assert!((pi - std::f64::consts::PI).abs() <= params.ulp() / 2.0);
    }

    #[test]
    fn decode_ignores_bits_above_l() {
        let params = p();
        let raw = RingElement(98304 + (7u128 << 64));
        assert_eq!(decode_fixed(FixedPoint { raw }, &params), 1.5);
    }

    #[test]
    fn value_domain_examples() {
        assert_eq!(
            reduce_to_value_domain(RingElement((1u128 << 64) + 7), 64),
            RingElement(7)
        );
        assert_eq!(reduce_to_value_domain(RingElement::ZERO, 64), RingElement::ZERO);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let r = ((rng.next_u64() as u128) << 64) | rng.next_u64() as u128;
            let oracle = BigUint::from(r) % (BigUint::from(1u8) << 64u32);
            let got = BigUint::from(reduce_to_value_domain(RingElement(r), 64).0);
            assert_eq!(got, oracle);
        }
    }

    #[test]
    fn share_split_two_zero() {
        let params = p();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let shares = share_split(RingElement::ZERO, 2, &mut rng, &params).unwrap();
        assert_eq!(shares[1].frag, params.reduce(-shares[0].frag));
        assert_eq!(reconstruct(&shares, &params), RingElement::ZERO);
    }

    #[test]
    fn share_split_rejects_single_party() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert_eq!(
            share_split(RingElement::ONE, 1, &mut rng, &p()),
            Err(RingError::TooFewParties(1))
        );
    }

    #[test]
    fn share_split_reconstructs_1000_trials() {
        let params = p();
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let secret = params.reduce(RingElement(
                ((rng.next_u64() as u128) << 64) | rng.next_u64() as u128,
            ));
            let shares = share_split(secret, 3, &mut rng, &params).unwrap();
            let sum = shares
                .iter()
                .fold(BigUint::from(0u8), |a, s| a + BigUint::from(s.frag.0));
            assert_eq!(sum % (BigUint::from(1u8) << 128u32), BigUint::from(secret.0));
        }
    }

    #[test]
    fn share_split_is_deterministic_per_seed() {
        let params = p();
        let a = share_split(RingElement(5), 3, &mut ChaCha20Rng::seed_from_u64(42), &params);
        let b = share_split(RingElement(5), 3, &mut ChaCha20Rng::seed_from_u64(42), &params);
        assert_eq!(a, b);
    }

    #[test]
    fn share_split_identity_at_supported_party_counts() {
        let params = p();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for n in [2usize, 3, 5] {
            for _ in 0..10_000 {
                let secret = params.reduce(RingElement(
                    ((rng.next_u64() as u128) << 64) | rng.next_u64() as u128,
                ));
                let shares = share_split(secret, n, &mut rng, &params).unwrap();
                assert_eq!(reconstruct(&shares, &params), secret);
            }
        }
    }

    #[test]
    fn mac_algebra_exhaustive_small_ring() {
        // l = s = 8: every value against a handful of keys.
        let params = RingParams::tiny(8, 8).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for key_frags in [[3u128, 250], [0, 1], [255, 255], [17, 90]] {
            let key = GlobalMacKey::from_frags(
                key_frags.iter().map(|&f| RingElement(f)).collect(),
                &params,
            );
            for x in 0..(1u128 << 16) {
                let x = RingElement(x);
                let values = share_split(x, 2, &mut rng, &params).unwrap();
                let tags = share_split(key.delta * x, 2, &mut rng, &params).unwrap();
                let shares: Vec<MacShare> = values
                    .iter()
                    .zip(&tags)
                    .map(|(v, t)| MacShare {
                        value: v.frag,
                        tag: t.frag,
                    })
                    .collect();
                let (value, tag) = open_mac(&shares, &params);
                assert_eq!(tag, params.reduce(key.delta * value));
            }
        }
    }

    proptest! {
        #[test]
        fn value_domain_is_idempotent_homomorphism(a: u128, b: u128) {
            let params = p();
            let (a, b) = (RingElement(a), RingElement(b));
            let r = |x| params.to_value_domain(x);
            prop_assert_eq!(r(r(a)), r(a));
            prop_assert_eq!(r(a + b), r(r(a) + r(b)));
            prop_assert_eq!(r(a * b), r(r(a) * r(b)));
        }

        #[test]
        fn fixed_addition_is_exact_on_grid(a in -1_000_000i64..1_000_000, b in -1_000_000i64..1_000_000) {
            let params = p();
            let (x, y) = (a as f64 * params.ulp(), b as f64 * params.ulp());
            let ex = encode_fixed(x, &params).unwrap();
            let ey = encode_fixed(y, &params).unwrap();
            let sum = FixedPoint { raw: params.reduce(ex.raw + ey.raw) };
            prop_assert_eq!(decode_fixed(sum, &params), x + y);
        }

        #[test]
        fn quantization_error_is_half_ulp(v in -1.0e9f64..1.0e9) {
            let params = p();
            let back = decode_fixed(encode_fixed(v, &params).unwrap(), &params);
            prop_assert!((back - v).abs() <= params.ulp() / 2.0 + v.abs() * f64::EPSILON);
        }

        #[test]
        fn serialization_is_16_byte_le(x: u128) {
            let e = RingElement(x);
            prop_assert_eq!(RingElement::from_le_bytes(e.to_le_bytes()), e);
            prop_assert_eq!(e.to_le_bytes()[0], (x & 0xff) as u8);
        }
    }
}
