//! Setup-phase keys and counter-mode PRF streams.
//!
//! The PRF is SHA-256 over `subkey || counter`, truncated to 128 bits and then
//! masked to the stream's domain width. Subkeys are derived per purpose so one
//! setup key can feed several independent streams.

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ring::RingElement;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PrfError {
    #[error("setup needs at least two parties, got {0}")]
    TooFewParties(usize),
    #[error("PRF stream counter exhausted")]
    CounterOverflow,
    #[error("invalid master seed: {0}")]
    BadSeed(String),
}

/// A 256-bit symmetric key.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrfKey(pub [u8; 32]);

impl std::fmt::Debug for PrfKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PrfKey({}..)", hex::encode(&self.0[..4]))
    }
}

impl PrfKey {
    /// Derive a child key bound to `label`.
    pub fn derive(&self, label: &str) -> PrfKey {
        let mut h = Sha256::new();
        h.update(self.0);
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        PrfKey(h.finalize().into())
    }
}

/// Master seed from which all setup keys are derived.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MasterSeed(pub PrfKey);

impl MasterSeed {
    /// Accepts a hex string of any even length; the bytes are hashed.
    pub fn from_hex(s: &str) -> Result<Self, PrfError> {
        let s = s.trim().trim_start_matches("0x");
        let bytes = hex::decode(s).map_err(|e| PrfError::BadSeed(e.to_string()))?;
        Ok(Self::from_bytes(&bytes))
    }

    pub fn from_bytes(bytes: &[u8]) -> Self {
        MasterSeed(PrfKey(Sha256::digest(bytes).into()))
    }

    pub fn from_u64(v: u64) -> Self {
        Self::from_bytes(&v.to_le_bytes())
    }

    /// Seed bytes for a role's private RNG.
    pub fn local_seed(&self, label: &str) -> [u8; 32] {
        self.0.derive(label).0
    }
}

/// Counter-mode PRF output stream reduced to a power-of-two domain.
#[derive(Clone, Debug)]
pub struct PrfStream {
    subkey: PrfKey,
    counter: u64,
    bits: u32,
}

impl PrfStream {
    pub fn new(key: &PrfKey, purpose: &str, bits: u32) -> Self {
        assert!((1..=128).contains(&bits), "domain width must be 1..=128");
        Self {
            subkey: key.derive(purpose),
            counter: 0,
            bits,
        }
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn domain_bits(&self) -> u32 {
        self.bits
    }

    pub fn draw(&mut self) -> Result<RingElement, PrfError> {
        let c = self.counter;
        self.counter = c.checked_add(1).ok_or(PrfError::CounterOverflow)?;
        Ok(RingElement(prf_block(&self.subkey, c) & domain_mask(self.bits)))
    }

    /// For tests of the overflow path.
    #[doc(hidden)]
    pub fn set_counter(&mut self, counter: u64) {
        self.counter = counter;
    }
}

fn domain_mask(bits: u32) -> u128 {
    if bits >= 128 {
        u128::MAX
    } else {
        (1u128 << bits) - 1
    }
}

fn prf_block(key: &PrfKey, counter: u64) -> u128 {
    let mut h = Sha256::new();
    h.update(key.0);
    h.update(counter.to_le_bytes());
    let out = h.finalize();
    let mut block = [0u8; 16];
    block.copy_from_slice(&out[..16]);
    u128::from_le_bytes(block)
}

/// Keys held by party `index`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartyKeys {
    pub index: usize,
    /// Shared with the Helper only.
    pub own: PrfKey,
    /// Common to all parties, unknown to the Helper.
    pub parties: PrfKey,
    /// Common to every role.
    pub all: PrfKey,
}

/// Keys held by the Helper. There is no field for the party-only key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HelperKeys {
    pub per_party: Vec<PrfKey>,
    pub all: PrfKey,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeySet {
    pub parties: Vec<PartyKeys>,
    pub helper: HelperKeys,
}

pub fn setup(n: usize, seed: &MasterSeed) -> Result<KeySet, PrfError> {
    if n < 2 {
        return Err(PrfError::TooFewParties(n));
    }
    let root = seed.0;
    let k_p = root.derive("k_P");
    let k_all = root.derive("k_all");
    let own: Vec<PrfKey> = (0..n).map(|i| root.derive(&format!("k_{i}"))).collect();
    let parties = own
        .iter()
        .enumerate()
        .map(|(index, &k)| PartyKeys {
            index,
            own: k,
            parties: k_p,
            all: k_all,
        })
        .collect();
    Ok(KeySet {
        parties,
        helper: HelperKeys {
            per_party: own,
            all: k_all,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn setup_is_deterministic() {
        let seed = MasterSeed::from_u64(77);
        assert_eq!(setup(2, &seed).unwrap(), setup(2, &seed).unwrap());
    }

    #[test]
    fn setup_rejects_single_party() {
        assert_eq!(
            setup(1, &MasterSeed::from_u64(0)),
            Err(PrfError::TooFewParties(1))
        );
    }

    #[test]
    fn helper_keys_exclude_party_key() {
        let keys = setup(3, &MasterSeed::from_u64(1)).unwrap();
        let k_p = keys.parties[0].parties;
        assert!(keys.parties.iter().all(|p| p.parties == k_p));
        assert!(!keys.helper.per_party.contains(&k_p));
        assert_ne!(keys.helper.all, k_p);
        assert_eq!(keys.helper.per_party.len(), 3);
    }

    #[test]
    fn distinct_seeds_give_distinct_party_keys() {
        let mut seen = HashSet::new();
        for s in 0..10_000u64 {
            let keys = setup(2, &MasterSeed::from_u64(s)).unwrap();
            assert!(seen.insert(keys.parties[0].parties.0));
        }
    }

    #[test]
    fn streams_agree_across_holders() {
        let keys = setup(2, &MasterSeed::from_u64(5)).unwrap();
        let mut a = PrfStream::new(&keys.parties[0].parties, "blind", 128);
        let mut b = PrfStream::new(&keys.parties[1].parties, "blind", 128);
        for _ in 0..100 {
            assert_eq!(a.draw().unwrap(), b.draw().unwrap());
        }
        assert_eq!(a.counter(), 100);
    }

    #[test]
    fn purposes_are_independent() {
        let k = MasterSeed::from_u64(5).0;
        let mut a = PrfStream::new(&k, "x", 128);
        let mut b = PrfStream::new(&k, "y", 128);
        assert_ne!(a.draw().unwrap(), b.draw().unwrap());
    }

    #[test]
    fn small_domain_bound() {
        let mut s = PrfStream::new(&MasterSeed::from_u64(9).0, "d", 8);
        for _ in 0..10_000 {
            assert!(s.draw().unwrap().0 < 256);
        }
    }

    #[test]
    fn small_domain_mean() {
        let mut s = PrfStream::new(&MasterSeed::from_u64(10).0, "m", 8);
        let n = 100_000;
        let sum: f64 = (0..n).map(|_| s.draw().unwrap().0 as f64).sum();
        let mean = sum / n as f64;
        let sigma = (((256.0f64 * 256.0) - 1.0) / 12.0).sqrt() / (n as f64).sqrt();
        assert!((mean - 127.5).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn counter_overflow_is_reported() {
        let mut s = PrfStream::new(&MasterSeed::from_u64(1).0, "o", 64);
        s.set_counter(u64::MAX);
        assert_eq!(s.draw(), Err(PrfError::CounterOverflow));
    }

    #[test]
    fn hex_seed_parsing() {
        assert_eq!(
            MasterSeed::from_hex("0x00ff").unwrap(),
            MasterSeed::from_bytes(&[0, 255])
        );
        assert!(MasterSeed::from_hex("zz").is_err());
    }
}
