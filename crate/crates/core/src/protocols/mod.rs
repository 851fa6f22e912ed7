//! Lockstep simulation of the parties and the Helper, and the protocol suite.
//!
//! Each role keeps its own state; all communication goes through the
//! [`Fabric`](crate::net::Fabric) so it is accounted and can be tampered with.
//! Wires are created during preprocessing (mask only) and receive their public
//! masked value online. Local linear operations and truncation shifts are
//! stored as definitions and evaluated lazily per party.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::net::{Fabric, NetError, Phase, Role, TamperPolicy};
use crate::prf::{setup, MasterSeed, PrfError, PrfStream};
use crate::ring::{GlobalMacKey, MacShare, RingElement, RingError, RingParams};

pub mod check;
pub mod exp;
pub mod io;
pub mod mult;
pub mod poly;

pub use check::batch_check;
pub use exp::{mult_exp, prep_mult_exp, prep_two_exp, two_exp, MultExpPlan, TwoExpPlan};
pub use io::{input, open, prep_input, InputPlan, Opened};
pub use mult::{
    dot, mult, mult_trun, prep_dot, prep_mult, prep_mult_trun, prep_scale_trunc, prep_trunc,
    DotPlan, DotSpec,
};
pub use poly::{
    poly_chain, prep_poly_chain, prep_two_poly, two_poly, PolyChainPlan, TwoPolyPlan,
};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Prf(#[from] PrfError),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error("wire {0:?} has no masked value yet")]
    Unresolved(Wire),
    #[error("the Helper does not know the mask of wire {0:?}")]
    UnknownMask(Wire),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("protocol needs exactly two parties, got {0}")]
    TwoPartyOnly(usize),
    #[error("nothing to check")]
    EmptyCheck,
    #[error("aborted: {0}")]
    Abort(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, ProtocolError>;

/// Handle to a circuit wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Wire(pub(crate) usize);

impl Wire {
    pub fn index(&self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub(crate) enum WireDef {
    Fresh,
    Linear {
        terms: Vec<(RingElement, Wire)>,
        constant: RingElement,
    },
    Shift {
        input: Wire,
        bits: u32,
    },
}

/// The Helper's plaintext mask next to the parties' MAC fragments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WireMaskRecord {
    pub wire: Wire,
    pub helper: Option<RingElement>,
    pub shares: Vec<MacShare>,
}

pub struct PartyState {
    pub index: usize,
    pub delta_frag: RingElement,
    pub aborted: bool,
    pub outputs: Vec<(Wire, RingElement)>,
    pub(crate) masks: Vec<MacShare>,
    pub(crate) masked: Vec<Option<RingElement>>,
    pub(crate) known: HashMap<Wire, RingElement>,
    pub(crate) own: PrfStream,
    pub(crate) dealer: PrfStream,
    pub(crate) blind: PrfStream,
    pub(crate) pending: Vec<(RingElement, RingElement)>,
    pub(crate) rng: ChaCha20Rng,
    pub(crate) blind_draws: Vec<RingElement>,
}

impl PartyState {
    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Values this party drew from the party-only key.
    pub fn blind_draws(&self) -> &[RingElement] {
        &self.blind_draws
    }

    pub(crate) fn draw_blind(&mut self) -> Result<RingElement> {
        let b = self.blind.draw()?;
        self.blind_draws.push(b);
        Ok(b)
    }
}

pub struct HelperState {
    pub(crate) delta: RingElement,
    pub(crate) own: Vec<PrfStream>,
    pub(crate) dealer: Vec<PrfStream>,
    pub(crate) masks: Vec<Option<RingElement>>,
    pub(crate) rng: ChaCha20Rng,
    /// Values only the Helper knows, referenced by index from plans.
    pub(crate) secrets: Vec<RingElement>,
}

impl HelperState {
    pub fn delta(&self) -> RingElement {
        self.delta
    }
}

#[derive(Clone, Debug)]
pub struct SessionConfig {
    pub params: RingParams,
    pub n: usize,
    pub seed: MasterSeed,
    pub tamper: TamperPolicy,
}

impl SessionConfig {
    pub fn new(params: RingParams, n: usize, seed: u64) -> Self {
        Self {
            params,
            n,
            seed: MasterSeed::from_u64(seed),
            tamper: TamperPolicy::honest(),
        }
    }

    pub fn with_tamper(mut self, tamper: TamperPolicy) -> Self {
        self.tamper = tamper;
        self
    }
}

pub struct Session {
    pub params: RingParams,
    pub fabric: Fabric,
    pub parties: Vec<PartyState>,
    pub helper: HelperState,
    defs: Vec<WireDef>,
    scope: Option<String>,
}

impl Session {
    pub fn new(config: SessionConfig) -> Result<Self> {
        let SessionConfig {
            params,
            n,
            seed,
            tamper,
        } = config;
        let keys = setup(n, &seed)?;
        let share_bits = params.share_bits();
        let mut parties = Vec::with_capacity(n);
        let mut key_frags = Vec::with_capacity(n);
        for pk in &keys.parties {
            let mut key_stream = PrfStream::new(&pk.own, "mac-key", params.s);
            let delta_frag = key_stream.draw()?;
            key_frags.push(delta_frag);
            parties.push(PartyState {
                index: pk.index,
                delta_frag,
                aborted: false,
                outputs: Vec::new(),
                masks: Vec::new(),
                masked: Vec::new(),
                known: HashMap::new(),
                own: PrfStream::new(&pk.own, "share", share_bits),
                dealer: PrfStream::new(&pk.own, "dealer", share_bits),
                blind: PrfStream::new(&pk.parties, "blind", share_bits),
                pending: Vec::new(),
                rng: ChaCha20Rng::from_seed(seed.local_seed(&format!("party-{}", pk.index))),
                blind_draws: Vec::new(),
            });
        }
        // the Helper replays each party's key stream
        let mut mirrored = Vec::with_capacity(n);
        for k in &keys.helper.per_party {
            mirrored.push(PrfStream::new(k, "mac-key", params.s).draw()?);
        }
        debug_assert_eq!(mirrored, key_frags);
        let key = GlobalMacKey::from_frags(mirrored, &params);
        let helper = HelperState {
            delta: key.delta,
            own: keys
                .helper
                .per_party
                .iter()
                .map(|k| PrfStream::new(k, "share", share_bits))
                .collect(),
            dealer: keys
                .helper
                .per_party
                .iter()
                .map(|k| PrfStream::new(k, "dealer", share_bits))
                .collect(),
            masks: Vec::new(),
            rng: ChaCha20Rng::from_seed(seed.local_seed("helper")),
            secrets: Vec::new(),
        };
        let mut fabric = Fabric::new(n, tamper);
        fabric.set_phase(Phase::Setup);
        Ok(Self {
            params,
            fabric,
            parties,
            helper,
            defs: Vec::new(),
            scope: None,
        })
    }

    pub fn n(&self) -> usize {
        self.parties.len()
    }

    pub fn wire_count(&self) -> usize {
        self.defs.len()
    }

    pub(crate) fn begin(&mut self, phase: Phase) -> u64 {
        self.fabric.set_phase(phase);
        self.fabric.begin_wave()
    }

    /// Prefix every ledger label with `scope/` until cleared.
    pub fn set_scope(&mut self, scope: Option<&str>) {
        self.scope = scope.map(str::to_string);
    }

    pub(crate) fn send(
        &mut self,
        from: Role,
        to: Role,
        label: &str,
        payload: &[RingElement],
    ) -> Result<Vec<RingElement>> {
        let out = match &self.scope {
            Some(s) => self.fabric.send(from, to, &format!("{s}/{label}"), payload)?,
            None => self.fabric.send(from, to, label, payload)?,
        };
        Ok(out)
    }

    pub(crate) fn reduce(&self, x: RingElement) -> RingElement {
        self.params.reduce(x)
    }

    /// Allocate a wire whose mask fragments and Helper plaintext are given.
    pub(crate) fn alloc_wire(
        &mut self,
        def: WireDef,
        shares: Vec<MacShare>,
        helper: Option<RingElement>,
    ) -> Wire {
        let w = Wire(self.defs.len());
        self.defs.push(def);
        for (p, s) in self.parties.iter_mut().zip(shares) {
            p.masks.push(s);
            p.masked.push(None);
        }
        self.helper.masks.push(helper);
        w
    }

    pub(crate) fn set_def(&mut self, w: Wire, def: WireDef) {
        self.defs[w.0] = def;
    }

    pub(crate) fn set_masked(&mut self, party: usize, w: Wire, m: RingElement) {
        let m = self.reduce(m);
        self.parties[party].masked[w.0] = Some(m);
    }

    pub(crate) fn mask_share(&self, party: usize, w: Wire) -> MacShare {
        self.parties[party].masks[w.0]
    }

    pub fn helper_mask(&self, w: Wire) -> Option<RingElement> {
        self.helper.masks[w.0]
    }

    pub(crate) fn require_helper_mask(&self, w: Wire) -> Result<RingElement> {
        self.helper_mask(w).ok_or(ProtocolError::UnknownMask(w))
    }

    pub fn mask_record(&self, w: Wire) -> WireMaskRecord {
        WireMaskRecord {
            wire: w,
            helper: self.helper_mask(w),
            shares: self.parties.iter().map(|p| p.masks[w.0]).collect(),
        }
    }

    /// A public constant: masked value `c`, zero mask.
    pub fn constant(&mut self, c: RingElement) -> Wire {
        let c = self.reduce(c);
        let n = self.n();
        self.alloc_wire(
            WireDef::Linear {
                terms: Vec::new(),
                constant: c,
            },
            vec![MacShare::ZERO; n],
            Some(RingElement::ZERO),
        )
    }

    /// `Σ c_i·w_i + constant`, computed locally.
    pub fn lincomb(&mut self, terms: &[(RingElement, Wire)], constant: RingElement) -> Wire {
        let params = self.params;
        let shares: Vec<MacShare> = (0..self.n())
            .map(|p| {
                terms
                    .iter()
                    .fold(MacShare::ZERO, |acc, &(c, w)| {
                        acc + self.mask_share(p, w).scale(c)
                    })
                    .reduce(&params)
            })
            .collect();
        let helper = terms.iter().try_fold(RingElement::ZERO, |acc, &(c, w)| {
            self.helper_mask(w).map(|d| acc + c * d)
        });
        self.alloc_wire(
            WireDef::Linear {
                terms: terms.to_vec(),
                constant: params.reduce(constant),
            },
            shares,
            helper.map(|h| params.reduce(h)),
        )
    }

    /// Like [`Self::lincomb`] with coefficients known to the parties only:
    /// the Helper loses track of the resulting mask.
    pub(crate) fn lincomb_hidden(&mut self, terms: &[(RingElement, Wire)]) -> Wire {
        let w = self.lincomb(terms, RingElement::ZERO);
        self.helper.masks[w.0] = None;
        w
    }

    /// A fresh wire whose mask is `Σ c_i·mask(w_i)`; its masked value is
    /// filled in later by a protocol.
    pub(crate) fn alloc_combined(&mut self, terms: &[(RingElement, Wire)]) -> Result<Wire> {
        let w = self.lincomb(terms, RingElement::ZERO);
        if self.helper.masks[w.0].is_none() {
            return Err(ProtocolError::UnknownMask(w));
        }
        self.defs[w.0] = WireDef::Fresh;
        Ok(w)
    }

    pub fn add(&mut self, a: Wire, b: Wire) -> Wire {
        self.lincomb(&[(RingElement::ONE, a), (RingElement::ONE, b)], RingElement::ZERO)
    }

    pub fn sub(&mut self, a: Wire, b: Wire) -> Wire {
        self.lincomb(&[(RingElement::ONE, a), (-RingElement::ONE, b)], RingElement::ZERO)
    }

    pub fn scale(&mut self, a: Wire, c: RingElement) -> Wire {
        self.lincomb(&[(c, a)], RingElement::ZERO)
    }

    pub fn add_const(&mut self, a: Wire, c: RingElement) -> Wire {
        self.lincomb(&[(RingElement::ONE, a)], c)
    }

    /// Signed constant helper.
    pub fn signed(&self, v: i128) -> RingElement {
        self.params.from_signed(v)
    }

    /// Masked value of `w` as seen by `party`.
    pub fn masked_value(&mut self, party: usize, w: Wire) -> Result<RingElement> {
        if let Some(m) = self.parties[party].masked[w.0] {
            return Ok(m);
        }
        let m = match self.defs[w.0].clone() {
            WireDef::Fresh => return Err(ProtocolError::Unresolved(w)),
            WireDef::Linear { terms, constant } => {
                let mut acc = constant;
                for (c, t) in terms {
                    acc += c * self.masked_value(party, t)?;
                }
                acc
            }
            WireDef::Shift { input, bits } => {
                let m = self.masked_value(party, input)?;
                self.params.shr(m, bits)
            }
        };
        self.set_masked(party, w, m);
        Ok(self.reduce(m))
    }

    pub(crate) fn masked_all(&mut self, party: usize, ws: &[Wire]) -> Result<Vec<RingElement>> {
        ws.iter().map(|&w| self.masked_value(party, w)).collect()
    }

    pub(crate) fn push_pending(&mut self, party: usize, m: RingElement, tag: RingElement) {
        let (m, tag) = (self.reduce(m), self.reduce(tag));
        self.parties[party].pending.push((m, tag));
    }

    /// Record that the authenticated value `[i==0]·m - ⟨δ_w⟩` must be zero.
    pub(crate) fn push_zero_check(&mut self, w: Wire) -> Result<()> {
        for p in 0..self.n() {
            let m = self.masked_value(p, w)?;
            let tag = self.parties[p].delta_frag * m - self.mask_share(p, w).tag;
            self.push_pending(p, RingElement::ZERO, tag);
        }
        Ok(())
    }

    pub fn pending_len(&self) -> usize {
        self.parties.iter().map(|p| p.pending.len()).max().unwrap_or(0)
    }

    pub fn aborted(&self) -> bool {
        self.parties.iter().any(|p| p.aborted)
    }

    pub(crate) fn abort_all(&mut self) {
        for p in &mut self.parties {
            p.aborted = true;
        }
    }

    pub(crate) fn ensure_live(&self) -> Result<()> {
        if self.aborted() {
            Err(ProtocolError::Abort("session already aborted".into()))
        } else {
            Ok(())
        }
    }

    /// Simulation-only view of the value on `w`, bypassing all checks.
    /// Uses the first party's masked value and the sum of mask fragments.
    pub fn reveal_unchecked(&mut self, w: Wire) -> Result<RingElement> {
        let m = self.masked_value(0, w)?;
        let mask: RingElement = self.parties.iter().map(|p| p.masks[w.0].value).sum();
        Ok(self.params.to_value_domain(m - mask))
    }

    /// Check that every party's tag fragments of `w` sum to `Δ` times the mask.
    pub fn mac_consistent(&self, w: Wire) -> bool {
        let (v, t) = crate::ring::open_mac(&self.mask_record(w).shares, &self.params);
        self.reduce(self.helper.delta * v) == t
            && self.helper_mask(w).is_none_or(|h| h == v)
    }
}
