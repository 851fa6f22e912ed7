//! Batched MAC verification of every masked value produced since the last
//! check.

use crate::net::{Phase, Role};
use crate::prf::{MasterSeed, PrfStream};
use crate::ring::RingElement;

use super::{ProtocolError, Result, Session};

pub const LABEL: &str = "batch_check";

/// Verify all pending (masked value, tag fragment) pairs. Returns `Ok(false)`
/// and aborts every party if the check fails.
pub fn batch_check(sess: &mut Session) -> Result<bool> {
    sess.ensure_live()?;
    let n = sess.n();
    let count = sess.parties[0].pending.len();
    if sess.parties.iter().any(|p| p.pending.len() != count) {
        sess.abort_all();
        return Ok(false);
    }
    if count == 0 {
        return Err(ProtocolError::EmptyCheck);
    }
    let params = sess.params;

    sess.begin(Phase::Online);
    let key = {
        let mut bytes = [0u8; 32];
        rand::RngCore::fill_bytes(&mut sess.helper.rng, &mut bytes);
        RingElement(u128::from_le_bytes(bytes[..16].try_into().unwrap()))
    };
    let mut keys = Vec::with_capacity(n);
    for j in 0..n {
        keys.push(sess.send(Role::Helper, Role::Party(j), LABEL, &[key])?[0]);
    }

    let mut replies = Vec::with_capacity(n);
    for (j, party) in sess.parties.iter().enumerate() {
        let seed = MasterSeed::from_bytes(&keys[j].to_le_bytes());
        let mut coeffs = PrfStream::new(&seed.0, "batch-check", params.s);
        let (mut y, mut x) = (RingElement::ZERO, RingElement::ZERO);
        for &(m, t) in &party.pending {
            let r = coeffs.draw()?;
            y += r * m;
            x += r * t;
        }
        replies.push(params.reduce(x - party.delta_frag * y));
    }

    sess.begin(Phase::Online);
    let mut total = RingElement::ZERO;
    for (j, x) in replies.into_iter().enumerate() {
        total += sess.send(Role::Party(j), Role::Helper, LABEL, &[x])?[0];
    }
    let pass = params.reduce(total) == RingElement::ZERO;

    sess.begin(Phase::Online);
    let verdict = RingElement(pass as u128);
    for j in 0..n {
        let seen = sess.send(Role::Helper, Role::Party(j), LABEL, &[verdict])?[0];
        if seen != RingElement::ONE {
            sess.parties[j].aborted = true;
        }
    }
    if sess.aborted() {
        sess.abort_all();
        return Ok(false);
    }
    for p in &mut sess.parties {
        p.pending.clear();
    }
    Ok(true)
}
