//! MAC-share generation driven by the Helper.
//!
//! Fragments for every party except the last are expanded from the PRF stream
//! that party shares with the Helper, so they cost nothing to distribute. The
//! Helper mirrors those draws and sends only the correcting fragments to the
//! last party. None of these functions opens a wave; callers do.

use crate::net::{Phase, Role};
use crate::protocols::{ProtocolError, Result, Session, Wire, WireDef};
use crate::ring::{MacShare, RingElement};

/// Draw from party `i`'s shared stream and the Helper's mirror of it.
fn draw_shared(sess: &mut Session, i: usize) -> Result<RingElement> {
    let mine = sess.parties[i].own.draw()?;
    let mirror = sess.helper.own[i].draw()?;
    if mine != mirror {
        return Err(ProtocolError::Invalid(format!(
            "PRF disagreement between P{} and the Helper",
            i + 1
        )));
    }
    Ok(mine)
}

/// MAC-share a value `v` chosen by the Helper. Two elements.
pub fn share_value_hp(sess: &mut Session, v: RingElement, label: &str) -> Result<Wire> {
    sess.fabric.set_phase(Phase::Preprocess);
    let n = sess.n();
    let v = sess.params.reduce(v);
    let tag = sess.params.reduce(sess.helper.delta * v);
    let mut shares = Vec::with_capacity(n);
    let (mut vsum, mut tsum) = (RingElement::ZERO, RingElement::ZERO);
    for i in 0..n - 1 {
        let value = draw_shared(sess, i)?;
        let tag_frag = draw_shared(sess, i)?;
        vsum += value;
        tsum += tag_frag;
        shares.push(MacShare {
            value,
            tag: tag_frag,
        });
    }
    let correction = [sess.params.reduce(v - vsum), sess.params.reduce(tag - tsum)];
    let got = sess.send(Role::Helper, Role::Party(n - 1), label, &correction)?;
    shares.push(MacShare {
        value: got[0],
        tag: got[1],
    });
    Ok(sess.alloc_wire(WireDef::Fresh, shares, Some(v)))
}

/// MAC-share a random value known only to the Helper. One element.
pub fn share_rand_hp(sess: &mut Session, label: &str) -> Result<Wire> {
    sess.fabric.set_phase(Phase::Preprocess);
    let n = sess.n();
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        values.push(draw_shared(sess, i)?);
    }
    let delta_value = sess.params.reduce(values.iter().copied().sum());
    let tag = sess.params.reduce(sess.helper.delta * delta_value);
    let mut tags = Vec::with_capacity(n);
    for i in 0..n - 1 {
        tags.push(draw_shared(sess, i)?);
    }
    let tsum: RingElement = tags.iter().copied().sum();
    let got = sess.send(
        Role::Helper,
        Role::Party(n - 1),
        label,
        &[sess.params.reduce(tag - tsum)],
    )?;
    tags.push(got[0]);
    let shares = values
        .into_iter()
        .zip(tags)
        .map(|(value, tag)| MacShare { value, tag })
        .collect();
    Ok(sess.alloc_wire(WireDef::Fresh, shares, Some(delta_value)))
}

/// MAC-share a random value known to `dealer` and the Helper. Two elements.
pub fn share_rand_dealer(sess: &mut Session, dealer: usize, label: &str) -> Result<Wire> {
    if dealer >= sess.n() {
        return Err(ProtocolError::Invalid(format!("no party P{}", dealer + 1)));
    }
    let mine = sess.parties[dealer].dealer.draw()?;
    let mirror = sess.helper.dealer[dealer].draw()?;
    if mine != mirror {
        return Err(ProtocolError::Invalid("dealer stream disagreement".into()));
    }
    let w = share_value_hp(sess, mine, label)?;
    sess.parties[dealer].known.insert(w, mine);
    Ok(w)
}

/// The dealer's plaintext view of a mask it dealt.
pub fn dealer_mask(sess: &Session, dealer: usize, w: Wire) -> Option<RingElement> {
    sess.parties[dealer].known.get(&w).copied()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::SessionConfig;
    use crate::ring::{open_mac, RingParams};
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn session(params: RingParams, n: usize, seed: u64) -> Session {
        Session::new(SessionConfig::new(params, n, seed)).unwrap()
    }

    fn cost(sess: &Session) -> (u64, u64) {
        let c = sess.fabric.ledger().phase(Phase::Preprocess);
        (c.rounds, c.elements)
    }

    #[test]
    fn dealer_and_helper_agree() {
        let mut s = session(RingParams::default(), 2, 3);
        s.fabric.begin_wave();
        let w = share_rand_dealer(&mut s, 0, "t").unwrap();
        assert_eq!(dealer_mask(&s, 0, w), s.helper_mask(w));
        assert_eq!(dealer_mask(&s, 1, w), None);
        let (v, _) = open_mac(&s.mask_record(w).shares, &s.params);
        assert_eq!(Some(v), s.helper_mask(w));
        assert!(s.mac_consistent(w));
        assert_eq!(cost(&s), (1, 2));
    }

    #[test]
    fn rand_hp_costs_one_element() {
        let mut s = session(RingParams::default(), 3, 3);
        s.fabric.begin_wave();
        let w = share_rand_hp(&mut s, "t").unwrap();
        assert!(s.mac_consistent(w));
        assert_eq!(cost(&s), (1, 1));
    }

    #[test]
    fn value_hp_zero_and_cost() {
        let mut s = session(RingParams::default(), 2, 3);
        s.fabric.begin_wave();
        let w = share_value_hp(&mut s, RingElement::ZERO, "t").unwrap();
        let (v, t) = open_mac(&s.mask_record(w).shares, &s.params);
        assert_eq!((v, t), (RingElement::ZERO, RingElement::ZERO));
        assert_eq!(cost(&s), (1, 2));
    }

    #[test]
    fn value_hp_product_of_masks() {
        let mut s = session(RingParams::default(), 3, 8);
        s.fabric.begin_wave();
        let a = share_rand_hp(&mut s, "t").unwrap();
        let b = share_rand_hp(&mut s, "t").unwrap();
        let prod = s.helper_mask(a).unwrap() * s.helper_mask(b).unwrap();
        let w = share_value_hp(&mut s, prod, "t").unwrap();
        let (v, _) = open_mac(&s.mask_record(w).shares, &s.params);
        assert_eq!(v, s.params.reduce(prod));
    }

    #[test]
    fn tags_are_correct_for_random_values() {
        for params in [RingParams::tiny(8, 8).unwrap(), RingParams::default()] {
            let mut s = session(params, 2, 11);
            let mut rng = ChaCha20Rng::seed_from_u64(2);
            s.fabric.begin_wave();
            for _ in 0..1000 {
                let v = RingElement(((rng.next_u64() as u128) << 64) | rng.next_u64() as u128);
                let w = share_value_hp(&mut s, v, "t").unwrap();
                let (value, tag) = open_mac(&s.mask_record(w).shares, &params);
                assert_eq!(value, params.reduce(v));
                assert_eq!(tag, params.reduce(s.helper.delta() * value));
            }
        }
    }

    #[test]
    fn first_fragment_is_independent_of_mask() {
        // l = s = 8, two parties: P1's fragment of a Helper-random mask should
        // look uniform even after conditioning on the mask's low byte.
        let params = RingParams::tiny(8, 8).unwrap();
        let mut s = session(params, 2, 21);
        s.fabric.begin_wave();
        let mut counts = [[0u32; 4]; 4];
        let trials = 40_000;
        for _ in 0..trials {
            let w = share_rand_hp(&mut s, "t").unwrap();
            let d = s.helper_mask(w).unwrap().0;
            let f = s.mask_record(w).shares[0].value.0;
            counts[(d >> 14) as usize][(f >> 14) as usize] += 1;
        }
        // chi-square test of independence on a 4x4 table, 9 dof, p = 0.001 cutoff 27.88
        let total = trials as f64;
        let rows: Vec<f64> = counts.iter().map(|r| r.iter().sum::<u32>() as f64).collect();
        let cols: Vec<f64> = (0..4).map(|j| counts.iter().map(|r| r[j]).sum::<u32>() as f64).collect();
        let mut chi = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let e = rows[i] * cols[j] / total;
                chi += (counts[i][j] as f64 - e).powi(2) / e;
            }
        }
        assert!(chi < 27.88, "chi-square {chi}");
    }
}
