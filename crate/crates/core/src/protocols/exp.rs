//! Powers of a shared value: the Helper-randomized factorization, the
//! two-party binomial expansion, and a sequential multiplication chain.

use num_integer::binomial;
use rand::RngCore;

use crate::net::{Phase, Role};
use crate::preprocessing::share_rand_hp;
use crate::ring::RingElement;

use super::io::{prep_input_hp_in_wave, reveal_masks_in_wave, send_inputs_in_wave, InputPlan};
use super::mult::{dot, prep_dot_in_wave, DotPlan, DotSpec};
use super::{ProtocolError, Result, Session, Wire};

pub const MULT_EXP: &str = "mult_exp";
pub const TWO_EXP: &str = "two_exp";

pub(crate) fn binom(n: usize, k: usize) -> RingElement {
    RingElement(binomial(n as u128, k as u128))
}

/// Preprocessed state for one `mult_exp` instance. `r_powers[i]` carries
/// `r^(i+1)` for a Helper-chosen `r`.
#[derive(Clone, Debug)]
pub struct MultExpPlan {
    pub x: Wire,
    pub k: usize,
    pub r_powers: Vec<Wire>,
    secret: usize,
}

/// Preprocessing for `[[x]], …, [[x^k]]`: `k(n+1)` elements in one wave.
pub fn prep_mult_exp(sess: &mut Session, xs: &[Wire], k: usize) -> Result<Vec<MultExpPlan>> {
    if k == 0 {
        return Err(ProtocolError::Invalid("mult_exp needs k >= 1".into()));
    }
    sess.begin(Phase::Preprocess);
    let n = sess.n();
    let mut plans = Vec::with_capacity(xs.len());
    for &x in xs {
        sess.require_helper_mask(x)?;
        let r = sess.params.reduce(RingElement(
            ((sess.helper.rng.next_u64() as u128) << 64) | sess.helper.rng.next_u64() as u128,
        ));
        let secret = sess.helper.secrets.len();
        sess.helper.secrets.push(r);
        let mut r_powers = Vec::with_capacity(k);
        let mut masked = Vec::with_capacity(k);
        for i in 1..=k {
            let w = share_rand_hp(sess, MULT_EXP)?;
            masked.push(sess.params.reduce(r.pow(i as u32) + sess.require_helper_mask(w)?));
            r_powers.push(w);
        }
        for p in 0..n {
            let got = sess.send(Role::Helper, Role::Party(p), MULT_EXP, &masked)?;
            for (&w, m) in r_powers.iter().zip(got) {
                sess.set_masked(p, w, m);
            }
        }
        plans.push(MultExpPlan {
            x,
            k,
            r_powers,
            secret,
        });
    }
    Ok(plans)
}

/// Online phase: two waves, `2n` elements per instance. Returns
/// `[[x]], …, [[x^k]]` per instance. The Helper does not learn the masks of
/// the results, so they can only be opened or combined linearly.
pub fn mult_exp(sess: &mut Session, plans: &[MultExpPlan]) -> Result<Vec<Vec<Wire>>> {
    sess.ensure_live()?;
    let n = sess.n();
    let mut blinds = vec![Vec::with_capacity(plans.len()); n];
    let mut queries = vec![Vec::with_capacity(plans.len()); n];
    for p in 0..n {
        for plan in plans {
            let b = sess.parties[p].draw_blind()?;
            let m = sess.masked_value(p, plan.x)?;
            blinds[p].push(b);
            queries[p].push(sess.params.reduce(m + b));
        }
    }

    sess.begin(Phase::Online);
    let mut seen = Vec::with_capacity(n);
    for (p, q) in queries.iter().enumerate() {
        seen.push(sess.send(Role::Party(p), Role::Helper, MULT_EXP, q)?);
    }
    if seen.iter().any(|q| q != &seen[0]) {
        sess.abort_all();
        return Err(ProtocolError::Abort("inconsistent masked values at the Helper".into()));
    }
    let mut replies = Vec::with_capacity(plans.len());
    for (k, plan) in plans.iter().enumerate() {
        let r = sess.helper.secrets[plan.secret];
        let dx = sess.require_helper_mask(plan.x)?;
        replies.push(sess.params.reduce(seen[0][k] - r - dx));
    }

    sess.begin(Phase::Online);
    let mut offsets: Vec<Vec<RingElement>> = Vec::with_capacity(n);
    for p in 0..n {
        let got = sess.send(Role::Helper, Role::Party(p), MULT_EXP, &replies)?;
        offsets.push(
            got.iter()
                .zip(&blinds[p])
                .map(|(&g, &b)| sess.params.reduce(g - b))
                .collect(),
        );
    }
    if offsets.iter().any(|o| o != &offsets[0]) {
        sess.abort_all();
        return Err(ProtocolError::Abort("parties disagree on the public offset".into()));
    }

    let mut out = Vec::with_capacity(plans.len());
    for (idx, plan) in plans.iter().enumerate() {
        let c = offsets[0][idx];
        let k = plan.k;
        // row[j] holds x^i · r^j for the current i
        let one = sess.constant(RingElement::ONE);
        let mut row: Vec<Wire> = std::iter::once(one).chain(plan.r_powers.iter().copied()).collect();
        let mut powers = Vec::with_capacity(k);
        for i in 1..=k {
            let next: Vec<Wire> = (0..=k - i)
                .map(|j| sess.lincomb_hidden(&[(c, row[j]), (RingElement::ONE, row[j + 1])]))
                .collect();
            powers.push(next[0]);
            row = next;
        }
        out.push(powers);
    }
    Ok(out)
}

/// Preprocessed state for one two-party binomial exponentiation.
#[derive(Clone, Debug)]
pub struct TwoExpPlan {
    pub x: Wire,
    pub k: usize,
    pub(crate) first: InputPlan,
    pub(crate) second: InputPlan,
    pub(crate) dots: Vec<DotPlan>,
}

fn require_two(sess: &Session) -> Result<()> {
    match sess.n() {
        2 => Ok(()),
        n => Err(ProtocolError::TwoPartyOnly(n)),
    }
}

/// Masks for `x_1^j`, `x_2^j` (`j = 0..=k`) and the `k+1` cross-term masks:
/// `4k + 4` elements in one wave.
pub fn prep_two_exp(sess: &mut Session, xs: &[Wire], k: usize) -> Result<Vec<TwoExpPlan>> {
    require_two(sess)?;
    sess.begin(Phase::Preprocess);
    let mut plans = Vec::with_capacity(xs.len());
    for &x in xs {
        sess.require_helper_mask(x)?;
        let first = prep_input_hp_in_wave(sess, 0, k + 1, TWO_EXP)?;
        let second = prep_input_hp_in_wave(sess, 1, k + 1, TWO_EXP)?;
        let specs: Vec<DotSpec> = (0..=k)
            .map(|j| DotSpec {
                terms: (0..=j)
                    .map(|i| (binom(j, i), first.wires[i], second.wires[j - i]))
                    .collect(),
            })
            .collect();
        let dots = prep_dot_in_wave(sess, &specs)?;
        plans.push(TwoExpPlan {
            x,
            k,
            first,
            second,
            dots,
        });
    }
    Ok(plans)
}

/// The additive split `x = x_1 + x_2` with `x_1` at P1 and `x_2` at P2.
fn local_split(sess: &mut Session, x: Wire) -> Result<(RingElement, RingElement)> {
    let m = sess.masked_value(0, x)?;
    let x1 = sess.params.reduce(m - sess.mask_share(0, x).value);
    let x2 = sess.params.reduce(-sess.mask_share(1, x).value);
    Ok((x1, x2))
}

fn ring_powers(sess: &Session, base: RingElement, k: usize) -> Vec<RingElement> {
    (0..=k).map(|j| sess.params.reduce(base.pow(j as u32))).collect()
}

/// Online phase: four waves. Returns `[[x^0]], …, [[x^k]]` per instance.
pub fn two_exp(sess: &mut Session, plans: &[TwoExpPlan]) -> Result<Vec<Vec<Wire>>> {
    require_two(sess)?;
    sess.ensure_live()?;
    let mut powers = Vec::with_capacity(plans.len());
    for plan in plans {
        let (x1, x2) = local_split(sess, plan.x)?;
        powers.push((ring_powers(sess, x1, plan.k), ring_powers(sess, x2, plan.k)));
    }

    sess.begin(Phase::Online);
    let owners: Vec<&InputPlan> = plans.iter().flat_map(|p| [&p.first, &p.second]).collect();
    let masks = reveal_masks_in_wave(sess, &owners, TWO_EXP)?;

    sess.begin(Phase::Online);
    let jobs: Vec<(&InputPlan, &[RingElement], &[RingElement])> = plans
        .iter()
        .zip(&powers)
        .enumerate()
        .flat_map(|(i, (plan, (p1, p2)))| {
            [
                (&plan.first, p1.as_slice(), masks[2 * i].as_slice()),
                (&plan.second, p2.as_slice(), masks[2 * i + 1].as_slice()),
            ]
        })
        .collect();
    send_inputs_in_wave(sess, &jobs, TWO_EXP)?;

    for plan in plans {
        if plan.k >= 1 {
            let w = sess.lincomb(
                &[
                    (RingElement::ONE, plan.x),
                    (-RingElement::ONE, plan.first.wires[1]),
                    (-RingElement::ONE, plan.second.wires[1]),
                ],
                RingElement::ZERO,
            );
            sess.push_zero_check(w)?;
        }
    }
    let all: Vec<DotPlan> = plans.iter().flat_map(|p| p.dots.iter().cloned()).collect();
    let outs = dot(sess, &all)?;
    let mut it = outs.into_iter();
    Ok(plans
        .iter()
        .map(|p| it.by_ref().take(p.k + 1).collect())
        .collect())
}

/// `k - 1` sequential multiplications computing `x^2, …, x^k`.
#[derive(Clone, Debug)]
pub struct PowerChainPlan {
    pub x: Wire,
    pub steps: Vec<DotPlan>,
}

/// All multiplication masks are known up front, so one wave suffices:
/// `2(k - 1)` elements per instance.
pub fn prep_power_chain(sess: &mut Session, xs: &[Wire], k: usize) -> Result<Vec<PowerChainPlan>> {
    sess.begin(Phase::Preprocess);
    let mut plans = Vec::with_capacity(xs.len());
    for &x in xs {
        let mut prev = x;
        let mut steps = Vec::new();
        for _ in 2..=k {
            let plan = prep_dot_in_wave(sess, &[DotSpec::single(prev, x)])?.remove(0);
            prev = plan.out;
            steps.push(plan);
        }
        plans.push(PowerChainPlan { x, steps });
    }
    Ok(plans)
}

/// `2(k - 1)` online waves. Returns `[[x]], …, [[x^k]]` per instance.
pub fn power_chain(sess: &mut Session, plans: &[PowerChainPlan]) -> Result<Vec<Vec<Wire>>> {
    let depth = plans.iter().map(|p| p.steps.len()).max().unwrap_or(0);
    for level in 0..depth {
        let batch: Vec<DotPlan> = plans.iter().filter_map(|p| p.steps.get(level).cloned()).collect();
        dot(sess, &batch)?;
    }
    Ok(plans
        .iter()
        .map(|p| std::iter::once(p.x).chain(p.steps.iter().map(|s| s.out)).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::io::{input, open, prep_input};
    use crate::protocols::SessionConfig;
    use crate::ring::RingParams;

    fn session(n: usize, seed: u64) -> Session {
        Session::new(SessionConfig::new(RingParams::default(), n, seed)).unwrap()
    }

    fn one_input(s: &mut Session, v: RingElement) -> Wire {
        let plan = prep_input(s, 0, 1).unwrap();
        input(s, &[(&plan, &[v])]).unwrap()[0][0]
    }

    fn open_signed(s: &mut Session, ws: &[Wire]) -> Vec<i128> {
        let params = s.params;
        open(s, ws, &[0, 1]).unwrap().signed(&params)
    }

    #[test]
    fn mult_exp_two_cubed() {
        let mut s = session(3, 1);
        let x = one_input(&mut s, RingElement(2));
        let plans = prep_mult_exp(&mut s, &[x], 3).unwrap();
        let out = mult_exp(&mut s, &plans).unwrap();
        assert_eq!(open_signed(&mut s, &out[0]), vec![2, 4, 8]);
    }

    #[test]
    fn mult_exp_zero() {
        let mut s = session(2, 2);
        let x = one_input(&mut s, RingElement::ZERO);
        let plans = prep_mult_exp(&mut s, &[x], 4).unwrap();
        let out = mult_exp(&mut s, &plans).unwrap();
        assert_eq!(open_signed(&mut s, &out[0]), vec![0, 0, 0, 0]);
    }

    #[test]
    fn mult_exp_costs() {
        for n in [2usize, 3, 5] {
            for k in 1..=12 {
                let mut s = session(n, k as u64);
                let v = s.signed(-3);
                let x = one_input(&mut s, v);
                let mark = s.fabric.messages().len();
                let plans = prep_mult_exp(&mut s, &[x], k).unwrap();
                let pre = s.fabric.cost_since(mark, Phase::Preprocess);
                assert_eq!(pre.elements, (k * (n + 1)) as u64);
                let mark = s.fabric.messages().len();
                mult_exp(&mut s, &plans).unwrap();
                let on = s.fabric.cost_since(mark, Phase::Online);
                assert_eq!((on.rounds, on.elements), (2, 2 * n as u64));
            }
        }
    }

    #[test]
    fn mult_exp_never_shows_blinds_to_helper() {
        let mut s = session(3, 3);
        let x = one_input(&mut s, RingElement(77));
        let plans = prep_mult_exp(&mut s, &[x, x], 5).unwrap();
        mult_exp(&mut s, &plans).unwrap();
        let blinds: Vec<RingElement> = s.parties[0].blind_draws().to_vec();
        assert!(!blinds.is_empty());
        assert_eq!(s.parties[1].blind_draws(), blinds.as_slice());
        for m in s.fabric.messages().iter().filter(|m| m.to == Role::Helper) {
            for v in &m.delivered {
                assert!(!blinds.contains(v));
            }
        }
    }

    #[test]
    fn two_exp_three_squared() {
        let mut s = session(2, 4);
        let x = one_input(&mut s, RingElement(3));
        let plans = prep_two_exp(&mut s, &[x], 2).unwrap();
        let out = two_exp(&mut s, &plans).unwrap();
        assert_eq!(open_signed(&mut s, &out[0]), vec![1, 3, 9]);
    }

    #[test]
    fn two_exp_degree_zero() {
        let mut s = session(2, 5);
        let x = one_input(&mut s, RingElement(3));
        let plans = prep_two_exp(&mut s, &[x], 0).unwrap();
        let out = two_exp(&mut s, &plans).unwrap();
        assert_eq!(open_signed(&mut s, &out[0]), vec![1]);
    }

    #[test]
    fn two_exp_rejects_three_parties() {
        let mut s = session(3, 6);
        let x = one_input(&mut s, RingElement(3));
        assert!(matches!(
            prep_two_exp(&mut s, &[x], 2),
            Err(ProtocolError::TwoPartyOnly(3))
        ));
    }

    #[test]
    fn two_exp_is_four_rounds() {
        for k in 1..=12 {
            let mut s = session(2, k as u64);
            let x = one_input(&mut s, RingElement(5));
            let plans = prep_two_exp(&mut s, &[x], k).unwrap();
            let mark = s.fabric.messages().len();
            two_exp(&mut s, &plans).unwrap();
            assert_eq!(s.fabric.cost_since(mark, Phase::Online).rounds, 4);
        }
    }

    #[test]
    fn two_exp_agrees_with_mult_chain() {
        for t in 0..100u64 {
            let k = 1 + (t % 6) as usize;
            let mut s = session(2, 100 + t);
            let v = s.signed(t as i128 * 7919 - 300_000);
            let x = one_input(&mut s, v);
            let a = prep_two_exp(&mut s, &[x], k).unwrap();
            let b = prep_power_chain(&mut s, &[x], k).unwrap();
            let ea = two_exp(&mut s, &a).unwrap().remove(0);
            let eb = power_chain(&mut s, &b).unwrap().remove(0);
            let got = open_signed(&mut s, &[&ea[1..], &eb[..]].concat());
            assert_eq!(got[..k], got[k..]);
        }
    }

    #[test]
    fn power_chain_costs() {
        for n in [2usize, 3] {
            let k = 5;
            let mut s = session(n, 8);
            let x = one_input(&mut s, RingElement(2));
            let mark = s.fabric.messages().len();
            let plans = prep_power_chain(&mut s, &[x], k).unwrap();
            assert_eq!(s.fabric.cost_since(mark, Phase::Preprocess).elements, 2 * (k as u64 - 1));
            let mark = s.fabric.messages().len();
            let out = power_chain(&mut s, &plans).unwrap();
            let on = s.fabric.cost_since(mark, Phase::Online);
            assert_eq!((on.rounds, on.elements), (2 * (k as u64 - 1), 2 * n as u64 * (k as u64 - 1)));
            assert_eq!(open_signed(&mut s, &out[0]), vec![2, 4, 8, 16, 32]);
        }
    }
}
