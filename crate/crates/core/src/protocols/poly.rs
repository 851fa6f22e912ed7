//! Fixed-point polynomial evaluation.
//!
//! [`two_poly`] splits `x` into two bounded addends held by P1 and P2, has
//! each party compute its powers in plaintext, and combines all cross terms
//! with a single dot product and one truncation: four online waves for any
//! degree. [`poly_chain`] is the n-party alternative built from sequential
//! truncated multiplications.
//!
//! Powers in [`two_poly`] are input at scale `2^(d+g)` where `g` extra guard
//! bits keep the rounding of high powers well below one output ulp.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive};
use rand::Rng;

use crate::net::{Phase, Role};
use crate::ring::{RingElement, RingParams};

use super::exp::binom;
use super::io::{prep_input_hp_in_wave, reveal_masks_in_wave, send_inputs_in_wave, InputPlan};
use super::mult::{
    dot, mult_trun, prep_dot_in_wave, prep_mult_trun_in_wave, prep_trunc_in_wave, DotPlan,
    DotSpec, TruncDotPlan,
};
use super::{ProtocolError, Result, Session, Wire};

pub const TWO_POLY: &str = "two_poly";

/// Extra fractional bits carried by the transmitted powers.
pub fn guard_bits(params: &RingParams) -> u32 {
    (params.s / 2).saturating_sub(params.d).min(16)
}

/// `round(base^i · 2^(d+g) / 2^(d·i))` for a raw fixed-point `base`, exact.
pub fn scaled_power(base: i128, i: usize, params: &RingParams, guard: u32) -> BigInt {
    let num = BigInt::from(base).pow(i as u32) << (params.d + guard) as usize;
    let shift = params.d as usize * i;
    if shift == 0 {
        return num;
    }
    let half = BigInt::one() << (shift - 1);
    let mag = (num.abs() + half) >> shift;
    if num.is_negative() {
        -mag
    } else {
        mag
    }
}

pub(crate) fn big_to_ring(v: &BigInt, params: &RingParams) -> RingElement {
    let modulus = BigInt::one() << 128usize;
    let r = v.mod_floor(&modulus).to_u128().unwrap_or(0);
    params.reduce(RingElement(r))
}

fn check_coeffs(coeffs: &[i128]) -> Result<usize> {
    if coeffs.len() < 2 {
        return Err(ProtocolError::Invalid("polynomial degree must be at least 1".into()));
    }
    Ok(coeffs.len() - 1)
}

#[derive(Clone, Debug)]
pub struct TwoPolyPlan {
    pub x: Wire,
    pub out: Wire,
    k: usize,
    bound: i128,
    guard: u32,
    first: InputPlan,
    second: InputPlan,
    dot: DotPlan,
}

/// Preprocessing: `4k + 6` elements per instance in one wave. `coeffs` are
/// raw fixed-point values at scale `2^d`; `bound` is the input bound `q`.
pub fn prep_two_poly(
    sess: &mut Session,
    xs: &[Wire],
    coeffs: &[i128],
    bound: f64,
) -> Result<Vec<TwoPolyPlan>> {
    if sess.n() != 2 {
        return Err(ProtocolError::TwoPartyOnly(sess.n()));
    }
    let k = check_coeffs(coeffs)?;
    if !(bound > 0.0 && bound.is_finite()) {
        return Err(ProtocolError::Invalid(format!("bad input bound {bound}")));
    }
    let params = sess.params;
    let guard = guard_bits(&params);
    let bound_raw = (bound * (params.d as f64).exp2()).floor() as i128;
    let a: Vec<RingElement> = coeffs.iter().map(|&c| params.from_signed(c)).collect();
    sess.begin(Phase::Preprocess);
    let mut plans = Vec::with_capacity(xs.len());
    for &x in xs {
        sess.require_helper_mask(x)?;
        let first = prep_input_hp_in_wave(sess, 0, k + 1, TWO_POLY)?;
        let second = prep_input_hp_in_wave(sess, 1, k + 1, TWO_POLY)?;
        let per_degree: Vec<DotSpec> = (0..=k)
            .map(|j| DotSpec {
                terms: (0..=j)
                    .map(|i| (binom(j, i), first.wires[i], second.wires[j - i]))
                    .collect(),
            })
            .collect();
        let cross = prep_dot_in_wave(sess, &per_degree)?;
        let combined: Vec<(RingElement, Wire)> =
            cross.iter().enumerate().map(|(j, p)| (a[j], p.out)).collect();
        let y = sess.alloc_combined(&combined)?;
        let out = prep_trunc_in_wave(sess, y, 2 * (params.d + guard))?;
        let mut terms = Vec::new();
        for i in 0..=k {
            for m in 0..=k - i {
                terms.push((a[i + m] * binom(i + m, i), first.wires[i], second.wires[m]));
            }
        }
        plans.push(TwoPolyPlan {
            x,
            out,
            k,
            bound: bound_raw,
            guard,
            first,
            second,
            dot: DotPlan {
                spec: DotSpec { terms },
                out: y,
            },
        });
    }
    Ok(plans)
}

/// Online phase: four waves. Returns one output wire per instance at scale
/// `2^d`.
pub fn two_poly(sess: &mut Session, plans: &[TwoPolyPlan]) -> Result<Vec<Wire>> {
    if sess.n() != 2 {
        return Err(ProtocolError::TwoPartyOnly(sess.n()));
    }
    sess.ensure_live()?;
    let params = sess.params;
    let mut first_vals = Vec::with_capacity(plans.len());
    let mut dists = Vec::with_capacity(plans.len());
    let mut seconds = Vec::with_capacity(plans.len());
    for plan in plans {
        let m = sess.masked_value(0, plan.x)?;
        let x1 = m - sess.mask_share(0, plan.x).value;
        let x2 = -sess.mask_share(1, plan.x).value;
        let fresh: i128 = sess.parties[0].rng.gen_range(-plan.bound..=plan.bound);
        dists.push(params.reduce(x1 - params.from_signed(fresh)));
        first_vals.push(fresh);
        seconds.push(x2);
    }

    sess.begin(Phase::Online);
    let owners: Vec<&InputPlan> = plans.iter().flat_map(|p| [&p.first, &p.second]).collect();
    let masks = reveal_masks_in_wave(sess, &owners, TWO_POLY)?;
    let dists = sess.send(Role::Party(0), Role::Party(1), TWO_POLY, &dists)?;

    let mut powers = Vec::with_capacity(plans.len());
    for (k, plan) in plans.iter().enumerate() {
        let second = params.centered(seconds[k] + dists[k]);
        let p = |base: i128| -> Vec<RingElement> {
            (0..=plan.k)
                .map(|i| big_to_ring(&scaled_power(base, i, &params, plan.guard), &params))
                .collect()
        };
        powers.push((p(first_vals[k]), p(second)));
    }

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
    send_inputs_in_wave(sess, &jobs, TWO_POLY)?;

    for plan in plans {
        let w = sess.lincomb(
            &[
                (RingElement(1u128 << plan.guard), plan.x),
                (-RingElement::ONE, plan.first.wires[1]),
                (-RingElement::ONE, plan.second.wires[1]),
            ],
            RingElement::ZERO,
        );
        sess.push_zero_check(w)?;
    }
    let dots: Vec<DotPlan> = plans.iter().map(|p| p.dot.clone()).collect();
    dot(sess, &dots)?;
    Ok(plans.iter().map(|p| p.out).collect())
}

#[derive(Clone, Debug)]
pub struct PolyChainPlan {
    pub x: Wire,
    pub out: Wire,
    steps: Vec<TruncDotPlan>,
}

/// Preprocessing for `Σ a_j x^j` via `k - 1` truncated multiplications and a
/// final truncation: `4k - 2` elements per instance in one wave.
pub fn prep_poly_chain(sess: &mut Session, xs: &[Wire], coeffs: &[i128]) -> Result<Vec<PolyChainPlan>> {
    let k = check_coeffs(coeffs)?;
    let params = sess.params;
    sess.begin(Phase::Preprocess);
    let mut plans = Vec::with_capacity(xs.len());
    for &x in xs {
        let mut powers = vec![x];
        let mut steps = Vec::with_capacity(k - 1);
        for _ in 2..=k {
            let prev = *powers.last().unwrap();
            let step = prep_mult_trun_in_wave(sess, &[DotSpec::single(prev, x)], params.d)?.remove(0);
            powers.push(step.out);
            steps.push(step);
        }
        let terms: Vec<(RingElement, Wire)> = powers
            .iter()
            .enumerate()
            .map(|(j, &p)| (params.from_signed(coeffs[j + 1]), p))
            .collect();
        let constant = params.from_signed(coeffs[0]) * RingElement(1u128 << params.d);
        let sum = sess.lincomb(&terms, constant);
        let out = prep_trunc_in_wave(sess, sum, params.d)?;
        plans.push(PolyChainPlan { x, out, steps });
    }
    Ok(plans)
}

/// Online phase: `2(k - 1)` waves.
pub fn poly_chain(sess: &mut Session, plans: &[PolyChainPlan]) -> Result<Vec<Wire>> {
    let depth = plans.iter().map(|p| p.steps.len()).max().unwrap_or(0);
    for level in 0..depth {
        let batch: Vec<TruncDotPlan> = plans.iter().filter_map(|p| p.steps.get(level).cloned()).collect();
        mult_trun(sess, &batch)?;
    }
    Ok(plans.iter().map(|p| p.out).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::io::{input, open, prep_input};
    use crate::protocols::SessionConfig;
    use crate::ring::{decode_fixed, encode_fixed, FixedPoint};

    const RELU: [i128; 7] = [14014, 32768, 15105, 0, -737, 0, 15];

    fn run(n: usize, xs: &[f64], two_party: bool, seed: u64) -> (Vec<f64>, Session) {
        let params = RingParams::default();
        let mut s = Session::new(SessionConfig::new(params, n, seed)).unwrap();
        let raw: Vec<RingElement> = xs.iter().map(|&v| encode_fixed(v, &params).unwrap().raw).collect();
        let plan = prep_input(&mut s, 0, raw.len()).unwrap();
        let w = input(&mut s, &[(&plan, &raw)]).unwrap().remove(0);
        let out = if two_party {
            let plans = prep_two_poly(&mut s, &w, &RELU, 5.01).unwrap();
            two_poly(&mut s, &plans).unwrap()
        } else {
            let plans = prep_poly_chain(&mut s, &w, &RELU).unwrap();
            poly_chain(&mut s, &plans).unwrap()
        };
        let vals = open(&mut s, &out, &[0]).unwrap();
        let decoded = vals
            .values()
            .iter()
            .map(|&raw| decode_fixed(FixedPoint { raw }, &params))
            .collect();
        (decoded, s)
    }

    #[test]
    fn guard_bits_defaults() {
        assert_eq!(guard_bits(&RingParams::default()), 16);
        assert_eq!(guard_bits(&RingParams::new(32, 8, 8).unwrap()), 0);
    }

    #[test]
    fn scaled_power_rounds_half_away() {
        let params = RingParams::new(64, 64, 2).unwrap();
        // base 3 at scale 4 is 0.75; 0.75^2 = 0.5625 -> 2.25 at scale 4 -> 2
        assert_eq!(scaled_power(3, 2, &params, 0), BigInt::from(2));
        assert_eq!(scaled_power(-3, 3, &params, 0), BigInt::from(-2));
        assert_eq!(scaled_power(5, 0, &params, 1), BigInt::from(8));
    }

    #[test]
    fn relu_poly_at_zero_and_one() {
        let ulp = RingParams::default().ulp();
        let (y, _) = run(2, &[0.0, 1.0], true, 1);
        assert!((y[0] - 0.213836669921875).abs() <= ulp, "{}", y[0]);
        assert!((y[1] - 0.9333038330078125).abs() <= 6.0 * ulp, "{}", y[1]);
    }

    #[test]
    fn two_poly_costs() {
        for k in [2usize, 6] {
            let coeffs: Vec<i128> = (0..=k as i128).collect();
            let params = RingParams::default();
            let mut s = Session::new(SessionConfig::new(params, 2, 3)).unwrap();
            let plan = prep_input(&mut s, 0, 1).unwrap();
            let w = input(&mut s, &[(&plan, &[RingElement(1 << 16)])]).unwrap().remove(0);
            let mark = s.fabric.messages().len();
            let plans = prep_two_poly(&mut s, &w, &coeffs, 5.0).unwrap();
            let pre = s.fabric.cost_since(mark, Phase::Preprocess);
            assert_eq!((pre.rounds, pre.elements), (1, 4 * k as u64 + 6));
            let mark = s.fabric.messages().len();
            two_poly(&mut s, &plans).unwrap();
            let on = s.fabric.cost_since(mark, Phase::Online);
            assert_eq!((on.rounds, on.elements), (4, 4 * k as u64 + 9));
        }
    }

    #[test]
    fn chain_costs() {
        let k = 6u64;
        let params = RingParams::default();
        let mut s = Session::new(SessionConfig::new(params, 2, 3)).unwrap();
        let plan = prep_input(&mut s, 0, 1).unwrap();
        let w = input(&mut s, &[(&plan, &[RingElement(1 << 16)])]).unwrap().remove(0);
        let mark = s.fabric.messages().len();
        let plans = prep_poly_chain(&mut s, &w, &RELU).unwrap();
        assert_eq!(s.fabric.cost_since(mark, Phase::Preprocess).elements, 4 * k - 2);
        let mark = s.fabric.messages().len();
        poly_chain(&mut s, &plans).unwrap();
        let on = s.fabric.cost_since(mark, Phase::Online);
        assert_eq!((on.rounds, on.elements), (2 * (k - 1), 4 * (k - 1)));
    }

    #[test]
    fn routes_agree() {
        let xs: Vec<f64> = (0..41).map(|i| -5.0 + 0.25 * i as f64).collect();
        let (a, _) = run(2, &xs, true, 4);
        let (b, _) = run(3, &xs, false, 5);
        let ulp = RingParams::default().ulp();
        for (i, (u, v)) in a.iter().zip(&b).enumerate() {
            assert!((u - v).abs() <= 7.0 * ulp, "x={} {u} vs {v}", xs[i]);
        }
    }

    #[test]
    fn two_poly_rejects_three_parties() {
        let params = RingParams::default();
        let mut s = Session::new(SessionConfig::new(params, 3, 3)).unwrap();
        assert!(matches!(
            prep_two_poly(&mut s, &[], &RELU, 5.0),
            Err(ProtocolError::TwoPartyOnly(3))
        ));
    }
}
