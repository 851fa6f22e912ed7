//! Multiplication, dot products and truncation.
//!
//! A dot product `Σ c·x·y` gets an output mask `D = Σ c·δ_x·δ_y` from the
//! Helper. Online, every party sends its fragment of the masked result to the
//! King, which rebroadcasts the sum: two waves, `2n` elements, independent of
//! the vector length. Truncation of a wire shares `δ >> f` in preprocessing
//! and shifts the public masked value locally.

use crate::net::{Phase, Role};
use crate::preprocessing::share_value_hp;
use crate::ring::RingElement;

use super::{ProtocolError, Result, Session, Wire, WireDef};

pub const MULT: &str = "mult";
pub const TRUNC: &str = "trunc";

/// `Σ c_k · x_k · y_k` over wires.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DotSpec {
    pub terms: Vec<(RingElement, Wire, Wire)>,
}

impl DotSpec {
    pub fn single(x: Wire, y: Wire) -> Self {
        Self {
            terms: vec![(RingElement::ONE, x, y)],
        }
    }

    pub fn pairwise(xs: &[Wire], ys: &[Wire]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(ProtocolError::LengthMismatch(xs.len(), ys.len()));
        }
        Ok(Self {
            terms: xs.iter().zip(ys).map(|(&x, &y)| (RingElement::ONE, x, y)).collect(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct DotPlan {
    pub spec: DotSpec,
    pub out: Wire,
}

/// A dot product followed by a truncation of its result.
#[derive(Clone, Debug)]
pub struct TruncDotPlan {
    pub dot: DotPlan,
    pub out: Wire,
}

pub fn prep_dot(sess: &mut Session, specs: &[DotSpec]) -> Result<Vec<DotPlan>> {
    sess.begin(Phase::Preprocess);
    prep_dot_in_wave(sess, specs)
}

pub(crate) fn prep_dot_in_wave(sess: &mut Session, specs: &[DotSpec]) -> Result<Vec<DotPlan>> {
    let mut plans = Vec::with_capacity(specs.len());
    for spec in specs {
        let mut d = RingElement::ZERO;
        for &(c, x, y) in &spec.terms {
            d += c * sess.require_helper_mask(x)? * sess.require_helper_mask(y)?;
        }
        let out = share_value_hp(sess, d, MULT)?;
        plans.push(DotPlan {
            spec: spec.clone(),
            out,
        });
    }
    Ok(plans)
}

pub fn prep_mult(sess: &mut Session, pairs: &[(Wire, Wire)]) -> Result<Vec<DotPlan>> {
    let specs: Vec<DotSpec> = pairs.iter().map(|&(x, y)| DotSpec::single(x, y)).collect();
    prep_dot(sess, &specs)
}

/// Online phase of a batch of dot products; returns the output wires.
pub fn dot(sess: &mut Session, plans: &[DotPlan]) -> Result<Vec<Wire>> {
    sess.ensure_live()?;
    if plans.is_empty() {
        return Ok(Vec::new());
    }
    let n = sess.n();
    let params = sess.params;
    let mut frags = vec![Vec::with_capacity(plans.len()); n];
    let mut tags = vec![Vec::with_capacity(plans.len()); n];
    for p in 0..n {
        let key = sess.parties[p].delta_frag;
        for plan in plans {
            let d = sess.mask_share(p, plan.out);
            let (mut v, mut t) = (d.value + d.value, d.tag + d.tag);
            for &(c, x, y) in &plan.spec.terms {
                let (mx, my) = (sess.masked_value(p, x)?, sess.masked_value(p, y)?);
                let (dx, dy) = (sess.mask_share(p, x), sess.mask_share(p, y));
                let prod = mx * my;
                if p == 0 {
                    v += c * prod;
                }
                v -= c * (mx * dy.value + my * dx.value);
                t += c * (key * prod - mx * dy.tag - my * dx.tag);
            }
            frags[p].push(params.reduce(v));
            tags[p].push(params.reduce(t));
        }
    }

    sess.begin(Phase::Online);
    let mut sums = vec![RingElement::ZERO; plans.len()];
    for (p, f) in frags.iter().enumerate() {
        let got = sess.send(Role::Party(p), Role::King, MULT, f)?;
        for (s, g) in sums.iter_mut().zip(got) {
            *s += g;
        }
    }
    let sums: Vec<RingElement> = sums.into_iter().map(|s| params.reduce(s)).collect();

    sess.begin(Phase::Online);
    for p in 0..n {
        let got = sess.send(Role::King, Role::Party(p), MULT, &sums)?;
        for (k, plan) in plans.iter().enumerate() {
            sess.set_masked(p, plan.out, got[k]);
            sess.push_pending(p, got[k], tags[p][k]);
        }
    }
    Ok(plans.iter().map(|p| p.out).collect())
}

pub fn mult(sess: &mut Session, plans: &[DotPlan]) -> Result<Vec<Wire>> {
    dot(sess, plans)
}

/// Share `δ >> bits` for each wire; the returned wires are local shifts.
pub fn prep_trunc(sess: &mut Session, wires: &[Wire], bits: u32) -> Result<Vec<Wire>> {
    sess.begin(Phase::Preprocess);
    wires
        .iter()
        .map(|&w| prep_trunc_in_wave(sess, w, bits))
        .collect()
}

pub(crate) fn prep_trunc_in_wave(sess: &mut Session, w: Wire, bits: u32) -> Result<Wire> {
    let d = sess.require_helper_mask(w)?;
    let shifted = sess.params.shr(d, bits);
    let out = share_value_hp(sess, shifted, TRUNC)?;
    sess.set_def(out, WireDef::Shift { input: w, bits });
    Ok(out)
}

/// Multiply each wire by a public constant and truncate by `bits`.
pub fn prep_scale_trunc(
    sess: &mut Session,
    wires: &[Wire],
    c: RingElement,
    bits: u32,
) -> Result<Vec<Wire>> {
    sess.begin(Phase::Preprocess);
    wires
        .iter()
        .map(|&w| {
            let scaled = sess.scale(w, c);
            prep_trunc_in_wave(sess, scaled, bits)
        })
        .collect()
}

/// Dot products whose results are truncated by `bits`: 4 elements each, one
/// wave.
pub fn prep_mult_trun(sess: &mut Session, specs: &[DotSpec], bits: u32) -> Result<Vec<TruncDotPlan>> {
    sess.begin(Phase::Preprocess);
    prep_mult_trun_in_wave(sess, specs, bits)
}

pub(crate) fn prep_mult_trun_in_wave(
    sess: &mut Session,
    specs: &[DotSpec],
    bits: u32,
) -> Result<Vec<TruncDotPlan>> {
    let dots = prep_dot_in_wave(sess, specs)?;
    dots.into_iter()
        .map(|dot| {
            let out = prep_trunc_in_wave(sess, dot.out, bits)?;
            Ok(TruncDotPlan { dot, out })
        })
        .collect()
}

pub fn mult_trun(sess: &mut Session, plans: &[TruncDotPlan]) -> Result<Vec<Wire>> {
    let dots: Vec<DotPlan> = plans.iter().map(|p| p.dot.clone()).collect();
    dot(sess, &dots)?;
    Ok(plans.iter().map(|p| p.out).collect())
}
