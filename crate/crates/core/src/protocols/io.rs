//! Input sharing and verified output opening.

use crate::net::{Phase, Role};
use crate::preprocessing::{share_rand_dealer, share_rand_hp};
use crate::ring::{MacShare, RingElement};

use super::check::batch_check;
use super::{ProtocolError, Result, Session, Wire};

pub const INPUT: &str = "input";
pub const OUTPUT: &str = "output";
pub const REMASK: &str = "remask";

/// Masks prepared for `owner`'s inputs. With `via_helper` the owner learns
/// the masks online from the Helper instead of from its dealer stream.
#[derive(Clone, Debug)]
pub struct InputPlan {
    pub owner: usize,
    pub wires: Vec<Wire>,
    pub(crate) via_helper: bool,
}

/// Dealer-mask preprocessing for `count` inputs of `owner`: 2 elements each.
pub fn prep_input(sess: &mut Session, owner: usize, count: usize) -> Result<InputPlan> {
    sess.begin(Phase::Preprocess);
    prep_input_in_wave(sess, owner, count)
}

pub(crate) fn prep_input_in_wave(
    sess: &mut Session,
    owner: usize,
    count: usize,
) -> Result<InputPlan> {
    let wires = (0..count)
        .map(|_| share_rand_dealer(sess, owner, INPUT))
        .collect::<Result<_>>()?;
    Ok(InputPlan {
        owner,
        wires,
        via_helper: false,
    })
}

/// Helper-random masks, revealed to the owner online: 1 element each.
pub(crate) fn prep_input_hp_in_wave(
    sess: &mut Session,
    owner: usize,
    count: usize,
    label: &str,
) -> Result<InputPlan> {
    let wires = (0..count)
        .map(|_| share_rand_hp(sess, label))
        .collect::<Result<_>>()?;
    Ok(InputPlan {
        owner,
        wires,
        via_helper: true,
    })
}

/// Share several owners' inputs in parallel. Values are share-domain
/// elements (signed values already embedded).
pub fn input(sess: &mut Session, jobs: &[(&InputPlan, &[RingElement])]) -> Result<Vec<Vec<Wire>>> {
    input_labeled(sess, jobs, INPUT)
}

pub(crate) fn input_labeled(
    sess: &mut Session,
    jobs: &[(&InputPlan, &[RingElement])],
    label: &str,
) -> Result<Vec<Vec<Wire>>> {
    sess.ensure_live()?;
    let plans: Vec<&InputPlan> = jobs.iter().map(|(p, _)| *p).collect();
    if plans.iter().any(|p| p.via_helper) {
        sess.begin(Phase::Online);
    }
    let masks = reveal_masks_in_wave(sess, &plans, label)?;
    sess.begin(Phase::Online);
    let with_masks: Vec<(&InputPlan, &[RingElement], &[RingElement])> = jobs
        .iter()
        .zip(&masks)
        .map(|((p, v), m)| (*p, *v, m.as_slice()))
        .collect();
    send_inputs_in_wave(sess, &with_masks, label)
}

/// Each owner's plaintext masks; Helper-random masks are sent to the owner.
pub(crate) fn reveal_masks_in_wave(
    sess: &mut Session,
    plans: &[&InputPlan],
    label: &str,
) -> Result<Vec<Vec<RingElement>>> {
    let mut out = Vec::with_capacity(plans.len());
    for plan in plans {
        let masks = if plan.via_helper {
            let plain: Vec<RingElement> = plan
                .wires
                .iter()
                .map(|&w| sess.require_helper_mask(w))
                .collect::<Result<_>>()?;
            sess.send(Role::Helper, Role::Party(plan.owner), label, &plain)?
        } else {
            plan.wires
                .iter()
                .map(|&w| {
                    sess.parties[plan.owner]
                        .known
                        .get(&w)
                        .copied()
                        .ok_or(ProtocolError::UnknownMask(w))
                })
                .collect::<Result<_>>()?
        };
        out.push(masks);
    }
    Ok(out)
}

/// Owners broadcast `value + mask` to every other party.
pub(crate) fn send_inputs_in_wave(
    sess: &mut Session,
    jobs: &[(&InputPlan, &[RingElement], &[RingElement])],
    label: &str,
) -> Result<Vec<Vec<Wire>>> {
    let n = sess.n();
    for (plan, values, masks) in jobs {
        if plan.wires.len() != values.len() || masks.len() != values.len() {
            return Err(ProtocolError::LengthMismatch(plan.wires.len(), values.len()));
        }
        let m: Vec<RingElement> = values
            .iter()
            .zip(masks.iter())
            .map(|(&v, &d)| sess.params.reduce(v + d))
            .collect();
        for (k, &w) in plan.wires.iter().enumerate() {
            sess.set_masked(plan.owner, w, m[k]);
        }
        for j in (0..n).filter(|&j| j != plan.owner) {
            let got = sess.send(Role::Party(plan.owner), Role::Party(j), label, &m)?;
            for (k, &w) in plan.wires.iter().enumerate() {
                sess.set_masked(j, w, got[k]);
            }
        }
    }
    Ok(jobs.iter().map(|(p, _, _)| p.wires.clone()).collect())
}

/// Values produced by [`open`], per party (`None` for non-recipients).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Opened {
    pub per_party: Vec<Option<Vec<RingElement>>>,
}

impl Opened {
    /// The first recipient's values.
    pub fn values(&self) -> &[RingElement] {
        self.per_party.iter().flatten().next().map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Values as signed integers in the value domain.
    pub fn signed(&self, params: &crate::ring::RingParams) -> Vec<i128> {
        self.values().iter().map(|&v| params.centered(v)).collect()
    }
}

/// Open `wires` to `recipients` after verifying every pending value. If a
/// check fails nothing is released and every party aborts.
///
/// Wires whose mask the Helper does not know are first moved onto a fresh
/// Helper-known mask `ρ`: the parties open `δ - ρ`, which says nothing about
/// the value, and authenticate it in the same batch check.
pub fn open(sess: &mut Session, wires: &[Wire], recipients: &[usize]) -> Result<Opened> {
    sess.ensure_live()?;
    let n = sess.n();
    if let Some(&bad) = recipients.iter().find(|&&r| r >= n) {
        return Err(ProtocolError::Invalid(format!("no party P{}", bad + 1)));
    }
    let params = sess.params;
    // resolve everything first so missing values fail before any traffic
    let mut masked = Vec::with_capacity(n);
    for p in 0..n {
        masked.push(sess.masked_all(p, wires)?);
    }
    let mut wires = wires.to_vec();
    let unknown: Vec<usize> = (0..wires.len())
        .filter(|&k| sess.helper_mask(wires[k]).is_none())
        .collect();
    if !unknown.is_empty() {
        sess.begin(Phase::Preprocess);
        let fresh: Vec<Wire> = unknown
            .iter()
            .map(|_| share_rand_hp(sess, REMASK))
            .collect::<Result<_>>()?;
        sess.begin(Phase::Online);
        let diffs: Vec<Vec<MacShare>> = (0..n)
            .map(|p| {
                unknown
                    .iter()
                    .zip(&fresh)
                    .map(|(&k, &r)| (sess.mask_share(p, wires[k]) - sess.mask_share(p, r)).reduce(&params))
                    .collect()
            })
            .collect();
        let mut sums: Vec<Vec<RingElement>> = diffs.iter().map(|d| d.iter().map(|s| s.value).collect()).collect();
        for from in 0..n {
            let frags: Vec<RingElement> = diffs[from].iter().map(|s| s.value).collect();
            for to in (0..n).filter(|&t| t != from) {
                let got = sess.send(Role::Party(from), Role::Party(to), REMASK, &frags)?;
                for (acc, g) in sums[to].iter_mut().zip(got) {
                    *acc += g;
                }
            }
        }
        for p in 0..n {
            for (i, (&k, &r)) in unknown.iter().zip(&fresh).enumerate() {
                let e = params.reduce(sums[p][i]);
                sess.push_pending(p, e, diffs[p][i].tag);
                masked[p][k] = params.reduce(masked[p][k] - e);
                sess.set_masked(p, r, masked[p][k]);
            }
        }
        for (&k, &r) in unknown.iter().zip(&fresh) {
            wires[k] = r;
        }
    }
    if sess.pending_len() > 0 && !batch_check(sess)? {
        return Err(ProtocolError::Abort("batch check failed".into()));
    }

    sess.begin(Phase::Online);
    let plain: Vec<RingElement> = wires
        .iter()
        .map(|&w| sess.require_helper_mask(w))
        .collect::<Result<_>>()?;
    let mut per_party = vec![None; n];
    for &r in recipients {
        let masks = sess.send(Role::Helper, Role::Party(r), OUTPUT, &plain)?;
        let ys: Vec<RingElement> = masks
            .iter()
            .zip(&masked[r])
            .map(|(&d, &m)| params.to_value_domain(m - d))
            .collect();
        for (&w, &y) in wires.iter().zip(&ys) {
            sess.parties[r].outputs.push((w, y));
        }
        per_party[r] = Some(ys);
    }
    Ok(Opened { per_party })
}
