//! Randomized single-value tamper trials across every protocol.
//!
//! P1 (and the King role it hosts) is corrupted. Each trial runs an instance
//! honestly to list the online messages P1 sends, then reruns it with the
//! same seed while offsetting one element of one of those messages.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::bench::{stage, Protocol};
use crate::net::{Message, Mutation, Phase, Role, TamperPolicy, TamperRule};
use crate::protocols::io::{INPUT, OUTPUT};
use crate::protocols::poly::TWO_POLY;
use crate::protocols::{input, open, prep_input, ProtocolError, Session, SessionConfig};
use crate::ring::{RingElement, RingParams};

use super::OracleError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Detected,
    /// The opened values were unchanged.
    Harmless,
    Missed,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Tally {
    pub detected: usize,
    pub harmless: usize,
    pub missed: usize,
}

impl Tally {
    fn add(&mut self, o: Outcome) {
        match o {
            Outcome::Detected => self.detected += 1,
            Outcome::Harmless => self.harmless += 1,
            Outcome::Missed => self.missed += 1,
        }
    }

    pub fn trials(&self) -> usize {
        self.detected + self.harmless + self.missed
    }

    /// Detected over trials that changed an output or aborted.
    pub fn detection_rate(&self) -> f64 {
        let effective = self.detected + self.missed;
        if effective == 0 {
            return 1.0;
        }
        self.detected as f64 / effective as f64
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TamperReport {
    pub total: Tally,
    pub per_protocol: BTreeMap<&'static str, Tally>,
    /// Aborted trials in which some role still received output-mask traffic.
    pub unfair: Vec<String>,
}

impl fmt::Display for TamperReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = &self.total;
        writeln!(
            f,
            "{} trials: {} detected, {} harmless, {} missed, detection {:.4}, unfair aborts {}",
            t.trials(),
            t.detected,
            t.harmless,
            t.missed,
            t.detection_rate(),
            self.unfair.len()
        )?;
        for (name, t) in &self.per_protocol {
            writeln!(
                f,
                "  {name:<12} {:>6} detected {:>6} harmless {:>6} missed",
                t.detected, t.harmless, t.missed
            )?;
        }
        Ok(())
    }
}

/// Degree used for the polynomial and power protocols.
pub const TRIAL_DEGREE: usize = 6;

struct Run {
    result: Result<Vec<RingElement>, ProtocolError>,
    messages: Vec<Message>,
    /// Index of the first message after the inputs were shared.
    start: usize,
}

fn parties_for(protocol: Protocol) -> usize {
    if protocol.two_party_only() {
        2
    } else {
        3
    }
}

fn run_once(
    protocol: Protocol,
    params: RingParams,
    seed: u64,
    values: (i128, i128),
    policy: TamperPolicy,
) -> Result<Run, OracleError> {
    let n = parties_for(protocol);
    let mut sess = Session::new(SessionConfig::new(params, n, seed).with_tamper(policy))?;
    let owner = n - 1;
    let plan = prep_input(&mut sess, owner, 2)?;
    let vals = [params.from_signed(values.0), params.from_signed(values.1)];
    let ws = input(&mut sess, &[(&plan, &vals)])?.remove(0);
    let start = sess.fabric.messages().len();
    let recipients: Vec<usize> = (1..n).collect();
    let result = stage(&mut sess, protocol, ws[0], ws[1], TRIAL_DEGREE)
        .and_then(|online| online(&mut sess))
        .and_then(|outs| open(&mut sess, &outs, &recipients))
        .map(|o| o.per_party[owner].clone().unwrap_or_default());
    match result {
        Ok(_) | Err(ProtocolError::Abort(_)) => {}
        Err(e) => return Err(e.into()),
    }
    Ok(Run {
        result,
        messages: sess.fabric.messages().to_vec(),
        start,
    })
}

/// Online messages from the corrupted host that carry neither its own
/// inputs nor anything it could change by substituting an input.
fn targets(run: &Run) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut seen: BTreeMap<(String, Role, Role), usize> = BTreeMap::new();
    for (i, m) in run.messages.iter().enumerate() {
        if m.phase != Phase::Online || !matches!(m.from, Role::Party(0) | Role::King) {
            continue;
        }
        let key = (m.label.clone(), m.from, m.to);
        let occurrence = *seen.entry(key).and_modify(|c| *c += 1).or_insert(0);
        if i < run.start || m.label == INPUT {
            continue;
        }
        // the second two_poly message from P1 broadcasts its own powers
        if m.label == TWO_POLY && m.from == Role::Party(0) && occurrence > 0 {
            continue;
        }
        out.extend((0..m.sent.len()).map(|e| (i, e)));
    }
    out
}

fn occurrence_of(messages: &[Message], index: usize) -> usize {
    let m = &messages[index];
    messages[..index]
        .iter()
        .filter(|o| o.phase == m.phase && o.label == m.label && o.from == m.from && o.to == m.to)
        .count()
}

/// `trials` tamper trials cycling through every protocol.
pub fn tamper_trials(params: RingParams, trials: usize, seed: u64) -> Result<TamperReport, OracleError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut report = TamperReport::default();
    let one = 1i128 << params.d;
    for t in 0..trials {
        let protocol = Protocol::ALL[t % Protocol::ALL.len()];
        let run_seed: u64 = rng.gen();
        let values = (rng.gen_range(-2 * one..=2 * one), rng.gen_range(-3..=3));
        let honest = run_once(protocol, params, run_seed, values, TamperPolicy::honest())?;
        let candidates = targets(&honest);
        let want = honest
            .result
            .map_err(|e| OracleError::Model(format!("honest {protocol} run failed: {e}")))?;
        if candidates.is_empty() {
            return Err(OracleError::Model(format!("{protocol} has no tamper targets")));
        }
        let (msg, element) = candidates[rng.gen_range(0..candidates.len())];
        let by = RingElement(rng.gen_range(1..=params.share_mask()));
        let m = &honest.messages[msg];
        let rule = TamperRule {
            phase: Some(Phase::Online),
            label: Some(m.label.clone()),
            from: Some(m.from),
            to: Some(m.to),
            occurrence: occurrence_of(&honest.messages, msg),
            element,
            mutation: Mutation::Offset(by),
        };
        let n = parties_for(protocol);
        let policy = TamperPolicy::new(n, [0], vec![rule]).map_err(ProtocolError::from)?;
        let tampered = run_once(protocol, params, run_seed, values, policy)?;
        let outcome = match &tampered.result {
            Err(_) => {
                let leaked = tampered.messages.iter().any(|m| m.label == OUTPUT && m.from == Role::Helper);
                if leaked {
                    report.unfair.push(format!("trial {t} {protocol} {}", m.label));
                }
                Outcome::Detected
            }
            Ok(got) if *got == want => Outcome::Harmless,
            Ok(_) => Outcome::Missed,
        };
        report.total.add(outcome);
        report.per_protocol.entry(protocol.name()).or_default().add(outcome);
    }
    Ok(report)
}
