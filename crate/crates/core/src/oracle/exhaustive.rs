//! Brute-force checks over tiny rings.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::net::{Role, TamperPolicy, TamperRule};
use crate::protocols::mult::{mult, prep_mult, MULT};
use crate::protocols::{input, open, prep_input, ProtocolError, Session, SessionConfig, Wire};
use crate::ring::{RingElement, RingParams};

use super::exact::modulo;
use super::OracleError;

/// Line-oriented result of a sweep.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Report {
    pub name: String,
    pub cases: usize,
    pub violations: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}: {} cases, {} violations", self.name, self.cases, self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

fn big(x: RingElement) -> BigInt {
    BigInt::from(x.0)
}

fn session(params: RingParams, n: usize, seed: u64) -> Result<Session, OracleError> {
    Ok(Session::new(SessionConfig::new(params, n, seed))?)
}

/// MAC relation `Σ tag ≡ Δ·Σ value (mod 2^(l+s))` on a wire's mask, and on
/// every pending `(m, tag)` entry.
fn mac_violations(sess: &Session, wires: &[Wire], tag: &str) -> Vec<String> {
    let bits = sess.params.l + sess.params.s;
    let delta = big(sess.helper.delta());
    let mut out = Vec::new();
    for &w in wires {
        let rec = sess.mask_record(w);
        let v: BigInt = rec.shares.iter().map(|s| big(s.value)).sum();
        let t: BigInt = rec.shares.iter().map(|s| big(s.tag)).sum();
        if modulo(&t, bits) != modulo(&(&delta * &v), bits) {
            out.push(format!("{tag}: mask tag of wire {} inconsistent", w.index()));
        }
        if let Some(h) = rec.helper {
            if modulo(&v, bits) != modulo(&big(h), bits) {
                out.push(format!("{tag}: mask of wire {} differs from the helper's", w.index()));
            }
        }
    }
    let len = sess.parties[0].pending.len();
    for j in 0..len {
        let m = big(sess.parties[0].pending[j].0);
        if sess.parties.iter().any(|p| p.pending.get(j).map(|e| big(e.0)) != Some(m.clone())) {
            out.push(format!("{tag}: pending entry {j} differs between parties"));
            continue;
        }
        let t: BigInt = sess.parties.iter().map(|p| big(p.pending[j].1)).sum();
        if modulo(&t, bits) != modulo(&(&delta * &m), bits) {
            out.push(format!("{tag}: pending entry {j} fails the MAC relation"));
        }
    }
    out
}

/// `x·y` for every pair of `l`-bit inputs, once per seed.
pub fn exhaustive_mult(l: u32, s: u32, n: usize, seeds: &[u64]) -> Result<Report, OracleError> {
    let params = RingParams::tiny(l, s).map_err(ProtocolError::from)?;
    let size = 1u128 << l;
    let mut report = Report {
        name: format!("mult l={l} s={s} n={n}"),
        ..Report::default()
    };
    for &seed in seeds {
        for x in 0..size {
            for y in 0..size {
                let case = format!("seed {seed} x={x} y={y}");
                let mut sess = session(params, n, seed)?;
                let a = prep_input(&mut sess, 0, 1)?;
                let b = prep_input(&mut sess, 1, 1)?;
                let ws = input(&mut sess, &[(&a, &[RingElement(x)]), (&b, &[RingElement(y)])])?;
                let (wx, wy) = (ws[0][0], ws[1][0]);
                let plans = prep_mult(&mut sess, &[(wx, wy)])?;
                let z = mult(&mut sess, &plans)?[0];
                report.violations.extend(mac_violations(&sess, &[wx, wy, z], &case));
                let recipients: Vec<usize> = (0..n).collect();
                let opened = open(&mut sess, &[z], &recipients)?;
                let want = modulo(&(BigInt::from(x) * BigInt::from(y)), l);
                for (p, got) in opened.per_party.iter().enumerate() {
                    let got = got.as_ref().map(|v| BigUint::from(v[0].0));
                    if got.as_ref() != Some(&want) {
                        report.violations.push(format!("{case}: P{} opened {got:?}, expected {want}", p + 1));
                    }
                }
                report.cases += 1;
            }
        }
    }
    Ok(report)
}

/// Input then open for every `l`-bit value, from every owner.
pub fn exhaustive_round_trip(l: u32, s: u32, n: usize, seeds: &[u64]) -> Result<Report, OracleError> {
    let params = RingParams::tiny(l, s).map_err(ProtocolError::from)?;
    let mut report = Report {
        name: format!("input/open l={l} s={s} n={n}"),
        ..Report::default()
    };
    for &seed in seeds {
        for owner in 0..n {
            for v in 0..(1u128 << l) {
                let case = format!("seed {seed} owner P{} v={v}", owner + 1);
                let mut sess = session(params, n, seed)?;
                let plan = prep_input(&mut sess, owner, 1)?;
                let w = input(&mut sess, &[(&plan, &[RingElement(v)])])?[0][0];
                report.violations.extend(mac_violations(&sess, &[w], &case));
                let recipients: Vec<usize> = (0..n).collect();
                let opened = open(&mut sess, &[w], &recipients)?;
                for (p, got) in opened.per_party.iter().enumerate() {
                    if got.as_deref() != Some(&[RingElement(v)][..]) {
                        report.violations.push(format!("{case}: P{} opened {got:?}", p + 1));
                    }
                }
                report.cases += 1;
            }
        }
    }
    Ok(report)
}

/// Detection counts for single-bit offsets on a multiplication fragment.
#[derive(Clone, Debug, PartialEq)]
pub struct TamperSweep {
    pub trials: usize,
    pub detected: usize,
    /// Runs that finished with a wrong output.
    pub missed: usize,
    /// Allowed miss probability `(s + 1) / 2^s`.
    pub bound: f64,
}

impl TamperSweep {
    pub fn miss_rate(&self) -> f64 {
        self.missed as f64 / self.trials.max(1) as f64
    }
}

impl fmt::Display for TamperSweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "tamper sweep: {} trials, {} detected, {} missed, miss rate {:.4} (bound {:.4})",
            self.trials,
            self.detected,
            self.missed,
            self.miss_rate(),
            self.bound
        )
    }
}

/// Offsets P1's fragment of a product by `2^b` for every bit `b < l`, on
/// random inputs drawn per seed, and counts how often opening aborts.
pub fn tamper_sweep(l: u32, s: u32, seeds: &[u64]) -> Result<TamperSweep, OracleError> {
    let params = RingParams::tiny(l, s).map_err(ProtocolError::from)?;
    let mut sweep = TamperSweep {
        trials: 0,
        detected: 0,
        missed: 0,
        bound: (s as f64 + 1.0) / (s as f64).exp2(),
    };
    for bit in 0..l {
        for &seed in seeds {
            let mut rng = ChaCha20Rng::seed_from_u64(seed ^ ((bit as u64) << 32));
            let (x, y) = (rng.gen_range(0..1u128 << l), rng.gen_range(0..1u128 << l));
            let rule = TamperRule::offset(MULT, Role::Party(0), 0, RingElement(1u128 << bit));
            let policy = TamperPolicy::new(2, [0], vec![rule]).map_err(ProtocolError::from)?;
            let mut sess = Session::new(SessionConfig::new(params, 2, seed).with_tamper(policy))?;
            let a = prep_input(&mut sess, 0, 1)?;
            let b = prep_input(&mut sess, 1, 1)?;
            let ws = input(&mut sess, &[(&a, &[RingElement(x)]), (&b, &[RingElement(y)])])?;
            let plans = prep_mult(&mut sess, &[(ws[0][0], ws[1][0])])?;
            let z = mult(&mut sess, &plans)?[0];
            sweep.trials += 1;
            match open(&mut sess, &[z], &[1]) {
                Err(ProtocolError::Abort(_)) => sweep.detected += 1,
                Err(e) => return Err(e.into()),
                Ok(out) => {
                    if modulo(&(BigInt::from(x) * BigInt::from(y)), l) != BigUint::from(out.values()[0].0) {
                        sweep.missed += 1;
                    }
                }
            }
        }
    }
    Ok(sweep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mult_small_ring_has_no_violations() {
        let r = exhaustive_mult(3, 3, 3, &[5]).unwrap();
        assert_eq!(r.cases, 64);
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn round_trip_small_ring() {
        let r = exhaustive_round_trip(4, 4, 2, &[1]).unwrap();
        assert_eq!(r.cases, 32);
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn sweep_detects_most_offsets() {
        let seeds: Vec<u64> = (0..40).collect();
        let sweep = tamper_sweep(4, 4, &seeds).unwrap();
        assert_eq!(sweep.trials, 160);
        assert_eq!(sweep.trials, sweep.detected + sweep.missed);
        assert!(sweep.miss_rate() <= sweep.bound, "{sweep}");
    }

    #[test]
    fn report_lines() {
        let r = Report {
            name: "x".into(),
            cases: 2,
            violations: vec!["bad".into()],
        };
        assert_eq!(r.to_string(), "x: 2 cases, 1 violations\n  bad\n");
    }
}
