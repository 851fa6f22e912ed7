//! Isolated per-protocol cost measurement and the published closed forms.

use std::fmt;
use std::str::FromStr;

use crate::net::{estimate_cost, Cost, NetworkProfile, Phase};
use crate::nn::fit::PolyFit;
use crate::protocols::exp::{power_chain, prep_power_chain};
use crate::protocols::mult::{mult, mult_trun, prep_mult, prep_mult_trun, DotSpec};
use crate::protocols::{
    batch_check, input, mult_exp, poly_chain, prep_input, prep_mult_exp, prep_poly_chain,
    prep_two_exp, prep_two_poly, two_exp, two_poly, ProtocolError, Session, SessionConfig, Wire,
};
use crate::ring::{RingElement, RingParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Protocol {
    Mult,
    MultTrun,
    MultExp,
    TwoExp,
    TwoPoly,
    PolyChain,
    PowerChain,
    BatchCheck,
}

impl Protocol {
    pub const ALL: [Protocol; 8] = [
        Protocol::Mult,
        Protocol::MultTrun,
        Protocol::MultExp,
        Protocol::TwoExp,
        Protocol::TwoPoly,
        Protocol::PolyChain,
        Protocol::PowerChain,
        Protocol::BatchCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Mult => "mult",
            Protocol::MultTrun => "mult_trun",
            Protocol::MultExp => "mult_exp",
            Protocol::TwoExp => "two_exp",
            Protocol::TwoPoly => "two_poly",
            Protocol::PolyChain => "poly_chain",
            Protocol::PowerChain => "power_chain",
            Protocol::BatchCheck => "batch_check",
        }
    }

    pub fn two_party_only(self) -> bool {
        matches!(self, Protocol::TwoExp | Protocol::TwoPoly)
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Protocol::ALL.iter().map(|p| p.name()).collect();
                format!("unknown protocol {s:?}; expected one of {}", names.join(", "))
            })
    }
}

/// Cost of one instance, excluding the sharing of its inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Measured {
    pub protocol: Protocol,
    pub n: usize,
    pub k: usize,
    pub prep: Cost,
    pub online: Cost,
}

/// Degree-`k` coefficients: the stored ReLU fit, padded with ones.
pub fn bench_coeffs(k: usize, params: &RingParams) -> Vec<i128> {
    let base = PolyFit::relu_deg6(params).coeffs;
    (0..=k).map(|j| base.get(j).copied().unwrap_or(1)).collect()
}

/// Online half of a prepared instance.
pub type Online = Box<dyn FnOnce(&mut Session) -> Result<Vec<Wire>, ProtocolError>>;

/// Runs the preprocessing of one `protocol` instance on `x` (fixed point)
/// and `y` (integer) and returns its online half.
pub fn stage(sess: &mut Session, protocol: Protocol, x: Wire, y: Wire, k: usize) -> Result<Online, ProtocolError> {
    let params = sess.params;
    Ok(match protocol {
        Protocol::Mult => {
            let plans = prep_mult(sess, &[(x, y)])?;
            Box::new(move |s| mult(s, &plans))
        }
        Protocol::MultTrun => {
            let plans = prep_mult_trun(sess, &[DotSpec::single(x, x)], params.d)?;
            Box::new(move |s| mult_trun(s, &plans))
        }
        Protocol::MultExp => {
            let plans = prep_mult_exp(sess, &[y], k)?;
            Box::new(move |s| Ok(mult_exp(s, &plans)?.concat()))
        }
        Protocol::TwoExp => {
            let plans = prep_two_exp(sess, &[y], k)?;
            Box::new(move |s| Ok(two_exp(s, &plans)?.concat()))
        }
        Protocol::TwoPoly => {
            let plans = prep_two_poly(sess, &[x], &bench_coeffs(k, &params), 5.0)?;
            Box::new(move |s| two_poly(s, &plans))
        }
        Protocol::PolyChain => {
            let plans = prep_poly_chain(sess, &[x], &bench_coeffs(k, &params))?;
            Box::new(move |s| poly_chain(s, &plans))
        }
        Protocol::PowerChain => {
            let plans = prep_power_chain(sess, &[y], k)?;
            Box::new(move |s| Ok(power_chain(s, &plans)?.concat()))
        }
        Protocol::BatchCheck => {
            let plans = prep_mult(sess, &[(x, y)])?;
            let z = mult(sess, &plans)?;
            Box::new(move |s| {
                if batch_check(s)? {
                    Ok(z)
                } else {
                    Err(ProtocolError::Abort("batch check failed".into()))
                }
            })
        }
    })
}

pub fn measure(protocol: Protocol, n: usize, k: usize, params: RingParams, seed: u64) -> Result<Measured, ProtocolError> {
    let mut sess = Session::new(SessionConfig::new(params, n, seed))?;
    let half = params.from_signed(1i128 << params.d.saturating_sub(1));
    let plan = prep_input(&mut sess, 0, 2)?;
    let ws = input(&mut sess, &[(&plan, &[half, RingElement(3)])])?.remove(0);

    let mark = sess.fabric.messages().len();
    let online = stage(&mut sess, protocol, ws[0], ws[1], k)?;
    let prep = sess.fabric.cost_since(mark, Phase::Preprocess);
    let mark = sess.fabric.messages().len();
    online(&mut sess)?;
    let online = sess.fabric.cost_since(mark, Phase::Online);
    Ok(Measured {
        protocol,
        n,
        k,
        prep,
        online,
    })
}

/// One published closed form next to the measured value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableRow {
    pub metric: String,
    pub phase: Phase,
    pub formula: &'static str,
    pub expected: u64,
    pub measured: u64,
}

impl TableRow {
    pub fn pass(&self) -> bool {
        self.expected == self.measured
    }

    pub const CSV_HEADER: &'static str = "metric,phase,expected,measured,pass";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.metric,
            phase_name(self.phase),
            self.expected,
            self.measured,
            if self.pass() { "PASS" } else { "FAIL" }
        )
    }
}

impl fmt::Display for TableRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<40} {:<10} {:>8} = {:<6} measured {:<6} {}",
            self.metric,
            phase_name(self.phase),
            self.formula,
            self.expected,
            self.measured,
            if self.pass() { "PASS" } else { "FAIL" }
        )
    }
}

pub fn phase_name(phase: Phase) -> &'static str {
    match phase {
        Phase::Setup => "setup",
        Phase::Preprocess => "preprocess",
        Phase::Online => "online",
    }
}

/// Published costs for `m`'s protocol at its `n` and `k`.
pub fn closed_forms(m: &Measured) -> Vec<TableRow> {
    let (n, k) = (m.n as u64, m.k as u64);
    let tag = |what: &str| format!("{} n={} k={} {what}", m.protocol, m.n, m.k);
    let row = |what: &str, phase: Phase, formula: &'static str, expected: u64, measured: u64| TableRow {
        metric: tag(what),
        phase,
        formula,
        expected,
        measured,
    };
    let (pre, on) = (m.prep, m.online);
    match m.protocol {
        Protocol::Mult => vec![
            row("elements", Phase::Preprocess, "2", 2, pre.elements),
            row("rounds", Phase::Preprocess, "1", 1, pre.rounds),
        ],
        Protocol::MultTrun => Vec::new(),
        Protocol::MultExp => vec![
            row("elements", Phase::Preprocess, "k(n+1)", k * (n + 1), pre.elements),
            row("elements", Phase::Online, "2n", 2 * n, on.elements),
            row("rounds", Phase::Online, "2", 2, on.rounds),
        ],
        Protocol::TwoExp => vec![
            row("elements", Phase::Preprocess, "4k", 4 * k, pre.elements),
            row("elements", Phase::Online, "10k+2", 10 * k + 2, on.elements),
            row("rounds", Phase::Online, "4", 4, on.rounds),
        ],
        Protocol::TwoPoly => vec![
            row("elements", Phase::Preprocess, "4k+6", 4 * k + 6, pre.elements),
            row("elements", Phase::Online, "8k+12", 8 * k + 12, on.elements),
            row("rounds", Phase::Online, "4", 4, on.rounds),
        ],
        Protocol::PolyChain => vec![
            row("elements", Phase::Preprocess, "4k-2", (4 * k).saturating_sub(2), pre.elements),
            row("elements", Phase::Online, "2n(k-1)", 2 * n * k.saturating_sub(1), on.elements),
            row("rounds", Phase::Online, "2(k-1)", 2 * k.saturating_sub(1), on.rounds),
        ],
        Protocol::PowerChain => vec![
            row("elements", Phase::Preprocess, "2(k-1)", 2 * k.saturating_sub(1), pre.elements),
            row("elements", Phase::Online, "2n(k-1)", 2 * n * k.saturating_sub(1), on.elements),
            row("rounds", Phase::Online, "2(k-1)", 2 * k.saturating_sub(1), on.rounds),
        ],
        Protocol::BatchCheck => vec![
            row("elements", Phase::Online, "3n", 3 * n, on.elements),
            row("rounds", Phase::Online, "3", 3, on.rounds),
        ],
    }
}

/// Estimated online seconds of one two_poly and one mult_trun chain of
/// degree `k` under `profile`.
pub fn poly_online_estimates(k: usize, params: RingParams, profile: &NetworkProfile, seed: u64) -> Result<(f64, f64), ProtocolError> {
    let two = measure(Protocol::TwoPoly, 2, k, params, seed)?;
    let chain = measure(Protocol::PolyChain, 2, k, params, seed)?;
    Ok((
        estimate_cost(two.online, profile),
        estimate_cost(chain.online, profile),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for p in Protocol::ALL {
            assert_eq!(p.name().parse::<Protocol>().unwrap(), p);
        }
        assert!("nope".parse::<Protocol>().is_err());
    }

    #[test]
    fn mult_row_passes() {
        let m = measure(Protocol::Mult, 3, 1, RingParams::default(), 1).unwrap();
        let rows = closed_forms(&m);
        assert!(rows.iter().all(TableRow::pass), "{rows:?}");
        assert_eq!(rows[0].csv(), "mult n=3 k=1 elements,preprocess,2,2,PASS");
    }

    #[test]
    fn batch_check_rows() {
        for n in [2, 3, 5] {
            let m = measure(Protocol::BatchCheck, n, 1, RingParams::default(), 2).unwrap();
            assert!(closed_forms(&m).iter().all(TableRow::pass));
        }
    }

    #[test]
    fn two_party_protocols_reject_three() {
        assert!(measure(Protocol::TwoPoly, 3, 6, RingParams::default(), 3).is_err());
    }
}
