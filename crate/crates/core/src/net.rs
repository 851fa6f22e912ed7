//! Synchronous message fabric with per-phase accounting, tamper injection and
//! a wall-clock cost model.
//!
//! A round is one parallel wave of messages. Callers open a wave with
//! [`Fabric::begin_wave`]; every send until the next call belongs to it. The
//! ledger counts, per (phase, label), the number of distinct waves that carried
//! at least one message, so parallel sends never inflate the round count.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ring::{RingElement, WORD_BYTES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("{0} attempted to send to itself")]
    SelfSend(Role),
    #[error("unknown role {0}")]
    UnknownRole(Role),
    #[error("deadlock: {} waiting for messages that were never sent", fmt_roles(.0))]
    Deadlock(Vec<Role>),
    #[error("invalid tamper policy: {0}")]
    BadPolicy(String),
    #[error("invalid network profile: {0}")]
    BadProfile(String),
}

fn fmt_roles(roles: &[Role]) -> String {
    roles
        .iter()
        .map(|r| r.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// A participant in the simulation. Party indices are 0-based; `King` is the
/// reconstruction role hosted on the first party.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Party(usize),
    King,
    Helper,
}

impl Role {
    /// The party that physically hosts this role, if any.
    pub fn host(&self) -> Option<usize> {
        match self {
            Role::Party(i) => Some(*i),
            Role::King => Some(0),
            Role::Helper => None,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Party(i) => write!(f, "P{}", i + 1),
            Role::King => write!(f, "King"),
            Role::Helper => write!(f, "HP"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Setup,
    Preprocess,
    Online,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Setup => "setup",
            Phase::Preprocess => "preprocess",
            Phase::Online => "online",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub phase: Phase,
    pub wave: u64,
    pub label: String,
    pub from: Role,
    pub to: Role,
    pub sent: Vec<RingElement>,
    pub delivered: Vec<RingElement>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mutation {
    None,
    Offset(RingElement),
    Replace(RingElement),
}

/// Which message a rule fires on. `occurrence` counts matching messages from
/// corrupted senders, starting at 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TamperRule {
    pub phase: Option<Phase>,
    pub label: Option<String>,
    pub from: Option<Role>,
    pub to: Option<Role>,
    pub occurrence: usize,
    pub element: usize,
    pub mutation: Mutation,
}

impl TamperRule {
    pub fn offset(label: &str, from: Role, element: usize, by: RingElement) -> Self {
        Self {
            phase: None,
            label: Some(label.to_string()),
            from: Some(from),
            to: None,
            occurrence: 0,
            element,
            mutation: Mutation::Offset(by),
        }
    }

    fn matches(&self, phase: Phase, label: &str, from: Role, to: Role) -> bool {
        self.phase.is_none_or(|p| p == phase)
            && self.label.as_deref().is_none_or(|l| l == label)
            && self.from.is_none_or(|r| r == from)
            && self.to.is_none_or(|r| r == to)
    }
}

/// Corrupted parties and the mutations they apply to outgoing messages. The
/// Helper cannot be corrupted: the set holds party indices only.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TamperPolicy {
    corrupted: BTreeSet<usize>,
    rules: Vec<TamperRule>,
}

impl TamperPolicy {
    pub fn honest() -> Self {
        Self::default()
    }

    pub fn new(
        n: usize,
        corrupted: impl IntoIterator<Item = usize>,
        rules: Vec<TamperRule>,
    ) -> Result<Self, NetError> {
        let corrupted: BTreeSet<usize> = corrupted.into_iter().collect();
        if let Some(&bad) = corrupted.iter().find(|&&i| i >= n) {
            return Err(NetError::BadPolicy(format!("party index {bad} out of range")));
        }
        if corrupted.len() >= n {
            return Err(NetError::BadPolicy(
                "at least one party must stay honest".into(),
            ));
        }
        Ok(Self { corrupted, rules })
    }

    pub fn corrupted(&self) -> &BTreeSet<usize> {
        &self.corrupted
    }

    pub fn is_corrupted(&self, role: Role) -> bool {
        role.host().is_some_and(|h| self.corrupted.contains(&h))
    }

    pub fn is_active(&self) -> bool {
        !self.rules.is_empty() && !self.corrupted.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Cost {
    pub rounds: u64,
    pub elements: u64,
    pub bytes: u64,
}

impl std::ops::AddAssign for Cost {
    fn add_assign(&mut self, o: Self) {
        self.rounds += o.rounds;
        self.elements += o.elements;
        self.bytes += o.bytes;
    }
}

/// Round and element counts per (phase, label) and per phase.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CostLedger {
    pub by_label: BTreeMap<(Phase, String), Cost>,
    pub by_phase: BTreeMap<Phase, Cost>,
}

impl CostLedger {
    pub fn phase(&self, phase: Phase) -> Cost {
        self.by_phase.get(&phase).copied().unwrap_or_default()
    }

    pub fn label(&self, phase: Phase, label: &str) -> Cost {
        self.by_label
            .get(&(phase, label.to_string()))
            .copied()
            .unwrap_or_default()
    }

    /// Sum over all phases.
    pub fn total(&self) -> Cost {
        let mut c = Cost::default();
        for v in self.by_phase.values() {
            c += *v;
        }
        c
    }
}

/// Ideal point-to-point channels between all roles.
#[derive(Clone, Debug)]
pub struct Fabric {
    n: usize,
    phase: Phase,
    wave: u64,
    log: Vec<Message>,
    tamper: TamperPolicy,
    fired: Vec<usize>,
}

impl Fabric {
    pub fn new(n: usize, tamper: TamperPolicy) -> Self {
        let fired = vec![0; tamper.rules.len()];
        Self {
            n,
            phase: Phase::Setup,
            wave: 0,
            log: Vec::new(),
            tamper,
            fired,
        }
    }

    pub fn parties(&self) -> usize {
        self.n
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
    }

    pub fn tamper_policy(&self) -> &TamperPolicy {
        &self.tamper
    }

    /// Start a new message wave and return its id.
    pub fn begin_wave(&mut self) -> u64 {
        self.wave += 1;
        self.wave
    }

    pub fn current_wave(&self) -> u64 {
        self.wave
    }

    fn check_role(&self, r: Role) -> Result<(), NetError> {
        match r {
            Role::Party(i) if i >= self.n => Err(NetError::UnknownRole(r)),
            _ => Ok(()),
        }
    }

    /// Deliver `payload`, mutated if the sender is corrupted and a rule fires.
    pub fn send(
        &mut self,
        from: Role,
        to: Role,
        label: &str,
        payload: &[RingElement],
    ) -> Result<Vec<RingElement>, NetError> {
        if from == to {
            return Err(NetError::SelfSend(from));
        }
        self.check_role(from)?;
        self.check_role(to)?;
        let mut delivered = payload.to_vec();
        if self.tamper.is_corrupted(from) {
            for (idx, rule) in self.tamper.rules.iter().enumerate() {
                if !rule.matches(self.phase, label, from, to) {
                    continue;
                }
                let seen = self.fired[idx];
                self.fired[idx] += 1;
                if seen != rule.occurrence || rule.element >= delivered.len() {
                    continue;
                }
                let e = &mut delivered[rule.element];
                match rule.mutation {
                    Mutation::None => {}
                    Mutation::Offset(by) => *e += by,
                    Mutation::Replace(v) => *e = v,
                }
            }
        }
        self.log.push(Message {
            phase: self.phase,
            wave: self.wave,
            label: label.to_string(),
            from,
            to,
            sent: payload.to_vec(),
            delivered: delivered.clone(),
        });
        Ok(delivered)
    }

    pub fn messages(&self) -> &[Message] {
        &self.log
    }

    /// True if any delivered message differs from what its sender produced.
    pub fn any_tampered(&self) -> bool {
        self.log.iter().any(|m| m.sent != m.delivered)
    }

    pub fn ledger(&self) -> CostLedger {
        let mut waves: HashMap<(Phase, String), BTreeSet<u64>> = HashMap::new();
        let mut phase_waves: HashMap<Phase, BTreeSet<u64>> = HashMap::new();
        let mut ledger = CostLedger::default();
        for m in &self.log {
            let key = (m.phase, m.label.clone());
            waves.entry(key.clone()).or_default().insert(m.wave);
            phase_waves.entry(m.phase).or_default().insert(m.wave);
            let elements = m.sent.len() as u64;
            let c = ledger.by_label.entry(key).or_default();
            c.elements += elements;
            c.bytes += elements * WORD_BYTES as u64;
            let p = ledger.by_phase.entry(m.phase).or_default();
            p.elements += elements;
            p.bytes += elements * WORD_BYTES as u64;
        }
        for (key, w) in waves {
            ledger.by_label.get_mut(&key).unwrap().rounds = w.len() as u64;
        }
        for (phase, w) in phase_waves {
            ledger.by_phase.get_mut(&phase).unwrap().rounds = w.len() as u64;
        }
        ledger
    }

    /// Cost of messages logged since `mark` (an index into [`Self::messages`]).
    pub fn cost_since(&self, mark: usize, phase: Phase) -> Cost {
        let mut waves = BTreeSet::new();
        let mut c = Cost::default();
        for m in self.log[mark..].iter().filter(|m| m.phase == phase) {
            waves.insert(m.wave);
            c.elements += m.sent.len() as u64;
        }
        c.rounds = waves.len() as u64;
        c.bytes = c.elements * WORD_BYTES as u64;
        c
    }

    /// One `phase,wave,from,to,n_elements` record per message.
    pub fn dump_transcript(&self) -> String {
        let mut out = String::new();
        for m in &self.log {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                m.phase,
                m.wave,
                m.from,
                m.to,
                m.sent.len()
            ));
        }
        out
    }
}

/// Latency and bandwidth of the simulated links. Packet loss is not modeled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkProfile {
    pub rtt: f64,
    pub bandwidth: f64,
}

#[derive(Deserialize)]
struct ProfileFile {
    rtt_ms: f64,
    bandwidth_mbps: f64,
}

impl NetworkProfile {
    pub fn new(rtt: f64, bandwidth: f64) -> Result<Self, NetError> {
        if !(rtt > 0.0 && rtt.is_finite()) || !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(NetError::BadProfile(format!(
                "rtt {rtt} and bandwidth {bandwidth} must be positive"
            )));
        }
        Ok(Self { rtt, bandwidth })
    }

    pub fn lan() -> Self {
        Self {
            rtt: 0.001,
            bandwidth: 10e9,
        }
    }

    pub fn wan() -> Self {
        Self {
            rtt: 0.1,
            bandwidth: 100e6,
        }
    }

    /// Parse a TOML document with keys `rtt_ms` and `bandwidth_mbps`.
    pub fn from_toml(text: &str) -> Result<Self, NetError> {
        let f: ProfileFile =
            toml::from_str(text).map_err(|e| NetError::BadProfile(e.to_string()))?;
        Self::new(f.rtt_ms / 1000.0, f.bandwidth_mbps * 1e6)
    }

    pub fn from_file(path: &Path) -> Result<Self, NetError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NetError::BadProfile(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

pub fn estimate_cost(cost: Cost, profile: &NetworkProfile) -> f64 {
    cost.rounds as f64 * profile.rtt + (cost.bytes * 8) as f64 / profile.bandwidth
}

/// Estimated seconds for one phase of `ledger`.
pub fn estimate_wallclock(ledger: &CostLedger, phase: Phase, profile: &NetworkProfile) -> f64 {
    estimate_cost(ledger.phase(phase), profile)
}

/// A message addressed to a role program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Envelope {
    pub from: Role,
    pub label: String,
    pub payload: Vec<RingElement>,
}

#[derive(Clone, Debug, Default)]
pub struct Step {
    pub outgoing: Vec<(Role, String, Vec<RingElement>)>,
    pub done: bool,
}

impl Step {
    pub fn done() -> Self {
        Self {
            outgoing: Vec::new(),
            done: true,
        }
    }

    pub fn wait() -> Self {
        Self::default()
    }

    pub fn send(mut self, to: Role, label: &str, payload: Vec<RingElement>) -> Self {
        self.outgoing.push((to, label.to_string(), payload));
        self
    }
}

/// An isolated per-role state machine. `step` receives everything delivered
/// in the previous wave.
pub trait RoleProgram {
    fn role(&self) -> Role;
    fn step(&mut self, inbox: Vec<Envelope>) -> Step;
}

pub struct RunOutcome {
    pub fabric: Fabric,
    pub ledger: CostLedger,
}

/// Run `programs` in lockstep waves within `phase` until all report done.
pub fn run_roles(
    n: usize,
    phase: Phase,
    programs: &mut [Box<dyn RoleProgram>],
    tamper: TamperPolicy,
) -> Result<RunOutcome, NetError> {
    let mut fabric = Fabric::new(n, tamper);
    fabric.set_phase(phase);
    let mut inboxes: HashMap<Role, VecDeque<Envelope>> = HashMap::new();
    let mut done = vec![false; programs.len()];
    loop {
        let mut outgoing = Vec::new();
        for (i, p) in programs.iter_mut().enumerate() {
            if done[i] {
                continue;
            }
            let inbox: Vec<Envelope> = inboxes
                .get_mut(&p.role())
                .map(|q| q.drain(..).collect())
                .unwrap_or_default();
            let step = p.step(inbox);
            done[i] = step.done;
            for (to, label, payload) in step.outgoing {
                outgoing.push((p.role(), to, label, payload));
            }
        }
        if done.iter().all(|&d| d) && outgoing.is_empty() {
            break;
        }
        if outgoing.is_empty() {
            let blocked = programs
                .iter()
                .zip(&done)
                .filter(|(_, &d)| !d)
                .map(|(p, _)| p.role())
                .collect();
            return Err(NetError::Deadlock(blocked));
        }
        fabric.begin_wave();
        for (from, to, label, payload) in outgoing {
            let delivered = fabric.send(from, to, &label, &payload)?;
            inboxes.entry(to).or_default().push_back(Envelope {
                from,
                label,
                payload: delivered,
            });
        }
    }
    let ledger = fabric.ledger();
    Ok(RunOutcome { fabric, ledger })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(v: u128) -> RingElement {
        RingElement(v)
    }

    #[test]
    fn send_verbatim_counts_element() {
        let mut f = Fabric::new(2, TamperPolicy::honest());
        f.begin_wave();
        let out = f.send(Role::Party(0), Role::Helper, "x", &[e(9)]).unwrap();
        assert_eq!(out, vec![e(9)]);
        let c = f.ledger().phase(Phase::Setup);
        assert_eq!((c.rounds, c.elements, c.bytes), (1, 1, 16));
    }

    #[test]
    fn send_to_self_is_rejected() {
        let mut f = Fabric::new(2, TamperPolicy::honest());
        assert_eq!(
            f.send(Role::Helper, Role::Helper, "x", &[]),
            Err(NetError::SelfSend(Role::Helper))
        );
        assert!(f.send(Role::Party(5), Role::Helper, "x", &[]).is_err());
    }

    #[test]
    fn corrupted_sender_offset() {
        let rule = TamperRule::offset("x", Role::Party(1), 0, e(1));
        let policy = TamperPolicy::new(2, [1], vec![rule]).unwrap();
        let mut f = Fabric::new(2, policy);
        f.begin_wave();
        assert_eq!(f.send(Role::Party(1), Role::Party(0), "x", &[e(4)]).unwrap(), vec![e(5)]);
        // occurrence 0 already fired
        assert_eq!(f.send(Role::Party(1), Role::Party(0), "x", &[e(4)]).unwrap(), vec![e(4)]);
        assert!(f.any_tampered());
    }

    #[test]
    fn honest_senders_are_never_mutated() {
        let rule = TamperRule {
            phase: None,
            label: None,
            from: None,
            to: None,
            occurrence: 0,
            element: 0,
            mutation: Mutation::Replace(e(0)),
        };
        let policy = TamperPolicy::new(3, [2], vec![rule]).unwrap();
        let mut f = Fabric::new(3, policy);
        for from in [Role::Party(0), Role::Party(1), Role::King, Role::Helper] {
            let to = if from == Role::Helper { Role::Party(0) } else { Role::Helper };
            assert_eq!(f.send(from, to, "x", &[e(7)]).unwrap(), vec![e(7)]);
        }
    }

    #[test]
    fn king_shares_corruption_with_first_party() {
        let policy = TamperPolicy::new(2, [0], vec![]).unwrap();
        assert!(policy.is_corrupted(Role::King));
        assert!(!policy.is_corrupted(Role::Helper));
    }

    #[test]
    fn policy_keeps_one_party_honest() {
        assert!(TamperPolicy::new(2, [0, 1], vec![]).is_err());
        assert!(TamperPolicy::new(2, [2], vec![]).is_err());
        assert!(TamperPolicy::new(3, [0, 1], vec![]).is_ok());
    }

    struct Script {
        role: Role,
        // (to, label, elements) per wave; None entries wait for a message
        waves: Vec<Option<(Role, usize)>>,
        need_inbox: Vec<bool>,
        pos: usize,
        received: usize,
    }

    impl RoleProgram for Script {
        fn role(&self) -> Role {
            self.role
        }
        fn step(&mut self, inbox: Vec<Envelope>) -> Step {
            self.received += inbox.len();
            if self.pos >= self.waves.len() {
                return Step::done();
            }
            if self.need_inbox[self.pos] && inbox.is_empty() {
                return Step::wait();
            }
            let w = self.waves[self.pos];
            self.pos += 1;
            let mut s = Step::wait();
            if let Some((to, k)) = w {
                s = s.send(to, "s", vec![RingElement::ZERO; k]);
            }
            s.done = self.pos >= self.waves.len();
            s
        }
    }

    fn script(role: Role, waves: Vec<Option<(Role, usize)>>, need: Vec<bool>) -> Box<dyn RoleProgram> {
        Box::new(Script {
            role,
            waves,
            need_inbox: need,
            pos: 0,
            received: 0,
        })
    }

    #[test]
    fn no_op_programs_cost_nothing() {
        let mut progs = vec![script(Role::Party(0), vec![], vec![]), script(Role::Helper, vec![], vec![])];
        let out = run_roles(2, Phase::Online, &mut progs, TamperPolicy::honest()).unwrap();
        assert_eq!(out.ledger.total(), Cost::default());
    }

    #[test]
    fn parallel_sends_are_one_round() {
        // wave 1: P1 and P2 both send to HP; wave 2: HP replies to P1
        let mut progs = vec![
            script(Role::Party(0), vec![Some((Role::Helper, 1))], vec![false]),
            script(Role::Party(1), vec![Some((Role::Helper, 1))], vec![false]),
            script(Role::Helper, vec![Some((Role::Party(0), 1))], vec![true]),
        ];
        let out = run_roles(2, Phase::Online, &mut progs, TamperPolicy::honest()).unwrap();
        let c = out.ledger.phase(Phase::Online);
        assert_eq!((c.rounds, c.elements), (2, 3));
    }

    #[test]
    fn mult_preprocessing_script() {
        // the Helper sends a value and a tag correction to the last party
        let mut progs = vec![
            script(Role::Helper, vec![Some((Role::Party(1), 2))], vec![false]),
            script(Role::Party(0), vec![], vec![]),
            script(Role::Party(1), vec![None], vec![true]),
        ];
        let out = run_roles(2, Phase::Preprocess, &mut progs, TamperPolicy::honest()).unwrap();
        let c = out.ledger.phase(Phase::Preprocess);
        assert_eq!((c.rounds, c.elements), (1, 2));
    }

    struct Checker {
        role: Role,
        n: usize,
        stage: usize,
    }

    impl RoleProgram for Checker {
        fn role(&self) -> Role {
            self.role
        }
        fn step(&mut self, inbox: Vec<Envelope>) -> Step {
            let z = || vec![RingElement::ZERO];
            match (self.role, self.stage) {
                (Role::Helper, 0) => {
                    self.stage = 1;
                    (0..self.n).fold(Step::wait(), |s, i| s.send(Role::Party(i), "check", z()))
                }
                (Role::Helper, 1) if inbox.len() == self.n => {
                    self.stage = 2;
                    let mut s = (0..self.n).fold(Step::wait(), |s, i| s.send(Role::Party(i), "check", z()));
                    s.done = true;
                    s
                }
                (Role::Party(_), 0) if !inbox.is_empty() => {
                    self.stage = 1;
                    Step::wait().send(Role::Helper, "check", z())
                }
                (Role::Party(_), 1) if !inbox.is_empty() => Step::done(),
                _ => Step::wait(),
            }
        }
    }

    #[test]
    fn batch_check_script_three_parties() {
        let n = 3;
        let mut progs: Vec<Box<dyn RoleProgram>> = vec![Box::new(Checker { role: Role::Helper, n, stage: 0 })];
        for i in 0..n {
            progs.push(Box::new(Checker { role: Role::Party(i), n, stage: 0 }));
        }
        let out = run_roles(n, Phase::Online, &mut progs, TamperPolicy::honest()).unwrap();
        let c = out.ledger.label(Phase::Online, "check");
        assert_eq!((c.rounds, c.elements), (3, 9));
    }

    #[test]
    fn deadlock_names_blocked_role() {
        let mut progs = vec![script(Role::Party(1), vec![None], vec![true])];
        match run_roles(2, Phase::Online, &mut progs, TamperPolicy::honest()) {
            Err(NetError::Deadlock(r)) => {
                assert_eq!(r, vec![Role::Party(1)]);
                assert!(NetError::Deadlock(r).to_string().contains("P2"));
            }
            _ => panic!("expected deadlock"),
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let mk = || {
            vec![
                script(Role::Party(0), vec![Some((Role::Helper, 3))], vec![false]),
                script(Role::Helper, vec![Some((Role::Party(1), 2))], vec![true]),
            ]
        };
        let a = run_roles(2, Phase::Online, &mut mk(), TamperPolicy::honest()).unwrap();
        let b = run_roles(2, Phase::Online, &mut mk(), TamperPolicy::honest()).unwrap();
        assert_eq!(a.fabric.dump_transcript(), b.fabric.dump_transcript());
        assert_eq!(a.ledger, b.ledger);
        assert_eq!(a.fabric.dump_transcript(), "online,1,P1,HP,3\nonline,2,HP,P2,2\n");
    }

    #[test]
    fn wallclock_model() {
        let zero = CostLedger::default();
        assert_eq!(estimate_wallclock(&zero, Phase::Online, &NetworkProfile::wan()), 0.0);
        let c = Cost { rounds: 4, elements: 1, bytes: 16 };
        let t = estimate_cost(c, &NetworkProfile::wan());
        assert!((t - 0.4).abs() < 1e-5);
    }

    #[test]
    fn profile_from_toml() {
        let p = NetworkProfile::from_toml("rtt_ms = 100\nbandwidth_mbps = 100\n").unwrap();
        assert_eq!(p, NetworkProfile::wan());
        assert!(NetworkProfile::from_toml("rtt_ms = 0\nbandwidth_mbps = 1\n").is_err());
        assert!(NetworkProfile::from_toml("rtt = 1").is_err());
    }
}
