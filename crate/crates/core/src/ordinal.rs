//! Runs through transfinite stages `ω·a + b`.
//!
//! Successor stages are ordinary steps. At a limit stage every square takes
//! its eventual value, or the largest symbol it keeps returning to if it
//! never settles (1 for a square that alternates between 0 and 1), the
//! machine enters its limit state and the head goes back to square 0.
//!
//! The ω steps before a limit cannot be executed, so a limit is computed
//! exactly only from a lasso proof: an exact repeat or a translated cycle
//! found within the per-block step budget. Without one, `CycleExact` gives
//! up with a square-by-square report, and `BudgetApprox` takes the tape at
//! the horizon if nothing changed in the final window.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::detect::{Certificate, LoopDetector};
use crate::machine::{
    apply, step_in_place, Configuration, Direction, Inscription, Instruction, Machine, RunError, Symbol, Tape,
    TransitionTable,
};

/// The ordinal `ω·a + b`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OrdinalStage {
    pub a: u64,
    pub b: u64,
}

impl OrdinalStage {
    pub const fn new(a: u64, b: u64) -> Self {
        OrdinalStage { a, b }
    }

    pub const fn finite(b: u64) -> Self {
        OrdinalStage { a: 0, b }
    }

    pub fn is_limit(&self) -> bool {
        self.a > 0 && self.b == 0
    }
}

impl fmt::Display for OrdinalStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w*{}+{}", self.a, self.b)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("cannot read {0:?} as an ordinal stage (expected w*a+b)")]
pub struct StageParseError(pub String);

impl FromStr for OrdinalStage {
    type Err = StageParseError;

    /// Accepts `w*a+b`, `w*a`, `w+b`, `w` and plain `b`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || StageParseError(s.to_string());
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let (limit, finite) = match t.split_once('+') {
            Some((l, f)) => (Some(l), Some(f)),
            None if t.starts_with('w') || t.starts_with('ω') => (Some(t.as_str()), None),
            None => (None, Some(t.as_str())),
        };
        let a = match limit {
            None => 0,
            Some(l) => {
                let rest = l.strip_prefix('w').or_else(|| l.strip_prefix('ω')).ok_or_else(err)?;
                match rest.strip_prefix('*') {
                    Some(n) => n.parse().map_err(|_| err())?,
                    None if rest.is_empty() => 1,
                    None => return Err(err()),
                }
            }
        };
        let b = match finite {
            None => 0,
            Some(f) => f.parse().map_err(|_| err())?,
        };
        Ok(OrdinalStage { a, b })
    }
}

impl Serialize for OrdinalStage {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OrdinalStage {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitMode {
    CycleExact,
    BudgetApprox,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LimitPolicy {
    pub mode: LimitMode,
    /// Steps run in each ω-block while looking for a lasso.
    pub block_budget: u64,
    /// Trailing steps inspected for flickering squares.
    pub window: u64,
}

impl Default for LimitPolicy {
    fn default() -> Self {
        LimitPolicy {
            mode: LimitMode::CycleExact,
            block_budget: 100_000,
            window: 1_000,
        }
    }
}

impl LimitPolicy {
    pub fn exact(block_budget: u64) -> Self {
        LimitPolicy {
            block_budget,
            ..Self::default()
        }
    }

    pub fn approx(block_budget: u64, window: u64) -> Self {
        LimitPolicy {
            mode: LimitMode::BudgetApprox,
            block_budget,
            window,
        }
    }
}

/// Which squares survive limits and how often each may be changed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignatedOutput {
    /// `None` designates every square.
    pub squares: Option<BTreeSet<usize>>,
    /// Changes allowed per designated square; `None` is unlimited.
    pub write_limit: Option<u64>,
}

impl DesignatedOutput {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn squares(squares: impl IntoIterator<Item = usize>, write_limit: Option<u64>) -> Self {
        DesignatedOutput {
            squares: Some(squares.into_iter().collect()),
            write_limit,
        }
    }

    /// Square 0, changed at most once.
    pub fn accelerated() -> Self {
        Self::squares([0], Some(1))
    }

    pub fn contains(&self, p: usize) -> bool {
        self.squares.as_ref().is_none_or(|s| s.contains(&p))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SquareStatus {
    Settled(Symbol),
    /// Changed back and forth within the window.
    Alternating,
    /// Changed once within the window; may or may not be done.
    Unknown,
}

impl fmt::Display for SquareStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SquareStatus::Settled(s) => write!(f, "settled{}", s.0),
            SquareStatus::Alternating => f.write_str("alternating"),
            SquareStatus::Unknown => f.write_str("unknown"),
        }
    }
}

impl Serialize for SquareStatus {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum OrdinalOutcome {
    /// `exact` is false when some limit on the way was a horizon reading.
    HaltedAt {
        stage: OrdinalStage,
        config: Configuration,
        exact: bool,
    },
    ReachedStageLimit {
        stage: OrdinalStage,
        config: Configuration,
        exact: bool,
    },
    /// The limit at `stage` could not be determined.
    LimitUnresolved {
        stage: OrdinalStage,
        squares: BTreeMap<usize, SquareStatus>,
    },
}

impl OrdinalOutcome {
    pub fn config(&self) -> Option<&Configuration> {
        match self {
            OrdinalOutcome::HaltedAt { config, .. } | OrdinalOutcome::ReachedStageLimit { config, .. } => Some(config),
            OrdinalOutcome::LimitUnresolved { .. } => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            OrdinalOutcome::HaltedAt { .. } => "halted_at",
            OrdinalOutcome::ReachedStageLimit { .. } => "reached_stage_limit",
            OrdinalOutcome::LimitUnresolved { .. } => "limit_unresolved",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum OrdinalError {
    #[error("empty history")]
    EmptyHistory,
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("square {square} changed more often than allowed (stage {stage})")]
    WriteLimitExceeded { square: usize, stage: OrdinalStage },
}

/// A machine together with the state it enters at limits. By default that
/// is a fresh state with no instructions, so a classical machine halts at
/// its first limit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrdinalMachine {
    pub machine: Machine,
    pub limit_state: usize,
}

impl OrdinalMachine {
    pub fn new(machine: Machine) -> Self {
        let limit_state = machine.state_count();
        OrdinalMachine { machine, limit_state }
    }

    pub fn with_limit_state(machine: Machine, limit_state: usize) -> Self {
        OrdinalMachine { machine, limit_state }
    }
}

impl TransitionTable for OrdinalMachine {
    fn instruction(&self, state: usize, read: Symbol) -> Option<Instruction> {
        if state < self.machine.state_count() {
            self.machine.lookup(state, read).copied()
        } else {
            None
        }
    }
}

/// Limsup tape from one full cycle `cycle[0] → ... → cycle[period]` of a
/// lasso certificate.
fn cycle_limit_tape(cert: &Certificate, cycle: &[Configuration]) -> Tape {
    let start = &cycle[0];
    match cert {
        Certificate::Translated { shift, margin, .. } => {
            let floor = start.head - margin;
            let end = cycle.last().unwrap();
            let below: Vec<Symbol> = start.tape.prefix(floor);
            let trail: Vec<Symbol> = (floor..floor + shift).map(|p| end.tape.get(p)).collect();
            if trail.iter().all(|s| s.is_blank()) {
                return Tape::from_symbols(below);
            }
            let shift = *shift;
            let bg: Inscription = Arc::new(move |p| {
                if p < floor {
                    below[p]
                } else {
                    trail[(p - floor) % shift]
                }
            });
            Tape::blank().with_background(bg)
        }
        _ => {
            let mut tape = start.tape.clone();
            let len = cycle.iter().map(|c| c.tape.explicit_len()).max().unwrap_or(0);
            for p in 0..len {
                let top = cycle.iter().map(|c| c.tape.get(p)).max().unwrap();
                tape.set(p, top);
            }
            tape
        }
    }
}

fn limit_from(tape: Tape, limit_state: usize) -> Configuration {
    Configuration {
        state: limit_state,
        head: 0,
        tape,
        steps: 0,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LimitResult {
    Exact(Configuration),
    /// Horizon reading under `BudgetApprox`.
    Approximate(Configuration),
    Unresolved(BTreeMap<usize, SquareStatus>),
}

fn window_statuses<'a>(
    squares: usize,
    current: &Tape,
    changes: impl Iterator<Item = &'a usize>,
) -> BTreeMap<usize, SquareStatus> {
    let mut count: BTreeMap<usize, u64> = BTreeMap::new();
    for p in changes {
        *count.entry(*p).or_insert(0) += 1;
    }
    let len = squares.max(count.keys().next_back().map_or(0, |p| p + 1));
    (0..len)
        .map(|p| {
            let st = match count.get(&p) {
                None => SquareStatus::Settled(current.get(p)),
                Some(1) => SquareStatus::Unknown,
                Some(_) => SquareStatus::Alternating,
            };
            (p, st)
        })
        .collect()
}

fn unresolved_or_approx(
    statuses: BTreeMap<usize, SquareStatus>,
    current: &Tape,
    policy: &LimitPolicy,
    limit_state: usize,
) -> LimitResult {
    let quiet = statuses.values().all(|s| matches!(s, SquareStatus::Settled(_)));
    if policy.mode == LimitMode::BudgetApprox && quiet {
        LimitResult::Approximate(limit_from(current.clone(), limit_state))
    } else {
        LimitResult::Unresolved(statuses)
    }
}

/// Limit of a recorded run. An exact limit needs the history to contain a
/// full lasso; otherwise the last `policy.window` steps decide.
pub fn limit_config(
    history: &[Configuration],
    policy: &LimitPolicy,
    limit_state: usize,
) -> Result<LimitResult, OrdinalError> {
    let first = history.first().ok_or(OrdinalError::EmptyHistory)?;
    let mut detector = LoopDetector::new();
    for c in history {
        if let Some(cert) = detector.observe(c) {
            let s = (cert.start().steps - first.steps) as usize;
            let cycle = &history[s..=s + cert.period() as usize];
            return Ok(LimitResult::Exact(limit_from(
                cycle_limit_tape(&cert, cycle),
                limit_state,
            )));
        }
    }
    let last = history.last().unwrap();
    let from = history.len().saturating_sub(policy.window as usize + 1);
    let tail = &history[from..];
    let changes: Vec<usize> = tail
        .windows(2)
        .filter(|w| w[0].tape.get(w[0].head) != w[1].tape.get(w[0].head))
        .map(|w| w[0].head)
        .collect();
    let statuses = window_statuses(last.tape.explicit_len(), &last.tape, changes.iter());
    Ok(unresolved_or_approx(statuses, &last.tape, policy, limit_state))
}

fn replay_cycle(om: &OrdinalMachine, cert: &Certificate) -> Vec<Configuration> {
    let mut c = cert.start().clone();
    let mut out = vec![c.clone()];
    for _ in 0..cert.period() {
        step_in_place(&mut c, om).expect("certified cycles replay");
        out.push(c.clone());
    }
    out
}

/// Core loop shared by [`run_ordinal`] and [`run_restricted_ittm`]. With
/// `restrict`, squares outside the designated set are blanked at limits.
fn run_stages(
    om: &OrdinalMachine,
    input: Tape,
    stage_limit: OrdinalStage,
    policy: &LimitPolicy,
    designated: &DesignatedOutput,
    restrict: bool,
) -> Result<OrdinalOutcome, OrdinalError> {
    let mut config = Configuration::initial(input);
    let mut a = 0u64;
    let mut exact = true;
    let mut writes: BTreeMap<usize, u64> = BTreeMap::new();
    loop {
        let last_block = a == stage_limit.a;
        let mut detector = (!last_block).then(LoopDetector::new);
        if let Some(d) = detector.as_mut() {
            d.observe(&config);
        }
        let mut recent: VecDeque<(u64, usize)> = VecDeque::new();
        let cert = loop {
            let Some(ins) = om.instruction(config.state, config.scanned()) else {
                return Ok(OrdinalOutcome::HaltedAt {
                    stage: OrdinalStage::new(a, config.steps),
                    config,
                    exact,
                });
            };
            if last_block && config.steps >= stage_limit.b {
                return Ok(OrdinalOutcome::ReachedStageLimit {
                    stage: OrdinalStage::new(a, config.steps),
                    config,
                    exact,
                });
            }
            if !last_block && config.steps >= policy.block_budget {
                break None;
            }
            let p = config.head;
            if ins.write != config.scanned() {
                if designated.contains(p) {
                    let used = writes.entry(p).or_insert(0);
                    *used += 1;
                    if designated.write_limit.is_some_and(|w| *used > w) {
                        return Err(OrdinalError::WriteLimitExceeded {
                            square: p,
                            stage: OrdinalStage::new(a, config.steps),
                        });
                    }
                }
                if !last_block {
                    recent.push_back((config.steps, p));
                    while recent
                        .front()
                        .is_some_and(|(s, _)| s + policy.window < config.steps + 1)
                    {
                        recent.pop_front();
                    }
                }
            }
            apply(&mut config, &ins)?;
            if let Some(c) = detector.as_mut().and_then(|d| d.observe(&config)) {
                break Some(c);
            }
        };
        let limit = match cert {
            Some(cert) => LimitResult::Exact(limit_from(
                cycle_limit_tape(&cert, &replay_cycle(om, &cert)),
                om.limit_state,
            )),
            None => {
                let statuses = window_statuses(config.tape.explicit_len(), &config.tape, recent.iter().map(|(_, p)| p));
                unresolved_or_approx(statuses, &config.tape, policy, om.limit_state)
            }
        };
        a += 1;
        config = match limit {
            LimitResult::Exact(c) => c,
            LimitResult::Approximate(c) => {
                exact = false;
                c
            }
            LimitResult::Unresolved(squares) => {
                return Ok(OrdinalOutcome::LimitUnresolved {
                    stage: OrdinalStage::new(a, 0),
                    squares,
                })
            }
        };
        if restrict {
            if let Some(keep) = &designated.squares {
                config.tape = Tape::from_symbols((0..keep.last().map_or(0, |m| m + 1)).map(|p| {
                    if keep.contains(&p) {
                        config.tape.get(p)
                    } else {
                        Symbol::BLANK
                    }
                }));
            }
        }
    }
}

pub fn run_ordinal(
    om: &OrdinalMachine,
    input: Tape,
    stage_limit: OrdinalStage,
    policy: &LimitPolicy,
    designated: &DesignatedOutput,
) -> Result<OrdinalOutcome, OrdinalError> {
    run_stages(om, input, stage_limit, policy, designated, false)
}

/// Only the designated squares carry information past a limit.
pub fn run_restricted_ittm(
    om: &OrdinalMachine,
    input: Tape,
    stage_limit: OrdinalStage,
    designated: &DesignatedOutput,
    policy: &LimitPolicy,
) -> Result<OrdinalOutcome, OrdinalError> {
    run_stages(om, input, stage_limit, policy, designated, true)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcceleratedOutput {
    Zero,
    One,
    Unresolved,
}

/// Square 0 at stage ω, the machine allowed to change it once.
pub fn run_accelerated(m: &Machine, input: Tape, policy: &LimitPolicy) -> Result<AcceleratedOutput, OrdinalError> {
    let om = OrdinalMachine::new(m.clone());
    let out = run_ordinal(
        &om,
        input,
        OrdinalStage::new(1, 0),
        policy,
        &DesignatedOutput::accelerated(),
    )?;
    Ok(match out.config() {
        Some(c) if c.tape.get(0) == Symbol::ONE => AcceleratedOutput::One,
        Some(_) => AcceleratedOutput::Zero,
        None => AcceleratedOutput::Unresolved,
    })
}

/// Symbol used on square 1 to mark the left end of the simulated tape.
fn wrapper_marker(m: &Machine) -> u8 {
    m.alphabet_size()
}

/// Machine that runs `m` on squares `2, 3, ...` and, if `m` halts, walks
/// back and changes square 0 from 0 to 1. Square 1 holds a marker; a left
/// move off `m`'s tape lands on it and stops everything without output.
pub fn halting_detector(m: &Machine) -> Machine {
    use Direction::{Left as L, Right as R};
    let k = m.alphabet_size();
    let mark = wrapper_marker(m);
    let n = m.state_count();
    // 0: step off square 0; 1: plant the marker; 2..2+n: m; then back, set,
    // done.
    let back = 2 + n;
    let set = back + 1;
    let done = set + 1;
    let mut states = vec![
        vec![Instruction::new(0, 0, R, 1)],
        vec![Instruction::new(0, mark, R, 2)],
    ];
    for s in 0..n {
        let mut list = Vec::new();
        for r in 0..k {
            match m.lookup(s, Symbol(r)) {
                Some(i) => list.push(Instruction::new(r, i.write.0, i.direction, i.next_state + 2)),
                None => list.push(Instruction::new(r, r, L, back)),
            }
        }
        states.push(list);
    }
    let mut walk: Vec<Instruction> = (0..k).map(|r| Instruction::new(r, r, L, back)).collect();
    walk.push(Instruction::new(mark, mark, L, set));
    states.push(walk);
    states.push(vec![Instruction::new(0, 1, R, done)]);
    states.push(vec![]);
    Machine::new(k + 1, states).expect("wrapper is well formed")
}

/// Input for [`halting_detector`]: `m`'s input moved two squares right.
pub fn detector_input(input: &Tape) -> Tape {
    let mut cells = vec![Symbol::BLANK, Symbol::BLANK];
    cells.extend(input.prefix(input.explicit_len()));
    Tape::from_symbols(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::godel;
    use crate::lang::{enumerate_machines, parse};
    use crate::machine::{encode_unary, run, run_from, RunOutcome};
    use proptest::prelude::*;

    fn lamp() -> Machine {
        parse(include_str!("../../../figures/lamp.tm")).unwrap()
    }

    #[test]
    fn stage_strings() {
        for (s, st) in [
            ("w*2+3", OrdinalStage::new(2, 3)),
            ("w*1+0", OrdinalStage::new(1, 0)),
            ("w", OrdinalStage::new(1, 0)),
            ("w+4", OrdinalStage::new(1, 4)),
            ("7", OrdinalStage::finite(7)),
            ("w*3", OrdinalStage::new(3, 0)),
        ] {
            assert_eq!(s.parse::<OrdinalStage>().unwrap(), st);
            assert_eq!(st.to_string().parse::<OrdinalStage>().unwrap(), st);
        }
        assert!("x*2".parse::<OrdinalStage>().is_err());
        assert!(OrdinalStage::new(1, 0).is_limit() && !OrdinalStage::new(0, 0).is_limit());
        assert!(OrdinalStage::new(1, 0) > OrdinalStage::finite(1_000_000));
        assert_eq!(serde_json::to_string(&OrdinalStage::new(1, 2)).unwrap(), "\"w*1+2\"");
    }

    fn history(m: &Machine, input: Tape, steps: u64) -> Vec<Configuration> {
        let mut h = Vec::new();
        let _ = crate::machine::run_observed(m, Configuration::initial(input), steps, false, |c| h.push(c.clone()));
        h
    }

    #[test]
    fn settled_square_keeps_its_value() {
        // Six steps right, back to square 0, write 1 on step 7, then run
        // right forever.
        let m = parse(
            "state 0: (0,0,R,1)\nstate 1: (0,0,R,2)\nstate 2: (0,0,R,3)\nstate 3: (0,0,L,4)\n\
             state 4: (0,0,L,5)\nstate 5: (0,0,L,6)\nstate 6: (0,1,R,7)\nstate 7: (0,0,R,7)",
        )
        .unwrap();
        let h = history(&m, Tape::blank(), 200);
        assert_eq!(h[7].tape.get(0), Symbol::ONE);
        let LimitResult::Exact(c) = limit_config(&h, &LimitPolicy::default(), 99).unwrap() else {
            panic!()
        };
        assert_eq!((c.state, c.head), (99, 0));
        assert_eq!(c.tape.get(0), Symbol::ONE);
        assert_eq!(c.tape.get(1), Symbol::BLANK);
    }

    #[test]
    fn lamp_limit_is_one() {
        let h = history(&lamp(), Tape::blank(), 50);
        let LimitResult::Exact(c) = limit_config(&h, &LimitPolicy::default(), 0).unwrap() else {
            panic!()
        };
        assert_eq!(c.tape.get(0), Symbol::ONE);
        let out = run_ordinal(
            &OrdinalMachine::new(lamp()),
            Tape::blank(),
            OrdinalStage::new(1, 0),
            &LimitPolicy::default(),
            &DesignatedOutput::all(),
        )
        .unwrap();
        assert_eq!(out.config().unwrap().tape.get(0), Symbol::ONE);
    }

    #[test]
    fn constant_history() {
        let c = Configuration {
            state: 3,
            head: 2,
            tape: Tape::from_glyphs("0110").unwrap(),
            steps: 0,
        };
        let h: Vec<Configuration> = (0..5).map(|i| Configuration { steps: i, ..c.clone() }).collect();
        let LimitResult::Exact(l) = limit_config(&h, &LimitPolicy::default(), 9).unwrap() else {
            panic!()
        };
        assert_eq!(l, limit_from(c.tape.clone(), 9));
        assert_eq!(
            limit_config(&[], &LimitPolicy::default(), 0),
            Err(OrdinalError::EmptyHistory)
        );
    }

    /// Flips square 0 between `#` and blank on every sweep over a block of
    /// ones that grows by one each time. Never repeats, never drifts off.
    fn toggler() -> Machine {
        parse(
            "state 0: (0,2,R,1) (2,0,R,1)\nstate 1: (1,1,R,1) (0,1,L,2)\n\
             state 2: (1,1,L,2) (0,0,R,3) (2,2,R,3)\nstate 3: (1,1,L,0)",
        )
        .unwrap()
    }

    fn same(x: &Configuration, y: &Configuration) -> bool {
        (x.state, x.head, x.steps) == (y.state, y.head, y.steps) && x.tape.prefix(256) == y.tape.prefix(256)
    }

    fn same_outcome(x: &OrdinalOutcome, y: &OrdinalOutcome) -> bool {
        match (x.config(), y.config()) {
            (Some(a), Some(b)) => x.label() == y.label() && same(a, b),
            _ => x == y,
        }
    }

    #[test]
    fn flickering_without_proof() {
        let h = history(&toggler(), Tape::blank(), 2000);
        match limit_config(&h, &LimitPolicy::exact(2000), 0).unwrap() {
            LimitResult::Unresolved(sq) => assert!(sq.values().any(|s| *s != SquareStatus::Settled(Symbol::BLANK))),
            r => panic!("{r:?}"),
        }
    }

    #[test]
    fn finite_runs_are_unaffected() {
        let parity = parse(include_str!("../../../figures/parity.tm")).unwrap();
        for n in 0..8 {
            let plain = run(&parity, encode_unary(n), 10_000, false).unwrap();
            let out = run_ordinal(
                &OrdinalMachine::new(parity.clone()),
                encode_unary(n),
                OrdinalStage::new(1, 0),
                &LimitPolicy::default(),
                &DesignatedOutput::all(),
            )
            .unwrap();
            let cfg = plain.halted_config().unwrap();
            assert_eq!(
                out,
                OrdinalOutcome::HaltedAt {
                    stage: OrdinalStage::finite(cfg.steps),
                    config: cfg.clone(),
                    exact: true
                }
            );
        }
    }

    #[test]
    fn halting_detector_on_self_applied_codes() {
        let runner = parse("state 0: (0,0,R,0)").unwrap();
        let three = parse("state 0: (0,1,R,1)\nstate 1: (0,1,R,2)\nstate 2: (0,1,R,3)\nstate 3:").unwrap();
        assert_eq!(
            run(&three, Tape::blank(), 10, false)
                .unwrap()
                .halted_config()
                .unwrap()
                .steps,
            3
        );
        let p = LimitPolicy::default();
        let w = |m: &Machine, input: &Tape| run_accelerated(&halting_detector(m), detector_input(input), &p).unwrap();
        assert_eq!(w(&three, &Tape::blank()), AcceleratedOutput::One);
        assert_eq!(w(&runner, &Tape::blank()), AcceleratedOutput::Zero);
        assert_eq!(
            run_accelerated(&runner, Tape::blank(), &p).unwrap(),
            AcceleratedOutput::Zero
        );

        // x halts on x: the designated square reads 1 at stage ω.
        let small = parse("state 0: (0,1,R,1)\nstate 1: (0,1,R,2)\nstate 2:").unwrap();
        let x = godel::encode_code(&small, 0).unwrap();
        let (mx, ix) = godel::decode_code(x);
        let det = OrdinalMachine::new(halting_detector(&mx));
        for (m, one) in [(det, true), (OrdinalMachine::new(halting_detector(&runner)), false)] {
            let out = run_ordinal(
                &m,
                detector_input(&encode_unary(ix)),
                OrdinalStage::new(1, 0),
                &p,
                &DesignatedOutput::accelerated(),
            )
            .unwrap();
            assert_eq!(
                out.config().expect("resolved").tape.get(0) == Symbol::ONE,
                one,
                "{out:?}"
            );
        }
    }

    #[test]
    fn write_limit_is_enforced() {
        let out = run_accelerated(&lamp(), Tape::blank(), &LimitPolicy::default());
        assert!(matches!(out, Err(OrdinalError::WriteLimitExceeded { square: 0, .. })));
    }

    #[test]
    fn restricted_degenerate_cases() {
        let p = LimitPolicy::default();
        for m in enumerate_machines(2, 2).step_by(53) {
            let om = OrdinalMachine::with_limit_state(m.clone(), 0);
            let st = OrdinalStage::new(2, 5);
            let x = run_restricted_ittm(&om, Tape::blank(), st, &DesignatedOutput::all(), &p);
            let y = run_ordinal(&om, Tape::blank(), st, &p, &DesignatedOutput::all());
            match (&x, &y) {
                (Ok(x), Ok(y)) => assert!(same_outcome(x, y), "{x:?} vs {y:?}"),
                _ => assert_eq!(x, y),
            }
            let acc = run_accelerated(&m, Tape::blank(), &p);
            let res = run_restricted_ittm(
                &OrdinalMachine::new(m.clone()),
                Tape::blank(),
                OrdinalStage::new(1, 0),
                &DesignatedOutput::accelerated(),
                &p,
            );
            match (acc, res) {
                (Ok(a), Ok(r)) => {
                    let bit = r.config().map(|c| c.tape.get(0) == Symbol::ONE);
                    assert_eq!(
                        a,
                        match bit {
                            Some(true) => AcceleratedOutput::One,
                            Some(false) => AcceleratedOutput::Zero,
                            None => AcceleratedOutput::Unresolved,
                        }
                    );
                }
                (a, r) => assert_eq!(a.is_err(), r.is_err()),
            }
        }
    }

    /// Writes 1 on square `k` in the first ω-block and then drifts right;
    /// after each limit it starts over from its limit state.
    fn one_bit_per_block() -> Machine {
        parse(
            "alphabet 2
             state 0: (0,1,R,2)
             state 1: (0,0,R,3) (1,1,R,3)
             state 2: (0,0,R,2)
             state 3: (0,1,R,2) (1,1,R,2)",
        )
        .unwrap()
    }

    #[test]
    fn two_designated_bits_survive() {
        // Block 1 sets square 0; at the limit the head is back on square 0
        // in state 1, which steps to square 1 and sets it in block 2.
        let om = OrdinalMachine::with_limit_state(one_bit_per_block(), 1);
        let d = DesignatedOutput::squares([0, 1], Some(1));
        let out =
            run_restricted_ittm(&om, Tape::blank(), OrdinalStage::new(2, 0), &d, &LimitPolicy::default()).unwrap();
        let OrdinalOutcome::ReachedStageLimit { config, exact, .. } = out else {
            panic!("{out:?}")
        };
        assert!(exact);
        assert_eq!(config.tape.prefix(3), vec![Symbol::ONE, Symbol::ONE, Symbol::BLANK]);
    }

    #[test]
    fn approximate_limits_need_a_quiet_window() {
        let om = OrdinalMachine::new(toggler());
        let out = run_ordinal(
            &om,
            Tape::blank(),
            OrdinalStage::new(1, 0),
            &LimitPolicy::approx(5000, 1000),
            &DesignatedOutput::all(),
        )
        .unwrap();
        assert_eq!(out.label(), "limit_unresolved");
        let out = run_ordinal(
            &om,
            Tape::blank(),
            OrdinalStage::new(1, 0),
            &LimitPolicy::exact(5000),
            &DesignatedOutput::all(),
        )
        .unwrap();
        assert_eq!(out.label(), "limit_unresolved");
    }

    /// Independent limsup: replay three periods and take, per square, the
    /// value at the end if it never changed during the last two periods and
    /// the largest value seen otherwise.
    fn brute_limit(m: &Machine, cert: &Certificate) -> (Vec<Symbol>, usize) {
        let mut c = cert.start().clone();
        let p = cert.period();
        let mut seen: Vec<Vec<Symbol>> = Vec::new();
        for i in 0..3 * p {
            let next = *m.lookup(c.state, c.scanned()).unwrap();
            apply(&mut c, &next).unwrap();
            if i >= p {
                seen.push(c.tape.prefix(c.tape.explicit_len() + 1));
            }
        }
        let width = seen.iter().map(|s| s.len()).max().unwrap();
        let get = |s: &Vec<Symbol>, q: usize| s.get(q).copied().unwrap_or(Symbol::BLANK);
        let limit = (0..width)
            .map(|q| {
                let vals: Vec<Symbol> = seen.iter().map(|s| get(s, q)).collect();
                if vals.iter().all(|v| *v == vals[0]) {
                    vals[0]
                } else {
                    *vals.iter().max().unwrap()
                }
            })
            .collect();
        // For a drifting cycle only squares the head has left behind for
        // good are final.
        let trusted = match cert {
            Certificate::Translated {
                start, shift, margin, ..
            } => start.head - margin + shift,
            _ => width,
        };
        (limit, trusted)
    }

    #[test]
    fn limits_match_brute_force() {
        let mut checked = 0;
        for m in enumerate_machines(2, 2) {
            let Ok(RunOutcome::NonHaltingProven { certificate }) = run(&m, Tape::blank(), 500, true) else {
                continue;
            };
            let om = OrdinalMachine::new(m.clone());
            let tape = cycle_limit_tape(&certificate, &replay_cycle(&om, &certificate));
            let (limit, trusted) = brute_limit(&m, &certificate);
            for (q, want) in limit.iter().enumerate().take(trusted) {
                assert_eq!(tape.get(q), *want, "{m:?} square {q}");
            }
            checked += 1;
        }
        assert!(checked > 200);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn stage_arithmetic(m in crate::testutil::arb_machine(), b in 0u64..40, b2 in 0u64..40) {
            let om = OrdinalMachine::with_limit_state(m.clone(), 0);
            let p = LimitPolicy::exact(2000);
            let d = DesignatedOutput::all();
            let first = run_ordinal(&om, Tape::blank(), OrdinalStage::new(1, b), &p, &d);
            let whole = run_ordinal(&om, Tape::blank(), OrdinalStage::new(1, b + b2), &p, &d);
            if let (Ok(OrdinalOutcome::ReachedStageLimit { config, .. }), Ok(whole)) = (first, whole) {
                let rest = run_from(&om, config, b2, false).unwrap();
                match (rest, whole) {
                    (RunOutcome::Halted { config: x }, OrdinalOutcome::HaltedAt { config: y, .. }) => prop_assert!(same(&x, &y)),
                    (RunOutcome::BudgetExceeded { frontier: x }, OrdinalOutcome::ReachedStageLimit { config: y, .. }) => {
                        prop_assert!(same(&x, &y))
                    }
                    (x, y) => prop_assert!(false, "{:?} vs {:?}", x, y),
                }
            }
        }

        #[test]
        fn larger_blocks_keep_exact_limits(m in crate::testutil::arb_machine()) {
            let om = OrdinalMachine::new(m);
            let d = DesignatedOutput::all();
            let small = run_ordinal(&om, Tape::blank(), OrdinalStage::new(1, 0), &LimitPolicy::exact(200), &d);
            let large = run_ordinal(&om, Tape::blank(), OrdinalStage::new(1, 0), &LimitPolicy::exact(5000), &d);
            if let (Ok(s), Ok(l)) = (&small, &large) {
                if s.label() != "limit_unresolved" {
                    let (a, b) = (s.config().unwrap(), l.config().unwrap());
                    prop_assert_eq!(a.tape.prefix(64), b.tape.prefix(64));
                }
            }
        }
    }
}
