//! Semi-computation: dovetailed simulation of machine families, staged
//! halting sets and their jumps, and reals approximated from one side.
//!
//! Scheduling is triangular. Round `r` touches every unresolved member
//! `0..=r` once, in index order; a touch is one step, or the discovery that
//! the member halts. The total number of touches is the budget. Because each
//! member's run depends only on itself, the touches it receives are a pure
//! function of the budget and of how long the members take to resolve, so
//! members are simulated independently (and in parallel) and the table is
//! identical to a strictly sequential schedule.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::sync::Arc;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::{Certificate, LoopDetector};
use crate::godel;
use crate::machine::{encode_unary, run, Configuration, Machine, Symbol, Tape, TransitionTable};
use crate::par;
use crate::relativized::{
    oracle_step, DecodedOMachine, FiniteSet, OStep, OracleAnswer, OracleProgram, OracleSource, RelError,
};

/// One machine/input pair of a family.
#[derive(Clone)]
pub struct Member {
    pub code: u64,
    pub program: Arc<dyn OracleProgram>,
    pub input: Tape,
}

#[derive(Clone, Default)]
pub struct Family {
    pub members: Vec<Member>,
}

impl Family {
    /// Plain machines decoded from Gödel codes.
    pub fn codes(codes: impl IntoIterator<Item = u64>) -> Self {
        Family {
            members: codes
                .into_iter()
                .map(|code| {
                    let (m, input) = godel::decode_code(code);
                    Member {
                        code,
                        program: Arc::new(m),
                        input: encode_unary(input),
                    }
                })
                .collect(),
        }
    }

    /// Codes read as oracle machines (see [`DecodedOMachine`]).
    pub fn decoded(codes: impl IntoIterator<Item = u64>) -> Self {
        Family {
            members: codes
                .into_iter()
                .map(|code| {
                    let (m, input) = godel::decode_code(code);
                    Member {
                        code,
                        program: Arc::new(DecodedOMachine(m)),
                        input: encode_unary(input),
                    }
                })
                .collect(),
        }
    }

    /// Explicit pairs; `None` if some code does not fit in 64 bits.
    pub fn pairs(pairs: &[(Machine, u64)]) -> Option<Self> {
        let members = pairs
            .iter()
            .map(|(m, input)| {
                Some(Member {
                    code: godel::encode_code(m, *input)?,
                    program: Arc::new(m.clone()),
                    input: encode_unary(*input),
                })
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Family { members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Snapshot of a halting set at some stage.
///
/// `halted` members are certain; `proven` members are certainly out. With
/// `closed` set, every code not in `halted` is out: the table is exact.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "StageRecord", into = "StageRecord")]
pub struct StageTable {
    pub stage: u64,
    pub halted: BTreeSet<u64>,
    pub proven: BTreeMap<u64, Certificate>,
    pub closed: bool,
}

#[derive(Serialize, Deserialize)]
struct ProvenEntry {
    code: u64,
    certificate: Certificate,
}

#[derive(Serialize, Deserialize)]
struct StageRecord {
    stage: u64,
    halted: Vec<u64>,
    proven: Vec<ProvenEntry>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    closed: bool,
}

#[derive(Debug, Error)]
pub enum StageTableError {
    #[error("code {0} is listed both as halted and as proven non-halting")]
    Overlap(u64),
}

impl TryFrom<StageRecord> for StageTable {
    type Error = StageTableError;
    fn try_from(r: StageRecord) -> Result<Self, Self::Error> {
        let halted: BTreeSet<u64> = r.halted.into_iter().collect();
        let mut proven = BTreeMap::new();
        for e in r.proven {
            if halted.contains(&e.code) {
                return Err(StageTableError::Overlap(e.code));
            }
            proven.insert(e.code, e.certificate);
        }
        Ok(StageTable {
            stage: r.stage,
            halted,
            proven,
            closed: r.closed,
        })
    }
}

impl From<StageTable> for StageRecord {
    fn from(t: StageTable) -> Self {
        StageRecord {
            stage: t.stage,
            halted: t.halted.into_iter().collect(),
            proven: t
                .proven
                .into_iter()
                .map(|(code, certificate)| ProvenEntry { code, certificate })
                .collect(),
            closed: t.closed,
        }
    }
}

impl StageTable {
    /// The empty set, exactly.
    pub fn empty_set() -> Self {
        StageTable {
            closed: true,
            ..StageTable::default()
        }
    }

    /// An exact finite set.
    pub fn exact(members: impl IntoIterator<Item = u64>) -> Self {
        StageTable {
            halted: members.into_iter().collect(),
            closed: true,
            ..StageTable::default()
        }
    }

    pub fn answer(&self, code: u64) -> OracleAnswer {
        if self.halted.contains(&code) {
            OracleAnswer::Member
        } else if self.closed || self.proven.contains_key(&code) {
            OracleAnswer::Nonmember
        } else {
            OracleAnswer::Unknown
        }
    }

    /// Every member of `self` is a member of `later`, and likewise for
    /// proven non-members.
    pub fn refined_by(&self, later: &StageTable) -> bool {
        self.halted.is_subset(&later.halted) && self.proven.keys().all(|k| later.proven.contains_key(k))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("stage tables always serialize")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

impl OracleSource for StageTable {
    fn query_big(&self, n: &BigUint) -> OracleAnswer {
        match u64::try_from(n) {
            Ok(v) => self.answer(v),
            Err(_) if self.closed => OracleAnswer::Nonmember,
            Err(_) => OracleAnswer::Unknown,
        }
    }
    fn query(&self, n: u64) -> OracleAnswer {
        self.answer(n)
    }
}

#[derive(Clone, Debug)]
enum Verdict {
    Halted,
    Proven(Certificate),
}

#[derive(Clone, Debug)]
enum SimState {
    Running,
    Suspended,
    Done(Verdict),
}

/// Incremental simulation of one member, counting touches.
#[derive(Clone, Debug)]
struct Sim {
    config: Configuration,
    detector: LoopDetector,
    touches: u64,
    state: SimState,
}

impl Sim {
    fn new(input: Tape) -> Self {
        let config = Configuration::initial(input);
        let mut detector = LoopDetector::new();
        let state = match detector.observe(&config) {
            Some(c) => SimState::Done(Verdict::Proven(c)),
            None => SimState::Running,
        };
        Sim {
            config,
            detector,
            touches: 0,
            state,
        }
    }

    fn touch(&mut self, prog: &dyn OracleProgram, oracle: &dyn OracleSource) {
        self.touches += 1;
        match oracle_step(prog, oracle, &mut self.config) {
            Ok(step @ (OStep::Moved | OStep::Answered { .. })) => {
                if matches!(step, OStep::Answered { .. }) {
                    self.detector.note_external_input();
                }
                if let Some(c) = self.detector.observe(&self.config) {
                    self.state = SimState::Done(Verdict::Proven(c));
                }
            }
            Ok(OStep::Halted) => self.state = SimState::Done(Verdict::Halted),
            Ok(OStep::Pending { .. }) => self.state = SimState::Suspended,
            Err(RelError::Run(_)) => {
                self.state = SimState::Done(Verdict::Proven(Certificate::LeftEdge {
                    at: self.config.clone(),
                }))
            }
            // A malformed call stops the run the way a halt would.
            Err(_) => self.state = SimState::Done(Verdict::Halted),
        }
    }

    fn advance_to(&mut self, target: u64, prog: &dyn OracleProgram, oracle: &dyn OracleSource) {
        while matches!(self.state, SimState::Running) && self.touches < target {
            self.touch(prog, oracle);
        }
    }

    /// Touches needed to resolve, if already known.
    fn cost(&self) -> Option<u64> {
        match self.state {
            SimState::Done(_) => Some(self.touches),
            _ => None,
        }
    }
}

/// Touches granted to each member under the triangular schedule, and the
/// number of rounds started. `costs[i]` is the number of touches member `i`
/// consumes before it stops being scheduled (`None`: never).
pub fn allocate(costs: &[Option<u64>], budget: u64) -> (Vec<u64>, u64) {
    let n = costs.len();
    let mut grant = vec![0u64; n];
    if n == 0 || budget == 0 {
        return (grant, 0);
    }
    let mut remaining = budget;
    let mut round = 0u64;
    let mut active = 0u64;
    let mut entered = 0usize;
    // Min-heap of (first round in which the member is no longer active).
    let mut exits: BinaryHeap<Reverse<u64>> = BinaryHeap::new();
    let mut partial = false;
    loop {
        while entered < n && entered as u64 <= round {
            match costs[entered] {
                Some(0) => {}
                Some(c) => {
                    active += 1;
                    exits.push(Reverse(entered as u64 + c));
                }
                None => active += 1,
            }
            entered += 1;
        }
        while let Some(&Reverse(r)) = exits.peek() {
            if r <= round {
                exits.pop();
                active -= 1;
            } else {
                break;
            }
        }
        if active == 0 {
            if entered >= n {
                break;
            }
            round = entered as u64;
            continue;
        }
        let next_entry = if entered < n { entered as u64 } else { u64::MAX };
        let next_exit = exits.peek().map(|r| r.0).unwrap_or(u64::MAX);
        let event = next_entry.min(next_exit);
        let span = event - round;
        let full = (remaining / active).min(span);
        remaining -= full * active;
        round += full;
        if full < span {
            partial = remaining > 0;
            break;
        }
    }
    for (i, g) in grant.iter_mut().enumerate() {
        let i = i as u64;
        if i < round {
            *g = costs[i as usize].map_or(round - i, |c| c.min(round - i));
        }
    }
    if partial {
        for (i, g) in grant.iter_mut().enumerate() {
            if remaining == 0 || i as u64 > round {
                break;
            }
            if costs[i].is_none_or(|c| *g < c) {
                *g += 1;
                remaining -= 1;
            }
        }
    }
    (grant, round + u64::from(partial))
}

/// Dovetails `family` relative to `oracle` with `budget` touches in total.
pub fn dovetail_with(family: &Family, oracle: &dyn OracleSource, budget: u64) -> StageTable {
    let members = &family.members;
    let mut sims: Vec<Sim> = members.iter().map(|m| Sim::new(m.input.clone())).collect();
    let (grant, stage) = loop {
        let costs: Vec<Option<u64>> = sims.iter().map(Sim::cost).collect();
        let (grant, stage) = allocate(&costs, budget);
        let behind = sims
            .iter()
            .zip(&grant)
            .any(|(s, &g)| matches!(s.state, SimState::Running) && s.touches < g);
        if !behind {
            break (grant, stage);
        }
        // Unknown costs were treated as infinite, so grants only grow from
        // one pass to the next.
        par::for_each_mut(&mut sims, |i, s| s.advance_to(grant[i], &*members[i].program, oracle));
    };
    let mut table = StageTable {
        stage,
        ..StageTable::default()
    };
    for ((m, s), g) in members.iter().zip(&sims).zip(&grant) {
        if let (SimState::Done(v), Some(c)) = (&s.state, s.cost()) {
            if c <= *g {
                match v {
                    Verdict::Halted => {
                        table.halted.insert(m.code);
                    }
                    Verdict::Proven(cert) => {
                        table.proven.insert(m.code, cert.clone());
                    }
                }
            }
        }
    }
    table
}

pub fn dovetail(family: &Family, budget: u64) -> StageTable {
    dovetail_with(family, &FiniteSet::empty(), budget)
}

/// Halting-set stage over the codes `0..count`.
pub fn halting_stage(count: u64, budget: u64) -> StageTable {
    dovetail(&Family::codes(0..count), budget)
}

/// Does the pair coded by `n` halt within `t` steps?
pub fn halts_by(n: u64, t: u64) -> bool {
    let (m, input) = godel::decode_code(n);
    matches!(run(&m, encode_unary(input), t, false), Ok(o) if o.is_halted())
}

/// One stage of the jump of `base`: which of `codes`, read as oracle
/// machines, halt relative to `base` within `budget` touches. Queries
/// `base` cannot answer yet suspend the member.
pub fn jump_stage(base: &StageTable, codes: &[u64], budget: u64) -> StageTable {
    dovetail_with(&Family::decoded(codes.iter().copied()), base, budget)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    FromBelow,
    FromAbove,
}

/// A real in `[0, 1]` given by a sequence of finite binary approximations.
/// Stage values are `Σ bits[n]·2^-(n+1)`, plus `2^-width` (an implicit tail
/// of ones) when approached from above.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApproxReal {
    pub direction: Approach,
    pub width: usize,
    pub stages: Vec<Vec<bool>>,
}

impl ApproxReal {
    pub fn value(&self, stage: usize) -> BigRational {
        let mut v = BigRational::zero();
        let mut w = BigRational::new(1.into(), 2.into());
        let half = BigRational::new(1.into(), 2.into());
        for &b in &self.stages[stage] {
            if b {
                v += &w;
            }
            w *= &half;
        }
        if self.direction == Approach::FromAbove {
            // w is now 2^-(width+1); the tail of ones adds 2^-width.
            v += &w + &w;
        }
        v
    }

    pub fn values(&self) -> Vec<BigRational> {
        (0..self.stages.len()).map(|s| self.value(s)).collect()
    }

    /// `1 - x`, approached from the other side.
    pub fn complement(&self) -> ApproxReal {
        ApproxReal {
            direction: match self.direction {
                Approach::FromBelow => Approach::FromAbove,
                Approach::FromAbove => Approach::FromBelow,
            },
            width: self.width,
            stages: self.stages.iter().map(|s| s.iter().map(|b| !b).collect()).collect(),
        }
    }

    /// Values move only in the promised direction.
    pub fn is_monotone(&self) -> bool {
        let vs = self.values();
        vs.windows(2).all(|w| match self.direction {
            Approach::FromBelow => w[0] <= w[1],
            Approach::FromAbove => w[0] >= w[1],
        })
    }
}

/// The characteristic real of a staged set: bit `n` is set once code `n`
/// is seen to halt.
pub fn emit_semi_real(tables: &[StageTable], width: usize) -> ApproxReal {
    ApproxReal {
        direction: Approach::FromBelow,
        width,
        stages: tables
            .iter()
            .map(|t| (0..width as u64).map(|n| t.halted.contains(&n)).collect())
            .collect(),
    }
}

/// The same real approached from above: bit `n` is cleared once code `n`
/// is proven never to halt.
pub fn emit_co_semi_real(tables: &[StageTable], width: usize) -> ApproxReal {
    ApproxReal {
        direction: Approach::FromAbove,
        width,
        stages: tables
            .iter()
            .map(|t| (0..width as u64).map(|n| !t.proven.contains_key(&n)).collect())
            .collect(),
    }
}

pub fn one() -> BigRational {
    BigRational::one()
}

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("square {position} left of a # was changed at step {steps}")]
pub struct ProtocolViolation {
    pub position: usize,
    pub steps: u64,
}

/// Tracks the finalized digits of a machine using the `#` protocol: the
/// digits are the non-`#` symbols left of the rightmost `#`. After the
/// first violation the output is frozen.
#[derive(Clone, Debug, Default)]
pub struct DigitWatcher {
    last_separator: Option<usize>,
    digits: Vec<Symbol>,
    violation: Option<ProtocolViolation>,
}

impl DigitWatcher {
    pub fn new(tape: &Tape) -> Self {
        let mut w = DigitWatcher::default();
        if let Some(p) = tape.cells().iter().rposition(|&s| s == Symbol::SEPARATOR) {
            w.last_separator = Some(p);
            w.digits = tape.cells()[..p]
                .iter()
                .copied()
                .filter(|&s| s != Symbol::SEPARATOR)
                .collect();
        }
        w
    }

    /// Records that square `pos` changed from `old` to `new`; `tape` is the
    /// tape after the write.
    pub fn on_write(&mut self, pos: usize, old: Symbol, new: Symbol, tape: &Tape, steps: u64) {
        if self.violation.is_some() || old == new {
            return;
        }
        if self.last_separator.is_some_and(|l| pos <= l) {
            self.violation = Some(ProtocolViolation { position: pos, steps });
            return;
        }
        if new == Symbol::SEPARATOR {
            let from = self.last_separator.map_or(0, |l| l + 1);
            self.digits
                .extend((from..pos).map(|p| tape.get(p)).filter(|&s| s != Symbol::SEPARATOR));
            self.last_separator = Some(pos);
        }
    }

    pub fn digits(&self) -> &[Symbol] {
        &self.digits
    }

    pub fn digit_string(&self) -> String {
        self.digits.iter().map(|s| s.glyph()).collect()
    }

    pub fn violation(&self) -> Option<&ProtocolViolation> {
        self.violation.as_ref()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigitPrefix {
    pub digits: String,
    pub steps: u64,
    pub halted: bool,
}

/// Finalized digits printed by `m` from a blank tape within `budget` steps.
pub fn digits_with_separator(m: &Machine, budget: u64) -> Result<DigitPrefix, ProtocolViolation> {
    let mut config = Configuration::initial(Tape::blank());
    let mut watcher = DigitWatcher::new(&config.tape);
    let mut halted = false;
    loop {
        let Some(ins) = m.instruction(config.state, config.scanned()) else {
            halted = true;
            break;
        };
        if config.steps == budget {
            break;
        }
        let pos = config.head;
        let old = config.scanned();
        if crate::machine::apply(&mut config, &ins).is_err() {
            break;
        }
        watcher.on_write(pos, old, ins.write, &config.tape, config.steps);
        if let Some(v) = watcher.violation() {
            return Err(v.clone());
        }
    }
    Ok(DigitPrefix {
        digits: watcher.digit_string(),
        steps: config.steps,
        halted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;
    use crate::machine::RunOutcome;
    use proptest::prelude::*;

    #[derive(Debug, PartialEq, Eq)]
    enum Class {
        Halted,
        Proven,
        Open,
    }

    fn alone(code: u64, budget: u64) -> Class {
        let (m, input) = godel::decode_code(code);
        match run(&m, encode_unary(input), budget, true) {
            Ok(RunOutcome::Halted { .. }) => Class::Halted,
            Ok(RunOutcome::NonHaltingProven { .. }) | Err(_) => Class::Proven,
            Ok(RunOutcome::BudgetExceeded { .. }) => Class::Open,
        }
    }

    fn class_in(t: &StageTable, code: u64) -> Class {
        if t.halted.contains(&code) {
            Class::Halted
        } else if t.proven.contains_key(&code) {
            Class::Proven
        } else {
            Class::Open
        }
    }

    /// Straightforward round-by-round scheduler used as a reference.
    fn sequential(codes: &[u64], budget: u64) -> StageTable {
        let family = Family::codes(codes.iter().copied());
        let mut sims: Vec<Sim> = family.members.iter().map(|m| Sim::new(m.input.clone())).collect();
        let empty = FiniteSet::empty();
        let mut left = budget;
        let mut round = 0usize;
        let mut stage = 0;
        while left > 0 && (round < sims.len() || sims.iter().any(|s| matches!(s.state, SimState::Running))) {
            let mut touched = false;
            for i in 0..=round.min(sims.len().saturating_sub(1)) {
                if left == 0 {
                    break;
                }
                if matches!(sims[i].state, SimState::Running) {
                    sims[i].touch(&*family.members[i].program, &empty);
                    left -= 1;
                    touched = true;
                }
            }
            if touched || round < sims.len() {
                stage = round as u64 + 1;
            }
            round += 1;
            if round >= sims.len() && !sims.iter().any(|s| matches!(s.state, SimState::Running)) {
                break;
            }
        }
        let mut t = StageTable {
            stage,
            ..StageTable::default()
        };
        for (m, s) in family.members.iter().zip(&sims) {
            match &s.state {
                SimState::Done(Verdict::Halted) => {
                    t.halted.insert(m.code);
                }
                SimState::Done(Verdict::Proven(c)) => {
                    t.proven.insert(m.code, c.clone());
                }
                _ => {}
            }
        }
        t
    }

    #[test]
    fn agrees_with_per_pair_runs() {
        let t = halting_stage(32, 10_000);
        for code in 0..32 {
            assert_eq!(class_in(&t, code), alone(code, 10_000), "code {code}");
        }
    }

    #[test]
    fn zero_budget_is_empty() {
        let t = halting_stage(32, 0);
        assert!(t.halted.is_empty() && t.proven.is_empty());
        assert_eq!(t.stage, 0);
    }

    #[test]
    fn matches_sequential_schedule() {
        let codes: Vec<u64> = (0..40).chain(500..520).collect();
        for budget in [0, 1, 2, 5, 17, 100, 333, 2000] {
            let fast = dovetail(&Family::codes(codes.iter().copied()), budget);
            let slow = sequential(&codes, budget);
            assert_eq!(fast.halted, slow.halted, "budget {budget}");
            assert_eq!(fast.proven, slow.proven, "budget {budget}");
        }
    }

    #[test]
    fn stage_table_json_round_trip() {
        let t = halting_stage(20, 500);
        let back = StageTable::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
        assert!(t.to_json().starts_with("{\"stage\":"));
        for cert in t.proven.values() {
            if let Certificate::LeftEdge { .. } = cert {
                continue;
            }
            assert!(cert.start().tape.background().is_none());
        }
    }

    #[test]
    fn halts_by_basics() {
        assert!(halts_by(0, 0));
        let runner = godel::encode_code(&parse("state 0: (0,0,R,0)").unwrap(), 0).unwrap();
        for t in [0, 1, 10, 1000, 1_000_000] {
            assert!(!halts_by(runner, t));
        }
    }

    #[test]
    fn jump_of_empty_is_dovetail() {
        let codes: Vec<u64> = (0..32).collect();
        let direct = halting_stage(32, 10_000);
        let jumped = jump_stage(&StageTable::empty_set(), &codes, 10_000);
        assert_eq!(jumped, direct);
        assert_eq!(jump_stage(&StageTable::empty_set(), &codes, 0).halted.len(), 0);
    }

    #[test]
    fn semi_real_from_both_sides() {
        let tables: Vec<StageTable> = (0..100).map(|b| halting_stage(16, b * 3)).collect();
        let below = emit_semi_real(&tables, 16);
        assert!(below.is_monotone());
        let comp = below.complement();
        assert!(comp.is_monotone());
        for s in 0..tables.len() {
            assert_eq!(comp.value(s), one() - below.value(s));
        }
        let above = emit_co_semi_real(&tables, 16);
        assert!(above.is_monotone());
        for s in 0..tables.len() {
            assert!(below.value(s) <= above.value(s));
        }
        let last = tables.last().unwrap();
        for n in 0..16 {
            assert_eq!(last.halted.contains(&n), alone(n, 100_000) == Class::Halted);
        }
    }

    #[test]
    fn one_third_digits() {
        let m = parse(include_str!("../../../figures/one-third.tm")).unwrap();
        assert!(digits_with_separator(&m, 50).unwrap().digits.starts_with("01010101"));
        assert_eq!(digits_with_separator(&m, 1).unwrap().digits, "");
        let short = digits_with_separator(&m, 100).unwrap().digits;
        let long = digits_with_separator(&m, 10_000).unwrap().digits;
        assert!(long.starts_with(&short));
    }

    #[test]
    fn rewriting_a_digit_is_a_violation() {
        // Prints 1#, then walks back and overwrites the 1.
        let m = parse("alphabet 3\nstate 0: (0,1,R,1)\nstate 1: (0,#,L,2)\nstate 2: (1,0,R,3)\nstate 3:").unwrap();
        assert_eq!(
            digits_with_separator(&m, 10),
            Err(ProtocolViolation { position: 0, steps: 3 })
        );
    }

    proptest! {
        #[test]
        fn halted_sets_grow(a in 0u64..3000, b in 0u64..3000) {
            let (lo, hi) = (a.min(b), a.max(b));
            let t1 = halting_stage(48, lo);
            let t2 = halting_stage(48, hi);
            prop_assert!(t1.refined_by(&t2));
            prop_assert!(t1.stage <= t2.stage);
        }

        #[test]
        fn halts_by_is_monotone(n in 0u64..5000, t in 0u64..200, dt in 0u64..200) {
            if halts_by(n, t) {
                prop_assert!(halts_by(n, t + dt));
            }
        }

        #[test]
        fn allocation_spends_exactly_the_budget(
            costs in proptest::collection::vec(proptest::option::of(0u64..50), 0..30),
            budget in 0u64..2000,
        ) {
            let (grant, _) = allocate(&costs, budget);
            let spent: u64 = grant.iter().sum();
            let need: Option<u64> = costs.iter().try_fold(0u64, |acc, c| c.map(|c| acc + c));
            match need {
                Some(total) if total <= budget => prop_assert_eq!(spent, total),
                _ => prop_assert_eq!(spent, budget),
            }
            for (g, c) in grant.iter().zip(&costs) {
                if let Some(c) = c {
                    prop_assert!(g <= c);
                }
            }
        }
    }
}
