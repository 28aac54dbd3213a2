//! Oracle sources and oracle machines.
//!
//! An oracle call is made when the machine has no instruction to apply and
//! its [`OracleProgram`] says the situation is a call. The query is the
//! number of squares strictly between the two `μ` marks on the tape.

use std::collections::BTreeSet;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::{Certificate, LoopDetector};
use crate::godel;
use crate::machine::{
    apply, decode_unary, encode_unary, run, Configuration, Direction, Instruction, Machine, RunError, RunOutcome, Step,
    Symbol, Tape, TransitionTable,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleAnswer {
    Member,
    Nonmember,
    Unknown,
}

impl OracleAnswer {
    pub fn from_bool(b: bool) -> Self {
        if b {
            OracleAnswer::Member
        } else {
            OracleAnswer::Nonmember
        }
    }

    pub fn known(self) -> Option<bool> {
        match self {
            OracleAnswer::Member => Some(true),
            OracleAnswer::Nonmember => Some(false),
            OracleAnswer::Unknown => None,
        }
    }
}

/// Membership queries on a set of naturals. Answers for a given `n` must
/// never flip between member and nonmember.
pub trait OracleSource: Send + Sync {
    fn query_big(&self, n: &BigUint) -> OracleAnswer;

    fn query(&self, n: u64) -> OracleAnswer {
        self.query_big(&BigUint::from(n))
    }
}

impl<T: OracleSource + ?Sized> OracleSource for &T {
    fn query_big(&self, n: &BigUint) -> OracleAnswer {
        (**self).query_big(n)
    }
    fn query(&self, n: u64) -> OracleAnswer {
        (**self).query(n)
    }
}

impl<T: OracleSource + ?Sized> OracleSource for Arc<T> {
    fn query_big(&self, n: &BigUint) -> OracleAnswer {
        (**self).query_big(n)
    }
    fn query(&self, n: u64) -> OracleAnswer {
        (**self).query(n)
    }
}

impl<T: OracleSource + ?Sized> OracleSource for Box<T> {
    fn query_big(&self, n: &BigUint) -> OracleAnswer {
        (**self).query_big(n)
    }
    fn query(&self, n: u64) -> OracleAnswer {
        (**self).query(n)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteSet {
    members: BTreeSet<BigUint>,
}

impl FiniteSet {
    pub fn empty() -> Self {
        FiniteSet::default()
    }

    pub fn insert(&mut self, n: impl Into<BigUint>) {
        self.members.insert(n.into());
    }

    pub fn contains(&self, n: &BigUint) -> bool {
        self.members.contains(n)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &BigUint> {
        self.members.iter()
    }
}

impl<N: Into<BigUint>> FromIterator<N> for FiniteSet {
    fn from_iter<I: IntoIterator<Item = N>>(iter: I) -> Self {
        FiniteSet {
            members: iter.into_iter().map(Into::into).collect(),
        }
    }
}

impl OracleSource for FiniteSet {
    fn query_big(&self, n: &BigUint) -> OracleAnswer {
        OracleAnswer::from_bool(self.members.contains(n))
    }
}

/// Membership decided by a machine: `n` is a member when the machine halts
/// on unary `n` leaving unary 1, a nonmember when it leaves unary 0.
#[derive(Clone, Debug)]
pub struct ProgrammaticPredicate {
    machine: Machine,
    budget: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PredicateError {
    #[error("decider does not halt with a 0/1 answer on {0} within its budget")]
    NotTotal(u64),
}

impl ProgrammaticPredicate {
    /// Checks the decider on `0..checked` before accepting it.
    pub fn new(machine: Machine, budget: u64, checked: u64) -> Result<Self, PredicateError> {
        let p = ProgrammaticPredicate { machine, budget };
        for n in 0..checked {
            if p.decide(n).is_none() {
                return Err(PredicateError::NotTotal(n));
            }
        }
        Ok(p)
    }

    pub fn decide(&self, n: u64) -> Option<bool> {
        let out = run(&self.machine, encode_unary(n), self.budget, false).ok()?;
        match decode_unary(&out.halted_config()?.tape) {
            Ok(0) => Some(false),
            Ok(1) => Some(true),
            _ => None,
        }
    }
}

impl OracleSource for ProgrammaticPredicate {
    fn query_big(&self, n: &BigUint) -> OracleAnswer {
        match n.to_u64().and_then(|v| self.decide(v)) {
            Some(b) => OracleAnswer::from_bool(b),
            None => OracleAnswer::Unknown,
        }
    }
}

/// The set `{n : g(n) = 1}` for a bit generator `g`.
#[derive(Clone)]
pub struct BitOracle(pub Arc<dyn Fn(u64) -> bool + Send + Sync>);

impl OracleSource for BitOracle {
    fn query_big(&self, n: &BigUint) -> OracleAnswer {
        match n.to_u64() {
            Some(v) => OracleAnswer::from_bool((self.0)(v)),
            None => OracleAnswer::Unknown,
        }
    }
    fn query(&self, n: u64) -> OracleAnswer {
        OracleAnswer::from_bool((self.0)(n))
    }
}

/// The halting set, semi-decided under a step budget with loop detection:
/// member if the coded pair halts, nonmember with a certificate, unknown
/// otherwise.
#[derive(Clone, Debug)]
pub struct HaltingOracle {
    pub budget: u64,
}

impl OracleSource for HaltingOracle {
    fn query_big(&self, n: &BigUint) -> OracleAnswer {
        let (m, input) = godel::godel_decode(n);
        let Some(input) = input.to_u64() else {
            return OracleAnswer::Unknown;
        };
        match run(&m, encode_unary(input), self.budget, true) {
            Ok(RunOutcome::Halted { .. }) => OracleAnswer::Member,
            Ok(RunOutcome::NonHaltingProven { .. }) | Err(RunError::LeftEdge { .. }) => OracleAnswer::Nonmember,
            Ok(RunOutcome::BudgetExceeded { .. }) => OracleAnswer::Unknown,
        }
    }
}

/// What happens when no instruction applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stuck {
    Halt,
    /// Ask the oracle about `query`; a member answer continues in `member`,
    /// a nonmember answer in `nonmember` (halting if `None`).
    Call {
        query: u64,
        member: usize,
        nonmember: Option<usize>,
    },
    Malformed {
        markers: usize,
    },
}

/// A machine whose stuck configurations may be oracle calls.
pub trait OracleProgram: Send + Sync {
    fn machine(&self) -> &Machine;
    fn when_stuck(&self, config: &Configuration) -> Stuck;
}

impl OracleProgram for Machine {
    fn machine(&self) -> &Machine {
        self
    }
    fn when_stuck(&self, _: &Configuration) -> Stuck {
        Stuck::Halt
    }
}

/// Positions of every `μ` in the explicit part of the tape.
pub fn marker_positions(tape: &Tape) -> Vec<usize> {
    tape.cells()
        .iter()
        .enumerate()
        .filter(|(_, &s)| s == Symbol::MARKER)
        .map(|(i, _)| i)
        .collect()
}

fn call_query(tape: &Tape) -> Result<u64, usize> {
    let marks = marker_positions(tape);
    match marks.as_slice() {
        [a, b] => Ok((b - a - 1) as u64),
        other => Err(other.len()),
    }
}

/// An oracle machine with an explicit call state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OMachine {
    pub base: Machine,
    pub call_state: usize,
    pub one_state: usize,
    pub zero_state: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OMachineError {
    #[error("alphabet must include μ (size ≥ 4), got {0}")]
    NoMarker(u8),
    #[error("state {0} is out of range")]
    StateOutOfRange(usize),
    #[error("call state {0} must have no instructions")]
    CallStateHasInstructions(usize),
    #[error("state {0} must have outgoing instructions")]
    EmptyAnswerState(usize),
}

impl OMachine {
    pub fn new(base: Machine, call_state: usize, one_state: usize, zero_state: usize) -> Result<Self, OMachineError> {
        if base.alphabet_size() <= Symbol::MARKER.0 {
            return Err(OMachineError::NoMarker(base.alphabet_size()));
        }
        for s in [call_state, one_state, zero_state] {
            if s >= base.state_count() {
                return Err(OMachineError::StateOutOfRange(s));
            }
        }
        if !base.instructions(call_state).is_empty() {
            return Err(OMachineError::CallStateHasInstructions(call_state));
        }
        for s in [one_state, zero_state] {
            if base.instructions(s).is_empty() {
                return Err(OMachineError::EmptyAnswerState(s));
            }
        }
        Ok(OMachine {
            base,
            call_state,
            one_state,
            zero_state,
        })
    }
}

impl OracleProgram for OMachine {
    fn machine(&self) -> &Machine {
        &self.base
    }
    fn when_stuck(&self, config: &Configuration) -> Stuck {
        if config.state != self.call_state {
            return Stuck::Halt;
        }
        match call_query(&config.tape) {
            Ok(query) => Stuck::Call {
                query,
                member: self.one_state,
                nonmember: Some(self.zero_state),
            },
            Err(markers) => Stuck::Malformed { markers },
        }
    }
}

/// Oracle reading of an arbitrary decoded machine: being stuck on a `μ`
/// with exactly two marks on the tape is a call; a member answer continues
/// in the next state (cyclically), anything else halts. Relative to the
/// empty set this is exactly the plain machine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodedOMachine(pub Machine);

impl OracleProgram for DecodedOMachine {
    fn machine(&self) -> &Machine {
        &self.0
    }
    fn when_stuck(&self, config: &Configuration) -> Stuck {
        if config.scanned() != Symbol::MARKER {
            return Stuck::Halt;
        }
        match call_query(&config.tape) {
            Ok(query) => Stuck::Call {
                query,
                member: (config.state + 1) % self.0.state_count(),
                nonmember: None,
            },
            Err(_) => Stuck::Halt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RelError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("oracle call in state {state} with {markers} μ marks on the tape (need exactly 2)")]
    MalformedCall { state: usize, markers: usize, steps: u64 },
    #[error("oracle could not answer query {0}")]
    UnknownOracleAnswer(BigUint),
    #[error("simulation exceeded its budget after a member answer: the oracle is inconsistent")]
    InconsistentOracle,
    #[error("machine wrote square 0 in state {state} at step {steps}")]
    ReservedSquareWrite { state: usize, steps: u64 },
    #[error("state {state} offers more than two instructions for symbol {symbol}")]
    TooManyChoices { state: usize, symbol: Symbol },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OStep {
    Moved,
    Answered { query: u64, member: bool },
    Halted,
    Pending { query: u64 },
}

/// One step of an oracle program. A call that gets an answer is itself a
/// step: the head stays put and the state changes.
pub fn oracle_step<P, O>(prog: &P, oracle: &O, config: &mut Configuration) -> Result<OStep, RelError>
where
    P: OracleProgram + ?Sized,
    O: OracleSource + ?Sized,
{
    if let Some(ins) = prog.machine().instruction(config.state, config.scanned()) {
        apply(config, &ins)?;
        return Ok(OStep::Moved);
    }
    match prog.when_stuck(config) {
        Stuck::Halt => Ok(OStep::Halted),
        Stuck::Malformed { markers } => Err(RelError::MalformedCall {
            state: config.state,
            markers,
            steps: config.steps,
        }),
        Stuck::Call {
            query,
            member,
            nonmember,
        } => match oracle.query(query) {
            OracleAnswer::Unknown => Ok(OStep::Pending { query }),
            OracleAnswer::Member => {
                config.state = member;
                config.steps += 1;
                Ok(OStep::Answered { query, member: true })
            }
            OracleAnswer::Nonmember => match nonmember {
                Some(s) => {
                    config.state = s;
                    config.steps += 1;
                    Ok(OStep::Answered { query, member: false })
                }
                None => Ok(OStep::Halted),
            },
        },
    }
}

/// Step function suitable for [`Certificate::verify_with`].
pub fn replay_step<'a, P, O>(
    prog: &'a P,
    oracle: &'a O,
) -> impl FnMut(&mut Configuration) -> Result<Step, RunError> + 'a
where
    P: OracleProgram + ?Sized,
    O: OracleSource + ?Sized,
{
    move |c| match oracle_step(prog, oracle, c) {
        Ok(OStep::Moved) | Ok(OStep::Answered { .. }) => Ok(Step::Moved),
        Ok(_) => Ok(Step::Halted),
        Err(RelError::Run(e)) => Err(e),
        Err(_) => Ok(Step::Halted),
    }
}

enum Peek {
    Continue,
    Halt,
    Pending(u64),
}

fn peek<P, O>(prog: &P, oracle: &O, config: &Configuration) -> Result<Peek, RelError>
where
    P: OracleProgram + ?Sized,
    O: OracleSource + ?Sized,
{
    if prog.machine().instruction(config.state, config.scanned()).is_some() {
        return Ok(Peek::Continue);
    }
    match prog.when_stuck(config) {
        Stuck::Halt => Ok(Peek::Halt),
        Stuck::Malformed { markers } => Err(RelError::MalformedCall {
            state: config.state,
            markers,
            steps: config.steps,
        }),
        Stuck::Call { query, nonmember, .. } => Ok(match oracle.query(query) {
            OracleAnswer::Unknown => Peek::Pending(query),
            OracleAnswer::Nonmember if nonmember.is_none() => Peek::Halt,
            _ => Peek::Continue,
        }),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleRun {
    pub outcome: RunOutcome,
    /// Query the run is waiting on, when it stopped on an unknown answer.
    pub pending_query: Option<u64>,
    /// Every answered query in order.
    pub queries: Vec<(u64, bool)>,
}

impl OracleRun {
    /// Unary output of a halted run.
    pub fn output(&self) -> Option<u64> {
        decode_unary(&self.outcome.halted_config()?.tape).ok()
    }
}

pub fn run_oracle_program<P, O>(
    prog: &P,
    oracle: &O,
    input: Tape,
    budget: u64,
    detect: bool,
) -> Result<OracleRun, RelError>
where
    P: OracleProgram + ?Sized,
    O: OracleSource + ?Sized,
{
    let mut config = Configuration::initial(input);
    let mut detector = detect.then(LoopDetector::new);
    if let Some(d) = detector.as_mut() {
        d.observe(&config);
    }
    let mut queries = Vec::new();
    let mut used = 0;
    loop {
        // Halting is checked before the budget so a run that halts at its
        // last permitted step is reported as halted.
        match peek(prog, oracle, &config)? {
            Peek::Halt => {
                return Ok(OracleRun {
                    outcome: RunOutcome::Halted { config },
                    pending_query: None,
                    queries,
                })
            }
            Peek::Pending(query) => {
                return Ok(OracleRun {
                    outcome: RunOutcome::BudgetExceeded { frontier: config },
                    pending_query: Some(query),
                    queries,
                })
            }
            Peek::Continue => {}
        }
        if used == budget {
            return Ok(OracleRun {
                outcome: RunOutcome::BudgetExceeded { frontier: config },
                pending_query: None,
                queries,
            });
        }
        let step = oracle_step(prog, oracle, &mut config)?;
        used += 1;
        if let OStep::Answered { query, member } = step {
            queries.push((query, member));
        }
        if let Some(d) = detector.as_mut() {
            if matches!(step, OStep::Answered { .. }) {
                d.note_external_input();
            }
            if let Some(certificate) = d.observe(&config) {
                return Ok(OracleRun {
                    outcome: RunOutcome::NonHaltingProven { certificate },
                    pending_query: None,
                    queries,
                });
            }
        }
    }
}

pub fn run_o_machine<O: OracleSource + ?Sized>(
    m: &OMachine,
    oracle: &O,
    input: Tape,
    budget: u64,
) -> Result<OracleRun, RelError> {
    run_oracle_program(m, oracle, input, budget, true)
}

/// Decides `f(n)` for a semi-computable `f` by first asking a halting
/// oracle whether `(f, n)` halts.
pub fn compute_re_via_halting_oracle<O: OracleSource + ?Sized>(
    f: &Machine,
    n: u64,
    oracle: &O,
    budget: u64,
) -> Result<u64, RelError> {
    let code = godel::godel_encode(f, &BigUint::from(n));
    match oracle.query_big(&code) {
        OracleAnswer::Nonmember => Ok(0),
        OracleAnswer::Unknown => Err(RelError::UnknownOracleAnswer(code)),
        OracleAnswer::Member => match run(f, encode_unary(n), budget, false)? {
            RunOutcome::Halted { config } => Ok(decode_unary(&config.tape).map_err(|_| RelError::InconsistentOracle)?),
            _ => Err(RelError::InconsistentOracle),
        },
    }
}

/// Re-checks a certificate produced by an oracle run.
pub fn verify_oracle_certificate<P, O>(cert: &Certificate, prog: &P, oracle: &O) -> bool
where
    P: OracleProgram + ?Sized,
    O: OracleSource + ?Sized,
{
    match cert {
        Certificate::LeftEdge { .. } => cert.verify(prog.machine()),
        _ => cert.verify_with(replay_step(prog, oracle)),
    }
}

fn ins(read: u8, write: u8, dir: Direction, next: usize) -> Instruction {
    Instruction::new(read, write, dir, next)
}

/// O-machine computing the characteristic function of its oracle on a
/// unary input: brackets the input with `μ` marks, calls, then cleans up
/// and leaves unary 1 or 0.
pub fn characteristic_machine() -> OMachine {
    use Direction::{Left as L, Right as R};
    const MU: u8 = 3;
    let (s1, call, y, z, h) = (1, 2, 3, 7, 11);
    let mut states = vec![
        vec![ins(0, MU, R, s1)],
        vec![ins(1, 1, R, s1), ins(0, MU, R, call)],
        vec![],
    ];
    for (base, last) in [(y, 1u8), (z, 0u8)] {
        states.push(vec![ins(0, 0, L, base + 1)]);
        states.push(vec![ins(MU, 0, L, base + 2)]);
        states.push(vec![ins(1, 0, L, base + 2), ins(MU, 0, R, base + 3)]);
        states.push(vec![ins(0, last, L, h)]);
    }
    states.push(vec![]);
    OMachine::new(Machine::new(4, states).unwrap(), call, y, z).unwrap()
}
